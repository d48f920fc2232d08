//! Backpropagation against central finite differences.

use ndarray::{Array2, ArrayView2};

use crate::error::{HscError, Result};

use super::model::SemanticCodec;
use super::nn::Mlp;
use super::train::{batch_gradients, codec_params_mut, BatchNoise, LossWeights};

pub const FD_STEP: f64 = 1e-5;

/// Gradients below this magnitude are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn compare<F>(analytic: &[Vec<f64>], params: &mut [Vec<f64>], mut loss: F) -> Result<GradCheck>
where
    F: FnMut(&[Vec<f64>]) -> Result<f64>,
{
    let mut worst = 0.0f64;
    let mut checked = 0;
    for s in 0..params.len() {
        for i in 0..params[s].len() {
            let orig = params[s][i];
            params[s][i] = orig + FD_STEP;
            let up = loss(params)?;
            params[s][i] = orig - FD_STEP;
            let down = loss(params)?;
            params[s][i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[s][i], numeric));
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        checked,
    })
}

/// Loss `½‖f(x) − target‖²` on a bare MLP.
pub fn grad_check_mlp(mlp: &Mlp, input: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<GradCheck> {
    let trace = mlp.forward_trace(input);
    if trace.output().dim() != target.dim() {
        return Err(HscError::dims(
            "gradient check target",
            format!("{:?}", trace.output().dim()),
            format!("{:?}", target.dim()),
        ));
    }
    let (grads, _) = mlp.backward(&trace, &(trace.output() - &target));
    let analytic: Vec<Vec<f64>> = grads.iter().flat_map(|g| [g.weight.iter().copied().collect(), g.bias.to_vec()]).collect();
    let mut params: Vec<Vec<f64>> = mlp
        .layers
        .iter()
        .flat_map(|l| [l.weight.iter().copied().collect(), l.bias.to_vec()])
        .collect();
    let mut probe = mlp.clone();
    compare(&analytic, &mut params, |p| {
        for (j, layer) in probe.layers.iter_mut().enumerate() {
            layer.weight.as_slice_mut().unwrap().copy_from_slice(&p[2 * j]);
            layer.bias.as_slice_mut().unwrap().copy_from_slice(&p[2 * j + 1]);
        }
        let out = probe.forward(input);
        Ok(0.5 * (&out - &target).iter().map(|v| v * v).sum::<f64>())
    })
}

/// The full training loss of a variational transceiver (encoder, heads,
/// reparameterization, power normalization, link, decoder, KL) against its
/// analytic gradient, with `noise` held fixed.
pub fn grad_check(codec: &SemanticCodec, x: &Array2<f64>, noise: &BatchNoise, weights: LossWeights) -> Result<GradCheck> {
    if codec.codebook.is_some() {
        return Err(HscError::InvalidParameter(
            "the straight-through estimator is not a true gradient; check the variational model".into(),
        ));
    }
    let (_, grads) = batch_gradients(codec, x.view(), noise, weights)?;
    let analytic: Vec<Vec<f64>> = grads.slices().into_iter().map(<[f64]>::to_vec).collect();
    let mut probe = codec.clone();
    let mut params: Vec<Vec<f64>> = codec_params_mut(&mut probe).into_iter().map(|s| s.to_vec()).collect();
    compare(&analytic, &mut params, |p| {
        for (dst, src) in codec_params_mut(&mut probe).into_iter().zip(p) {
            dst.copy_from_slice(src);
        }
        Ok(batch_gradients(&probe, x.view(), noise, weights)?.0.total)
    })
}
