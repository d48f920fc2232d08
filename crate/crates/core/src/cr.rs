//! Complementary representation: `C = [A | AX]`, its payload accounting,
//! and its wire ordering.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::chain::{self, ChainSpec, Frame, QuantizerSpec};
use crate::channel::ChannelRealization;
use crate::error::{HscError, Result};
use crate::image::{Image, RgbImage};
use crate::linalg::orthonormalize_rows;
use crate::recompose::{average_error_matrix, eig_psd, error_matrix, optimal_projection, recompose, ProjectionBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementaryPayload {
    pub basis: ProjectionBasis,
    /// `A X`, `d x L`.
    pub projected: Array2<f64>,
}

impl ComplementaryPayload {
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn side(&self) -> usize {
        self.basis.side()
    }

    /// Reals carried, `2dL`.
    pub fn real_count(&self) -> usize {
        2 * self.rank() * self.side()
    }

    /// Recomposes against a generated image with the payload taken as exact.
    pub fn recompose(&self, generated: &Image) -> Result<Image> {
        recompose(&self.basis, self.projected.view(), generated)
    }
}

/// Basis from the top-`d` eigenvectors of `B = (X − X̂)(X − X̂)ᵀ`, then `AX`.
pub fn build_cr(original: &Image, generated: &Image, d: usize) -> Result<ComplementaryPayload> {
    let side = original.side();
    if d > side {
        return Err(HscError::RankOutOfRange { d, max: side });
    }
    let spectrum = eig_psd(&error_matrix(original, generated)?)?;
    let basis = optimal_projection(&spectrum, d)?;
    let projected = basis.project(original)?;
    Ok(ComplementaryPayload { basis, projected })
}

/// CR for three colour planes: one basis from the averaged error matrix and
/// one projected block per plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbPayload {
    pub basis: ProjectionBasis,
    pub projected: Vec<Array2<f64>>,
}

impl RgbPayload {
    /// `dL` for the shared basis plus `3dL` for the projections.
    pub fn real_count(&self) -> usize {
        4 * self.basis.rank() * self.basis.side()
    }

    pub fn recompose(&self, generated: &RgbImage) -> Result<RgbImage> {
        let planes = self
            .projected
            .iter()
            .zip(generated.channels())
            .map(|(p, g)| recompose(&self.basis, p.view(), g))
            .collect::<Result<Vec<_>>>()?;
        RgbImage::new(planes)
    }
}

pub fn rgb_build_cr(original: &RgbImage, generated: &RgbImage, d: usize) -> Result<RgbPayload> {
    let side = original.side();
    if generated.channels().len() != original.channels().len() || generated.side() != side {
        return Err(HscError::dims("rgb payload", side, generated.side()));
    }
    if d > side {
        return Err(HscError::RankOutOfRange { d, max: side });
    }
    let mats = original
        .channels()
        .iter()
        .zip(generated.channels())
        .map(|(x, g)| error_matrix(x, g))
        .collect::<Result<Vec<_>>>()?;
    let spectrum = eig_psd(&average_error_matrix(&mats)?)?;
    let basis = optimal_projection(&spectrum, d)?;
    let projected = original.channels().iter().map(|x| basis.project(x)).collect::<Result<Vec<_>>>()?;
    Ok(RgbPayload { basis, projected })
}

/// A reduced fraction `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    /// Continued-fraction convergent with denominator `<= 10^6` whose
    /// quotient rounds to exactly `x`.
    pub fn approximate(x: f64) -> Option<Ratio> {
        if !(x > 0.0) || !x.is_finite() {
            return None;
        }
        let (mut h0, mut h1) = (0u64, 1u64);
        let (mut k0, mut k1) = (1u64, 0u64);
        let mut v = x;
        for _ in 0..40 {
            let a = v.floor();
            if a > 1e12 {
                break;
            }
            let a = a as u64;
            let h2 = a.checked_mul(h1)?.checked_add(h0)?;
            let k2 = a.checked_mul(k1)?.checked_add(k0)?;
            if k2 > 1_000_000 {
                break;
            }
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            if h1 as f64 / k1 as f64 == x {
                return Some(Ratio { num: h1, den: k1 });
            }
            let frac = v - a as f64;
            if frac == 0.0 {
                break;
            }
            v = 1.0 / frac;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadReport {
    pub k: usize,
    pub d: usize,
    pub rate: f64,
    pub side: usize,
    /// `(k/R + 2dL) / L²`.
    pub eta: f64,
}

/// Compression ratio of sending `k` SR symbols plus a rank-`d` CR. When `R`
/// is a small-denominator rational the ratio is evaluated in integers and
/// rounded once.
pub fn payload_ratio(k: usize, rate: f64, side: usize, d: usize) -> Result<PayloadReport> {
    if !(rate > 0.0) || side == 0 {
        return Err(HscError::InvalidParameter(format!(
            "payload ratio needs R > 0 and L > 0 (got R = {rate}, L = {side})"
        )));
    }
    let eta = eta_value(k as u128, rate, 2 * d as u128 * side as u128, side as u128 * side as u128);
    Ok(PayloadReport { k, d, rate, side, eta })
}

/// `(k/R + cr_reals) / total_reals`.
fn eta_value(k: u128, rate: f64, cr_reals: u128, total_reals: u128) -> f64 {
    match Ratio::approximate(rate) {
        Some(Ratio { num, den }) => {
            // (k·den/num + cr) / total = (k·den + cr·num) / (num·total)
            let top = k * den as u128 + cr_reals * num as u128;
            let bottom = num as u128 * total_reals;
            reduce_to_f64(top, bottom)
        }
        None => (k as f64 / rate + cr_reals as f64) / total_reals as f64,
    }
}

fn reduce_to_f64(mut top: u128, mut bottom: u128) -> f64 {
    let g = gcd(top, bottom);
    if g > 1 {
        top /= g;
        bottom /= g;
    }
    top as f64 / bottom as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Colour variant: `(k/R + dL + 3dL) / (3L²)`.
pub fn rgb_payload_ratio(k: usize, rate: f64, side: usize, d: usize) -> Result<PayloadReport> {
    if !(rate > 0.0) || side == 0 {
        return Err(HscError::InvalidParameter(format!(
            "payload ratio needs R > 0 and L > 0 (got R = {rate}, L = {side})"
        )));
    }
    let (l, d128) = (side as u128, d as u128);
    let eta = eta_value(k as u128, rate, 4 * d128 * l, 3 * l * l);
    Ok(PayloadReport { k, d, rate, side, eta })
}

/// Largest `d` with `η < 1`, i.e. `d < L/2 − k/(2LR)`; 0 when infeasible.
pub fn max_feasible_d(k: usize, rate: f64, side: usize) -> usize {
    if side == 0 || !(rate > 0.0) {
        return 0;
    }
    let mut best = 0;
    for d in 0..=side {
        match payload_ratio(k, rate, side, d) {
            Ok(r) if r.eta < 1.0 => best = d,
            _ => break,
        }
    }
    best
}

/// Row-major `A` rows followed by row-major `AX` rows.
pub fn serialize_cr(payload: &ComplementaryPayload) -> Vec<f64> {
    payload.basis.rows().iter().chain(payload.projected.iter()).copied().collect()
}

/// Splits a received block into `(A, AX)`; `A`'s rows are re-orthonormalized
/// so the projector identities hold after channel noise.
pub fn unpack_cr(block: &[f64], d: usize, side: usize) -> Result<(ProjectionBasis, Array2<f64>)> {
    if block.len() != 2 * d * side {
        return Err(HscError::dims("CR block", 2 * d * side, block.len()));
    }
    if d > side {
        return Err(HscError::RankOutOfRange { d, max: side });
    }
    let half = d * side;
    let a = Array2::from_shape_vec((d, side), block[..half].to_vec()).map_err(|e| HscError::InvalidParameter(e.to_string()))?;
    let ax = Array2::from_shape_vec((d, side), block[half..].to_vec()).map_err(|e| HscError::InvalidParameter(e.to_string()))?;
    let cleaned = if a.iter().all(|v| v.is_finite()) {
        orthonormalize_rows(a.view())
    } else {
        return Err(HscError::InvalidParameter("received basis is not finite".into()));
    };
    Ok((ProjectionBasis::new(cleaned)?, ax))
}

/// How the CR reaches the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrDelivery {
    /// Bit-exact reals.
    Exact,
    /// Per-row quantization only; no source stage, no channel errors.
    Quantized(QuantizerSpec),
    /// The full digital chain over the given channel.
    Chain(ChainSpec),
}

impl CrDelivery {
    pub fn name(&self) -> &'static str {
        match self {
            CrDelivery::Exact => "exact",
            CrDelivery::Quantized(_) => "quantized",
            CrDelivery::Chain(_) => "chain",
        }
    }
}

/// What the receiver recomposes with.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedCr {
    pub basis: ProjectionBasis,
    pub projected: Array2<f64>,
}

impl ReceivedCr {
    pub fn recompose(&self, generated: &Image) -> Result<Image> {
        recompose(&self.basis, self.projected.view(), generated)
    }
}

/// Chain configuration used for a CR: one quantizer block per row of `C`.
pub fn cr_chain_spec(spec: &ChainSpec, side: usize) -> ChainSpec {
    ChainSpec { block_len: side, ..*spec }
}

/// Serializes a CR into a wire frame, tagging `d` and `L` in the header.
pub fn encode_cr_frame(payload: &ComplementaryPayload, spec: &ChainSpec) -> Result<Frame> {
    let mut frame = chain::encode_frame(&serialize_cr(payload), &cr_chain_spec(spec, payload.side()))?;
    frame.header.d = payload.rank() as u16;
    frame.header.side = payload.side() as u16;
    Ok(frame)
}

/// Inverse of [`encode_cr_frame`] on an error-free link.
pub fn decode_cr_frame(frame: &Frame) -> Result<ReceivedCr> {
    let values = chain::decode_frame(frame)?;
    let (basis, projected) = unpack_cr(&values, frame.header.d as usize, frame.header.side as usize)?;
    Ok(ReceivedCr { basis, projected })
}

pub fn deliver_cr<R: Rng + ?Sized>(
    payload: &ComplementaryPayload,
    delivery: &CrDelivery,
    channel: &ChannelRealization,
    rng: &mut R,
) -> Result<ReceivedCr> {
    let (d, side) = (payload.rank(), payload.side());
    if d == 0 {
        return Ok(ReceivedCr {
            basis: ProjectionBasis::empty(side),
            projected: Array2::zeros((0, side)),
        });
    }
    let values = match delivery {
        CrDelivery::Exact => {
            return Ok(ReceivedCr {
                basis: payload.basis.clone(),
                projected: payload.projected.clone(),
            })
        }
        CrDelivery::Quantized(q) => {
            let flat = serialize_cr(payload);
            let mut out = Vec::with_capacity(flat.len());
            for row in flat.chunks(side) {
                let (bits, range) = chain::quantize::quantize(row, q)?;
                out.extend(chain::quantize::dequantize(&bits, range, q)?);
            }
            out
        }
        CrDelivery::Chain(spec) => chain::chain_over_channel(&serialize_cr(payload), &cr_chain_spec(spec, side), channel, rng)?,
    };
    let (basis, projected) = unpack_cr(&values, d, side)?;
    Ok(ReceivedCr { basis, projected })
}

/// Upper bound on `‖X − X̃‖²_F` at full rank when each row of `C` is
/// quantized to `step/2` absolute error: with `E_A`, `E_AX` the perturbations,
/// `‖X − X̃‖ ≤ ‖E_AX‖ + 2‖E_A‖·‖X‖` (the factor 2 covers Gram-Schmidt's
/// amplification of a small perturbation of an orthonormal matrix).
pub fn full_rank_quantization_floor(original: &Image, payload: &ComplementaryPayload, q: &QuantizerSpec) -> f64 {
    let half_steps = |m: ArrayView2<'_, f64>| -> f64 {
        m.rows()
            .into_iter()
            .map(|row| {
                let r = chain::quantize::block_range(row.as_slice().unwrap_or(&row.to_vec()), q);
                let h = r.step(q.bits_per_coeff) / 2.0;
                h * h * row.len() as f64
            })
            .sum::<f64>()
            .sqrt()
    };
    let e_a = half_steps(payload.basis.rows());
    let e_ax = half_steps(payload.projected.view());
    let x_norm = original.pixels().iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound = e_ax + 2.0 * e_a * x_norm;
    bound * bound
}
