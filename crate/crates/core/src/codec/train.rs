//! Mini-batch training of the transceiver.

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{link_effect, ChannelMode, ChannelRealization, LinkEffect};
use crate::error::{HscError, Result};
use crate::image::Image;

use super::adam::Adam;
use super::model::{images_to_batch, normalize_rows, normalize_rows_backward, ArchSpec, SemanticCodec};
use super::nn::DenseGrad;
use super::vq::{dead_fraction, Codebook};

/// How `ε` is drawn during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonMode {
    /// Independent `CN(0,1)` per latent dimension.
    PerDimension,
    /// One `CN(0,1)` draw shared by every dimension of a sample.
    Scalar,
    /// `ε = 0`: deterministic encoder.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    pub commitment: f64,
    pub seed: u64,
    pub epsilon: EpsilonMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            kl_weight: 1e-3,
            commitment: 0.25,
            seed: 0,
            epsilon: EpsilonMode::PerDimension,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(HscError::InvalidParameter("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(HscError::InvalidParameter(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(self.kl_weight >= 0.0 && self.commitment >= 0.0) {
            return Err(HscError::InvalidParameter("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Channel seen by the latent during training.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainChannel {
    ErrorFree,
    /// Each sample draws its mode uniformly from the list, then a fresh
    /// realization; the decoder sees the equalized output.
    Sampled(Vec<ChannelMode>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    /// Mean squared codeword distance (codebook variant).
    pub quantization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub loss: BatchLoss,
    pub dead_fraction: Option<f64>,
}

/// Deterministic error-free evaluation on a probe set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub recon: f64,
    pub quantization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial: Evaluation,
    pub final_eval: Evaluation,
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone)]
pub struct CodecGrads {
    pub trunk: Vec<DenseGrad>,
    pub mean_head: DenseGrad,
    pub log_var_head: Option<DenseGrad>,
    pub decoder: Vec<DenseGrad>,
    pub codebook: Option<Array2<f64>>,
}

impl CodecGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let dense: Vec<&DenseGrad> = self
            .trunk
            .iter()
            .chain(std::iter::once(&self.mean_head))
            .chain(self.log_var_head.iter())
            .chain(self.decoder.iter())
            .collect();
        let mut out: Vec<&[f64]> = Vec::new();
        for g in dense {
            out.push(g.weight.as_slice().unwrap());
            out.push(g.bias.as_slice().unwrap());
        }
        if let Some(c) = &self.codebook {
            out.push(c.as_slice().unwrap());
        }
        out
    }
}

/// Parameter slices in the same order as [`CodecGrads::slices`].
pub fn codec_params_mut(codec: &mut SemanticCodec) -> Vec<&mut [f64]> {
    let SemanticCodec {
        trunk,
        mean_head,
        log_var_head,
        decoder,
        codebook,
        ..
    } = codec;
    let dense: Vec<&mut super::nn::Dense> = trunk
        .layers
        .iter_mut()
        .chain(std::iter::once(mean_head))
        .chain(log_var_head.iter_mut())
        .chain(decoder.layers.iter_mut())
        .collect();
    let mut out: Vec<&mut [f64]> = Vec::new();
    for l in dense {
        out.push(l.weight.as_slice_mut().unwrap());
        out.push(l.bias.as_slice_mut().unwrap());
    }
    if let Some(c) = codebook {
        out.push(c.entries.as_slice_mut().unwrap());
    }
    out
}

/// Random quantities for one batch.
#[derive(Debug, Clone, Default)]
pub struct BatchNoise {
    /// Interleaved `ε`, one row per sample.
    pub eps: Option<Array2<f64>>,
    pub links: Option<Vec<LinkEffect>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub kl: f64,
    pub commitment: f64,
}

pub(crate) fn apply_links(z: &Array2<f64>, links: &[LinkEffect]) -> Array2<f64> {
    let mut y = z.clone();
    for (mut row, link) in y.rows_mut().into_iter().zip(links) {
        for (j, off) in link.offset.iter().enumerate() {
            let v = link.gain * Complex64::new(row[2 * j], row[2 * j + 1]) + off;
            row[2 * j] = v.re;
            row[2 * j + 1] = v.im;
        }
    }
    y
}

pub(crate) fn links_backward(g: &Array2<f64>, links: &[LinkEffect]) -> Array2<f64> {
    let mut out = g.clone();
    for (mut row, link) in out.rows_mut().into_iter().zip(links) {
        let c = link.gain.conj();
        for j in 0..row.len() / 2 {
            let v = c * Complex64::new(row[2 * j], row[2 * j + 1]);
            row[2 * j] = v.re;
            row[2 * j + 1] = v.im;
        }
    }
    out
}

/// Loss and full parameter gradient for one batch.
///
/// Loss is per-pixel MSE averaged over the batch, plus `kl·KL` with KL a
/// mean over the `2k` latent reals (variational variant) or `(1 + commitment)·‖μ − u‖²/(2k)` (codebook variant), both
/// averaged over the batch.
pub fn batch_gradients(codec: &SemanticCodec, x: ArrayView2<'_, f64>, noise: &BatchNoise, weights: LossWeights) -> Result<(BatchLoss, CodecGrads)> {
    let b = x.nrows() as f64;
    let n = x.ncols() as f64;
    let k = codec.k();
    let enc = codec.encode_batch(x)?;
    let (zbar, assign) = codec.latent_batch(&enc, noise.eps.as_ref());
    let (z, norms) = normalize_rows(&zbar, codec.power)?;
    let y = match &noise.links {
        Some(l) => apply_links(&z, l),
        None => z.clone(),
    };
    let dec = codec.decoder.forward_trace(y.view());
    let diff = dec.output() - &x;
    let recon = diff.iter().map(|d| d * d).sum::<f64>() / (b * n);
    let g_out = diff * (2.0 / (b * n));
    let (dec_grads, g_y) = codec.decoder.backward(&dec, &g_out);
    let g_z = match &noise.links {
        Some(l) => links_backward(&g_y, l),
        None => g_y,
    };
    let g_zbar = normalize_rows_backward(&z, &norms, &g_z, codec.power);

    let mut loss = BatchLoss { recon, ..Default::default() };
    let mut g_mean = g_zbar.clone();
    let mut g_log_var = None;
    let mut g_book = None;

    if let (Some(book), Some(idx)) = (&codec.codebook, &assign) {
        let scale = 2.0 / (b * 2.0 * k as f64);
        let gap = &enc.mean - &zbar;
        loss.quantization = gap.iter().map(|v| v * v).sum::<f64>() / (b * 2.0 * k as f64);
        g_mean.scaled_add(weights.commitment * scale, &gap);
        let mut gb = Array2::zeros(book.entries.dim());
        for (row, &i) in gap.rows().into_iter().zip(idx) {
            gb.row_mut(i).scaled_add(-scale, &row);
        }
        g_book = Some(gb);
        loss.total = recon + (1.0 + weights.commitment) * loss.quantization;
    } else if let Some(lv) = &enc.log_var {
        let mut glv = Array2::zeros(lv.dim());
        let mut kl = 0.0;
        let per = weights.kl / (b * 2.0 * k as f64);
        for i in 0..lv.nrows() {
            for j in 0..k {
                let (er, ei) = (lv[[i, 2 * j]].exp(), lv[[i, 2 * j + 1]].exp());
                let s2 = 0.5 * (er + ei);
                let (mr, mi) = (enc.mean[[i, 2 * j]], enc.mean[[i, 2 * j + 1]]);
                kl += 0.5 * (mr * mr + s2 - 1.0 - s2.ln()) + 0.5 * (mi * mi + s2 - 1.0 - s2.ln());
                let dk_ds2 = (1.0 - 1.0 / s2) * per;
                glv[[i, 2 * j]] = dk_ds2 * 0.5 * er;
                glv[[i, 2 * j + 1]] = dk_ds2 * 0.5 * ei;
                g_mean[[i, 2 * j]] += per * mr;
                g_mean[[i, 2 * j + 1]] += per * mi;
                if let Some(eps) = &noise.eps {
                    let (gr, gi) = (g_zbar[[i, 2 * j]], g_zbar[[i, 2 * j + 1]]);
                    let (epr, epi) = (eps[[i, 2 * j]], eps[[i, 2 * j + 1]]);
                    let (sr, si) = ((0.5 * lv[[i, 2 * j]]).exp(), (0.5 * lv[[i, 2 * j + 1]]).exp());
                    glv[[i, 2 * j]] += (gr * epr + gi * epi) * 0.5 * sr;
                    glv[[i, 2 * j + 1]] += (gi * epr - gr * epi) * 0.5 * si;
                }
            }
        }
        loss.kl = kl / (b * 2.0 * k as f64);
        loss.total = recon + weights.kl * loss.kl;
        g_log_var = Some(glv);
    } else {
        loss.total = recon;
    }

    let h = enc.trunk.output();
    let (mh_grad, g_h) = codec.mean_head.backward(h.view(), &enc.mean, &g_mean, true);
    let mut g_h = g_h.unwrap();
    let lv_grad = match (&codec.log_var_head, &enc.log_var, &g_log_var) {
        (Some(head), Some(lv), Some(glv)) => {
            let (pg, gx) = head.backward(h.view(), lv, glv, true);
            g_h += &gx.unwrap();
            Some(pg)
        }
        _ => None,
    };
    let (trunk_grads, _) = codec.trunk.backward(&enc.trunk, &g_h);
    Ok((
        loss,
        CodecGrads {
            trunk: trunk_grads,
            mean_head: mh_grad,
            log_var_head: lv_grad,
            decoder: dec_grads,
            codebook: g_book,
        },
    ))
}

/// `ε` rows for a batch: each real component `N(0, ½)`.
pub fn sample_epsilon<R: Rng + ?Sized>(rows: usize, k: usize, mode: EpsilonMode, rng: &mut R) -> Option<Array2<f64>> {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    match mode {
        EpsilonMode::Zero => None,
        EpsilonMode::PerDimension => Some(Array2::from_shape_fn((rows, 2 * k), |_| sd * rng.sample::<f64, _>(StandardNormal))),
        EpsilonMode::Scalar => {
            let mut e = Array2::zeros((rows, 2 * k));
            for mut row in e.rows_mut() {
                let re = sd * rng.sample::<f64, _>(StandardNormal);
                let im = sd * rng.sample::<f64, _>(StandardNormal);
                for j in 0..k {
                    row[2 * j] = re;
                    row[2 * j + 1] = im;
                }
            }
            Some(e)
        }
    }
}

pub fn sample_links<R: Rng + ?Sized>(channel: &TrainChannel, rows: usize, k: usize, power: f64, rng: &mut R) -> Result<Option<Vec<LinkEffect>>> {
    match channel {
        TrainChannel::ErrorFree => Ok(None),
        TrainChannel::Sampled(modes) => {
            if modes.is_empty() {
                return Err(HscError::Empty("training channel modes"));
            }
            (0..rows)
                .map(|_| {
                    let mode = modes[rng.random_range(0..modes.len())];
                    let ch = ChannelRealization::draw(mode, power, rng)?;
                    link_effect(&ch, k, true, rng)
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        }
    }
}

/// Per-pixel reconstruction error (error-free, `ε = 0`) over `images`.
pub fn evaluate(codec: &SemanticCodec, images: &[&Image]) -> Result<Evaluation> {
    if images.is_empty() {
        return Err(HscError::Empty("evaluation set"));
    }
    let mut recon = 0.0;
    let mut quant = 0.0;
    for chunk in images.chunks(256) {
        let x = images_to_batch(chunk)?;
        let enc = codec.encode_batch(x.view())?;
        let (zbar, _) = codec.latent_batch(&enc, None);
        if codec.codebook.is_some() {
            quant += (&enc.mean - &zbar).iter().map(|v| v * v).sum::<f64>();
        }
        let (z, _) = normalize_rows(&zbar, codec.power)?;
        let xh = codec.decoder.forward(z.view());
        recon += (&xh - &x).iter().map(|v| v * v).sum::<f64>();
    }
    let total = images.len() as f64;
    Ok(Evaluation {
        recon: recon / (total * codec.arch.input_len() as f64),
        quantization: codec.codebook.is_some().then(|| quant / (total * codec.arch.latent_len() as f64)),
    })
}

const PROBE: usize = 512;

pub(crate) fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Continues training `codec` in place.
pub fn fit(codec: &mut SemanticCodec, data: &[Image], cfg: &TrainConfig, channel: &TrainChannel) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(HscError::Empty("training set"));
    }
    let refs: Vec<&Image> = data.iter().collect();
    let probe = &refs[..refs.len().min(PROBE)];
    let initial = evaluate(codec, probe)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = rng_stream(cfg.seed, 11);
    let mut eps_rng = rng_stream(cfg.seed, 12);
    let mut link_rng = rng_stream(cfg.seed, 13);
    let weights = LossWeights {
        kl: cfg.kl_weight,
        commitment: cfg.commitment,
    };
    let mut opt = Adam::new(cfg.learning_rate);
    let full = images_to_batch(&refs)?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut acc = BatchLoss::default();
        let mut assignments = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let x = full.select(Axis(0), chunk);
            let noise = BatchNoise {
                eps: sample_epsilon(chunk.len(), codec.k(), cfg.epsilon, &mut eps_rng),
                links: sample_links(channel, chunk.len(), codec.k(), codec.power, &mut link_rng)?,
            };
            let (loss, grads) = batch_gradients(codec, x.view(), &noise, weights)?;
            if !loss.total.is_finite() {
                return Err(HscError::Divergence { epoch, step });
            }
            if let Some(book) = &codec.codebook {
                let enc = codec.encode_batch(x.view())?;
                assignments.extend(book.nearest_batch(enc.mean.view()));
            }
            opt.step(codec_params_mut(codec), grads.slices());
            if !codec.is_finite() {
                return Err(HscError::Divergence { epoch, step });
            }
            let w = chunk.len() as f64 / data.len() as f64;
            acc.total += w * loss.total;
            acc.recon += w * loss.recon;
            acc.kl += w * loss.kl;
            acc.quantization += w * loss.quantization;
            step += 1;
        }
        let dead = codec.codebook.as_ref().map(|b| dead_fraction(&assignments, b.len()));
        log::debug!("epoch {epoch}: loss {:.6e} recon {:.6e}", acc.total, acc.recon);
        epochs.push(EpochStats {
            loss: acc,
            dead_fraction: dead,
        });
    }
    let final_eval = evaluate(codec, probe)?;
    Ok(TrainReport { initial, final_eval, epochs })
}

/// Initializes a variational transceiver from `cfg.seed` and trains it
/// error-free.
pub fn train_elbo(data: &[Image], arch: ArchSpec, power: f64, cfg: &TrainConfig) -> Result<(SemanticCodec, TrainReport)> {
    let mut codec = SemanticCodec::init(arch, power, &mut rng_stream(cfg.seed, 10))?;
    let report = fit(&mut codec, data, cfg, &TrainChannel::ErrorFree)?;
    Ok((codec, report))
}

/// Codebook variant. Before the first epoch the codebook is reset to encoder
/// outputs of randomly chosen training images.
pub fn train_vqvae(data: &[Image], arch: ArchSpec, power: f64, cfg: &TrainConfig) -> Result<(SemanticCodec, TrainReport)> {
    if !matches!(arch.variant, super::model::Variant::VqVae { .. }) {
        return Err(HscError::InvalidParameter("train_vqvae needs a codebook architecture".into()));
    }
    let mut codec = SemanticCodec::init(arch, power, &mut rng_stream(cfg.seed, 10))?;
    if cfg.epochs > 0 {
        if data.is_empty() {
            return Err(HscError::Empty("training set"));
        }
        let size = codec.codebook.as_ref().unwrap().len();
        let mut rng = rng_stream(cfg.seed, 14);
        let picks: Vec<&Image> = (0..size).map(|_| &data[rng.random_range(0..data.len())]).collect();
        let enc = codec.encode_batch(images_to_batch(&picks)?.view())?;
        let mut entries = enc.mean;
        entries.mapv_inplace(|v| v + 1e-3 * rng.sample::<f64, _>(StandardNormal));
        codec.codebook = Some(Codebook::new(entries)?);
    }
    let report = fit(&mut codec, data, cfg, &TrainChannel::ErrorFree)?;
    Ok((codec, report))
}
