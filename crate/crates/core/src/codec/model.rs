use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{HscError, Result};
use crate::image::Image;

use super::nn::{Activation, Dense, Mlp, MlpTrace};
use super::vq::Codebook;
use super::{from_interleaved, to_interleaved};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Vae,
    VqVae { codebook_size: usize },
}

/// Layer widths. The encoder trunk runs `side² → hidden…`, each head maps the
/// last hidden width to `2k`, and the decoder mirrors the trunk back to
/// `side²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub side: usize,
    pub hidden: Vec<usize>,
    pub k: usize,
    pub variant: Variant,
}

impl ArchSpec {
    /// 784 → 2048 → 1024 → 512 → 2k.
    pub fn full(k: usize) -> Self {
        ArchSpec {
            side: 28,
            hidden: vec![2048, 1024, 512],
            k,
            variant: Variant::Vae,
        }
    }

    /// Quarter-width network that trains in reasonable time on one core.
    pub fn desk(k: usize) -> Self {
        ArchSpec {
            hidden: vec![512, 256, 128],
            ..ArchSpec::full(k)
        }
    }

    pub fn vq(mut self, codebook_size: usize) -> Self {
        self.variant = Variant::VqVae { codebook_size };
        self
    }

    pub fn input_len(&self) -> usize {
        self.side * self.side
    }

    pub fn latent_len(&self) -> usize {
        2 * self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.k == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(HscError::InvalidParameter(format!("degenerate architecture {self:?}")));
        }
        if let Variant::VqVae { codebook_size: 0 } = self.variant {
            return Err(HscError::Empty("codebook"));
        }
        Ok(())
    }

    pub fn encoder_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_len()).chain(self.hidden.iter().copied()).collect()
    }

    pub fn decoder_sizes(&self) -> Vec<usize> {
        std::iter::once(self.latent_len())
            .chain(self.hidden.iter().rev().copied())
            .chain(std::iter::once(self.input_len()))
            .collect()
    }
}

/// Channel input symbols, normalized to `‖z‖² = kP`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticSignal {
    pub symbols: Vec<Complex64>,
}

impl SemanticSignal {
    pub fn k(&self) -> usize {
        self.symbols.len()
    }

    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(Complex64::norm_sqr).sum()
    }
}

/// The two head outputs. `scale` is `exp(½·logvar)` per real component
/// (zero for the codebook variant, whose encoder is deterministic).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub mean: Vec<Complex64>,
    pub scale: Vec<Complex64>,
}

/// `z̄ = z_μ + ε·z_σ`, complex product per dimension.
pub fn reparameterize(out: &EncoderOutput, eps: &[Complex64]) -> Result<Vec<Complex64>> {
    let k = out.mean.len();
    if out.scale.len() != k {
        return Err(HscError::dims("encoder scale", k, out.scale.len()));
    }
    if eps.len() != k {
        return Err(HscError::dims("reparameterization noise", k, eps.len()));
    }
    Ok(out.mean.iter().zip(&out.scale).zip(eps).map(|((m, s), e)| m + e * s).collect())
}

/// `z = √(kP)·z̄/‖z̄‖`.
pub fn power_normalize(raw: &[Complex64], power: f64) -> Result<SemanticSignal> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(HscError::InvalidParameter(format!("power must be positive, got {power}")));
    }
    let norm = raw.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(HscError::ZeroVector);
    }
    let scale = (raw.len() as f64 * power).sqrt() / norm;
    Ok(SemanticSignal {
        symbols: raw.iter().map(|c| c * scale).collect(),
    })
}

/// Row-wise [`power_normalize`] on interleaved reals; also returns the row
/// norms (needed for backpropagation).
pub fn normalize_rows(raw: &Array2<f64>, power: f64) -> Result<(Array2<f64>, Vec<f64>)> {
    let k = raw.ncols() / 2;
    let target = (k as f64 * power).sqrt();
    let mut out = raw.clone();
    let mut norms = Vec::with_capacity(raw.nrows());
    for mut row in out.rows_mut() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(HscError::ZeroVector);
        }
        row *= target / n;
        norms.push(n);
    }
    Ok((out, norms))
}

/// Given `z = c·v/‖v‖` and `dL/dz` per row, returns `dL/dv`.
pub fn normalize_rows_backward(normalized: &Array2<f64>, norms: &[f64], grad: &Array2<f64>, power: f64) -> Array2<f64> {
    let k = normalized.ncols() / 2;
    let c = (k as f64 * power).sqrt();
    let mut out = grad.clone();
    for ((mut g, z), &n) in out.rows_mut().into_iter().zip(normalized.rows()).zip(norms) {
        // u = z / c is the unit direction
        let dot: f64 = g.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() / c;
        g.zip_mut_with(&z, |gi, &zi| *gi = (c / n) * (*gi - zi / c * dot));
    }
    out
}

/// Encoder activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    pub trunk: MlpTrace,
    pub mean: Array2<f64>,
    pub log_var: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticCodec {
    pub arch: ArchSpec,
    pub power: f64,
    pub trunk: Mlp,
    pub mean_head: Dense,
    pub log_var_head: Option<Dense>,
    pub decoder: Mlp,
    pub codebook: Option<Codebook>,
}

/// Stacks flattened images as rows.
pub fn images_to_batch(images: &[&Image]) -> Result<Array2<f64>> {
    let side = images.first().ok_or(HscError::Empty("image batch"))?.side();
    let mut out = Array2::zeros((images.len(), side * side));
    for (mut row, img) in out.rows_mut().into_iter().zip(images) {
        if img.side() != side {
            return Err(HscError::dims("image side in batch", side, img.side()));
        }
        row.assign(&ArrayView1::from(&img.to_flat()[..]));
    }
    Ok(out)
}

pub fn row_to_image(row: ArrayView1<'_, f64>, side: usize) -> Result<Image> {
    Image::from_flat(side, &row.to_vec())
}

impl SemanticCodec {
    pub fn init<R: Rng + ?Sized>(arch: ArchSpec, power: f64, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let last = *arch.hidden.last().unwrap();
        let trunk = Mlp::init(&arch.encoder_sizes(), Activation::Relu, Activation::Relu, rng);
        let mean_head = Dense::init(last, arch.latent_len(), Activation::Identity, rng);
        let log_var_head = match arch.variant {
            Variant::Vae => Some(Dense::init(last, arch.latent_len(), Activation::Identity, rng)),
            Variant::VqVae { .. } => None,
        };
        let decoder = Mlp::init(&arch.decoder_sizes(), Activation::Relu, Activation::Sigmoid, rng);
        let codebook = match arch.variant {
            Variant::Vae => None,
            Variant::VqVae { codebook_size } => Some(Codebook::new(Array2::from_shape_fn((codebook_size, arch.latent_len()), |_| {
                rng.random_range(-1.0..1.0)
            }))?),
        };
        Ok(SemanticCodec {
            arch,
            power,
            trunk,
            mean_head,
            log_var_head,
            decoder,
            codebook,
        })
    }

    /// All weights and biases zero (codebook entries zero as well).
    pub fn zeroed(arch: ArchSpec, power: f64) -> Result<Self> {
        arch.validate()?;
        let zero_mlp = |sizes: &[usize], last: Activation| Mlp {
            layers: sizes
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let act = if i + 2 == sizes.len() { last } else { Activation::Relu };
                    Dense::zeros(w[0], w[1], act)
                })
                .collect(),
        };
        let last = *arch.hidden.last().unwrap();
        Ok(SemanticCodec {
            trunk: zero_mlp(&arch.encoder_sizes(), Activation::Relu),
            mean_head: Dense::zeros(last, arch.latent_len(), Activation::Identity),
            log_var_head: matches!(arch.variant, Variant::Vae).then(|| Dense::zeros(last, arch.latent_len(), Activation::Identity)),
            decoder: zero_mlp(&arch.decoder_sizes(), Activation::Sigmoid),
            codebook: match arch.variant {
                Variant::Vae => None,
                Variant::VqVae { codebook_size } => Some(Codebook::new(Array2::zeros((codebook_size, arch.latent_len())))?),
            },
            power,
            arch,
        })
    }

    pub fn k(&self) -> usize {
        self.arch.k
    }

    pub fn side(&self) -> usize {
        self.arch.side
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count()
            + self.mean_head.param_count()
            + self.log_var_head.as_ref().map_or(0, Dense::param_count)
            + self.decoder.param_count()
            + self.codebook.as_ref().map_or(0, |c| c.entries.len())
    }

    pub fn is_finite(&self) -> bool {
        self.trunk.is_finite()
            && self.mean_head.is_finite()
            && self.log_var_head.as_ref().is_none_or(Dense::is_finite)
            && self.decoder.is_finite()
            && self.codebook.as_ref().is_none_or(|c| c.entries.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.arch.input_len() {
            return Err(HscError::dims("encoder input", self.arch.input_len(), x.ncols()));
        }
        Ok(())
    }

    pub fn encode_batch(&self, x: ArrayView2<'_, f64>) -> Result<EncodeTrace> {
        self.check_input(x)?;
        let trunk = self.trunk.forward_trace(x);
        let h = trunk.output().view();
        let mean = self.mean_head.forward(h);
        let log_var = self.log_var_head.as_ref().map(|l| l.forward(h));
        Ok(EncodeTrace { trunk, mean, log_var })
    }

    pub fn encode(&self, image: &Image) -> Result<EncoderOutput> {
        let x = images_to_batch(&[image])?;
        let t = self.encode_batch(x.view())?;
        let mean = from_interleaved(t.mean.row(0).as_slice().unwrap());
        let scale = match &t.log_var {
            Some(lv) => from_interleaved(&lv.row(0).iter().map(|v| (0.5 * v).exp()).collect::<Vec<_>>()),
            None => vec![Complex64::new(0.0, 0.0); self.k()],
        };
        Ok(EncoderOutput { mean, scale })
    }

    /// Pre-normalization latent rows. `eps` (interleaved, one row per sample)
    /// is used by the VAE only; `None` means `ε = 0`. The codebook variant
    /// snaps each mean row to its nearest codeword.
    pub fn latent_batch(&self, trace: &EncodeTrace, eps: Option<&Array2<f64>>) -> (Array2<f64>, Option<Vec<usize>>) {
        if let Some(book) = &self.codebook {
            let idx = book.nearest_batch(trace.mean.view());
            let rows = book.entries.select(Axis(0), &idx);
            return (rows, Some(idx));
        }
        let mut z = trace.mean.clone();
        if let (Some(eps), Some(lv)) = (eps, &trace.log_var) {
            for ((mut zr, er), lr) in z.rows_mut().into_iter().zip(eps.rows()).zip(lv.rows()) {
                for j in 0..self.k() {
                    let s = Complex64::new((0.5 * lr[2 * j]).exp(), (0.5 * lr[2 * j + 1]).exp());
                    let e = Complex64::new(er[2 * j], er[2 * j + 1]);
                    let p = e * s;
                    zr[2 * j] += p.re;
                    zr[2 * j + 1] += p.im;
                }
            }
        }
        (z, None)
    }

    /// Deterministic transmitter: `ε = 0` (or codebook lookup), then power
    /// normalization. Rows are interleaved symbols.
    pub fn transmit_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let t = self.encode_batch(x)?;
        let (z, _) = self.latent_batch(&t, None);
        Ok(normalize_rows(&z, self.power)?.0)
    }

    pub fn transmit(&self, image: &Image) -> Result<SemanticSignal> {
        let x = images_to_batch(&[image])?;
        let z = self.transmit_batch(x.view())?;
        Ok(SemanticSignal {
            symbols: from_interleaved(z.row(0).as_slice().unwrap()),
        })
    }

    pub fn decode_batch(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.arch.latent_len() {
            return Err(HscError::dims("decoder input", self.arch.latent_len(), z.ncols()));
        }
        Ok(self.decoder.forward(z))
    }

    pub fn decode(&self, received: &[Complex64]) -> Result<Image> {
        if received.len() != self.k() {
            return Err(HscError::dims("received symbols", self.k(), received.len()));
        }
        let flat = to_interleaved(received);
        let y = self.decode_batch(ArrayView2::from_shape((1, flat.len()), &flat).unwrap())?;
        row_to_image(y.row(0), self.side())
    }

    /// Error-free round trip.
    pub fn reconstruct(&self, image: &Image) -> Result<Image> {
        let s = self.transmit(image)?;
        self.decode(&s.symbols)
    }

    pub fn reconstruct_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let z = self.transmit_batch(x)?;
        self.decode_batch(z.view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(k: usize) -> ArchSpec {
        ArchSpec {
            side: 3,
            hidden: vec![5, 4],
            k,
            variant: Variant::Vae,
        }
    }

    #[test]
    fn full_shapes() {
        let a = ArchSpec::full(128);
        assert_eq!(a.encoder_sizes(), vec![784, 2048, 1024, 512]);
        assert_eq!(a.decoder_sizes(), vec![256, 512, 1024, 2048, 784]);
    }

    #[test]
    fn zero_network_outputs() {
        let c = SemanticCodec::zeroed(tiny(2), 1.0).unwrap();
        let out = c.encode(&Image::zeros(3)).unwrap();
        assert!(out.mean.iter().all(|m| m.norm() == 0.0));
        // zero log-variance head: unit scale on both components
        assert!(out.scale.iter().all(|s| *s == Complex64::new(1.0, 1.0)));
        let img = c.decode(&[Complex64::new(0.0, 0.0); 2]).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn reparameterization_arithmetic() {
        let out = EncoderOutput {
            mean: vec![Complex64::new(1.0, 0.0)],
            scale: vec![Complex64::new(2.0, 0.0)],
        };
        let z = reparameterize(&out, &[Complex64::new(0.0, 1.0)]).unwrap();
        assert_eq!(z, vec![Complex64::new(1.0, 2.0)]);
        assert_eq!(reparameterize(&out, &[Complex64::new(0.0, 0.0)]).unwrap(), out.mean);
        assert!(reparameterize(&out, &[]).is_err());
    }

    #[test]
    fn normalization() {
        let s = power_normalize(&[Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)], 1.0).unwrap();
        assert!((s.energy() - 2.0).abs() < 1e-12);
        let raw = [Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.1)];
        let doubled: Vec<_> = raw.iter().map(|c| c * 2.0).collect();
        assert_eq!(power_normalize(&raw, 1.0).unwrap(), power_normalize(&doubled, 1.0).unwrap());
        assert!(matches!(power_normalize(&[Complex64::new(0.0, 0.0)], 1.0), Err(HscError::ZeroVector)));
    }

    #[test]
    fn batch_and_single_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = SemanticCodec::init(tiny(2), 1.0, &mut rng).unwrap();
        let img = Image::from_flat(3, &[0.1, 0.9, 0.3, 0.0, 1.0, 0.5, 0.2, 0.2, 0.7]).unwrap();
        let s = c.transmit(&img).unwrap();
        assert!((s.energy() - 2.0).abs() < 1e-12);
        let a = c.decode(&s.symbols).unwrap();
        let b = c.reconstruct_batch(images_to_batch(&[&img]).unwrap().view()).unwrap();
        assert_eq!(a.to_flat(), b.row(0).to_vec());
    }

    #[test]
    fn shape_errors() {
        let c = SemanticCodec::zeroed(tiny(2), 1.0).unwrap();
        assert!(c.encode(&Image::zeros(4)).is_err());
        assert!(c.decode(&[Complex64::new(0.0, 0.0); 3]).is_err());
    }
}
