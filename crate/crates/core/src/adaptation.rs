//! Channel adaptation: few-shot fine-tuning under fading, and per-rank
//! residual adapters trained on the recomposed image with the base frozen.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{link_effect, ChannelMode, ChannelRealization};
use crate::codec::checkpoint::{check_chain, Reader, Writer, KIND_ADAPTER};
use crate::codec::model::{images_to_batch, normalize_rows, normalize_rows_backward, row_to_image, SemanticSignal};
use crate::codec::nn::{Activation, Dense, DenseGrad, Mlp};
use crate::codec::train::{apply_links, fit, links_backward, EpsilonMode, TrainChannel, TrainConfig, TrainReport};
use crate::codec::{from_interleaved, to_interleaved, SemanticCodec};
use crate::cr::{build_cr, deliver_cr, CrDelivery};
use crate::error::{HscError, Result};
use crate::image::Image;
use crate::pipeline::{run_hsc, sc_mse, LinkConfig, Transceiver};

/// `lo, lo + step, …, hi`.
pub fn snr_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub snr_db: Vec<f64>,
    pub mu: f64,
    /// Training images taken from the front of the dataset.
    pub samples: usize,
    /// Held-out images following the training samples.
    pub validation: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            snr_db: snr_grid(0.0, 5.0, 0.5),
            mu: 1.0,
            samples: 200,
            validation: 100,
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn modes(&self) -> Vec<ChannelMode> {
        self.snr_db
            .iter()
            .map(|&snr_db| ChannelMode::SlowFading { snr_db, mu: self.mu })
            .collect()
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            kl_weight: 0.0,
            commitment: 0.25,
            seed: self.seed,
            epsilon: EpsilonMode::Zero,
        }
    }

    fn split<'a>(&self, data: &'a [Image]) -> Result<(&'a [Image], &'a [Image])> {
        if data.is_empty() || self.samples == 0 {
            return Err(HscError::Empty("fine-tuning set"));
        }
        let n = self.samples.min(data.len());
        let rest = &data[n..];
        let val = if rest.is_empty() {
            &data[..n]
        } else {
            &rest[..self.validation.min(rest.len())]
        };
        Ok((&data[..n], val))
    }
}

/// Mean per-pixel SR-only error over fading, one SNR draw per image from
/// the grid, with common random numbers for a fixed seed.
pub fn fading_mse(tx: &Transceiver<'_>, images: &[Image], modes: &[ChannelMode], seed: u64) -> Result<f64> {
    if modes.is_empty() {
        return Err(HscError::Empty("channel modes"));
    }
    let mut total = 0.0;
    for (i, img) in images.iter().enumerate() {
        let mode = modes[pick_mode(seed, i, modes.len())];
        total += sc_mse(tx, std::slice::from_ref(img), mode, seed.wrapping_add(i as u64))?;
    }
    Ok(total / images.len() as f64)
}

fn pick_mode(seed: u64, item: usize, n: usize) -> usize {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1 << 40 | item as u64);
    r.random_range(0..n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneReport {
    pub before: f64,
    pub after: f64,
    /// The fine-tuned model validated worse and the input was kept.
    pub reverted: bool,
    pub train: TrainReport,
}

/// Encoder and decoder are updated jointly on samples passed through fresh
/// fading realizations (equalized, perfect CSI), MSE only, `ε = 0`.
pub fn finetune(base: &SemanticCodec, cfg: &FinetuneConfig, data: &[Image]) -> Result<(SemanticCodec, FinetuneReport)> {
    let (train, val) = cfg.split(data)?;
    let modes = cfg.modes();
    let mut tuned = base.clone();
    let report = fit(&mut tuned, train, &cfg.train_config(), &TrainChannel::Sampled(modes.clone()))?;
    let eval_seed = cfg.seed ^ 0x5eed;
    let before = fading_mse(&Transceiver::new(base), val, &modes, eval_seed)?;
    let after = fading_mse(&Transceiver::new(&tuned), val, &modes, eval_seed)?;
    let reverted = after > before;
    if reverted {
        log::warn!("fine-tuning raised validation error {before:.4e} -> {after:.4e}; keeping the input model");
        tuned = base.clone();
    }
    Ok((
        tuned,
        FinetuneReport {
            before,
            after: after.min(before),
            reverted,
            train: report,
        },
    ))
}

/// Residual adapters for one CR rank. The encoder adapter maps the
/// normalized SR `z ↦ normalize(z + ψ(z))`; the decoder adapter maps the
/// generated image `X̂ ↦ X̂ + ω(X̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParameters {
    pub d: usize,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl AdapterParameters {
    /// `2k → 4k → 2k` and `L² → 1024 → L²`, last layers zero so the pair
    /// starts as the identity.
    pub fn identity<R: Rng + ?Sized>(k: usize, side: usize, d: usize, rng: &mut R) -> Self {
        Self::identity_with_widths(k, side, d, 4 * k, 1024, rng)
    }

    pub fn identity_with_widths<R: Rng + ?Sized>(k: usize, side: usize, d: usize, encoder_hidden: usize, decoder_hidden: usize, rng: &mut R) -> Self {
        let n = side * side;
        let net = |inp: usize, hid: usize, rng: &mut R| Mlp {
            layers: vec![Dense::init(inp, hid, Activation::Relu, rng), Dense::zeros(hid, inp, Activation::Identity)],
        };
        AdapterParameters {
            d,
            encoder: net(2 * k, encoder_hidden, rng),
            decoder: net(n, decoder_hidden, rng),
        }
    }

    pub fn k(&self) -> usize {
        self.encoder.sizes()[0] / 2
    }

    pub fn input_len(&self) -> usize {
        self.decoder.sizes()[0]
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    fn check(&self, codec: &SemanticCodec) -> Result<()> {
        if self.k() != codec.k() || self.input_len() != codec.arch.input_len() {
            return Err(HscError::dims(
                "adapter shape",
                format!("k={} n={}", codec.k(), codec.arch.input_len()),
                format!("k={} n={}", self.k(), self.input_len()),
            ));
        }
        Ok(())
    }

    pub fn adapt_latent_rows(&self, z: &Array2<f64>, power: f64) -> Result<Array2<f64>> {
        if z.ncols() != 2 * self.k() {
            return Err(HscError::dims("adapter latent", 2 * self.k(), z.ncols()));
        }
        let u = z + &self.encoder.forward(z.view());
        Ok(normalize_rows(&u, power)?.0)
    }

    pub fn adapt_image_rows(&self, xhat: &Array2<f64>) -> Array2<f64> {
        xhat + &self.decoder.forward(xhat.view())
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .layers
            .iter_mut()
            .chain(self.decoder.layers.iter_mut())
            .flat_map(|l| [l.weight.as_slice_mut().unwrap(), l.bias.as_slice_mut().unwrap()])
            .collect()
    }

    fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.decoder.is_finite()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::header(KIND_ADAPTER);
        w.u32(self.d);
        w.layers(self.encoder.layers.iter());
        w.layers(self.decoder.layers.iter());
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, KIND_ADAPTER)?;
        let d = r.u32()?;
        let encoder = r.layers()?;
        let decoder = r.layers()?;
        r.finish()?;
        for (net, what) in [(&encoder, "encoder adapter"), (&decoder, "decoder adapter")] {
            let sizes = Mlp { layers: net.clone() }.sizes();
            if net.len() != 2 || sizes.first() != sizes.last() {
                return Err(HscError::format(
                    "checkpoint",
                    format!("{what}: sizes {sizes:?} do not form a residual pair"),
                ));
            }
            check_chain(net, &sizes, what)?;
        }
        let a = AdapterParameters {
            d,
            encoder: Mlp { layers: encoder },
            decoder: Mlp { layers: decoder },
        };
        if !a.is_finite() {
            return Err(HscError::format("checkpoint", "non-finite adapter weights"));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Adapted SR and adapted generated image for one transmission.
pub fn apply_adapters(
    encoder_out: &SemanticSignal,
    decoder_out: &Image,
    adapters: &AdapterParameters,
    power: f64,
) -> Result<(SemanticSignal, Image)> {
    if encoder_out.k() != adapters.k() {
        return Err(HscError::dims("adapter SR", adapters.k(), encoder_out.k()));
    }
    let side = decoder_out.side();
    if side * side != adapters.input_len() {
        return Err(HscError::dims("adapter image", adapters.input_len(), side * side));
    }
    let flat = to_interleaved(&encoder_out.symbols);
    let z = Array2::from_shape_vec((1, flat.len()), flat).unwrap();
    let zs = adapters.adapt_latent_rows(&z, power)?;
    let x = images_to_batch(&[decoder_out])?;
    let xa = adapters.adapt_image_rows(&x);
    Ok((
        SemanticSignal {
            symbols: from_interleaved(zs.row(0).as_slice().unwrap()),
        },
        row_to_image(xa.row(0), side)?,
    ))
}

/// One adapter pair per trained rank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdapterRegistry {
    pairs: BTreeMap<usize, AdapterParameters>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces any pair already stored for the same rank.
    pub fn insert(&mut self, adapters: AdapterParameters) -> Option<AdapterParameters> {
        self.pairs.insert(adapters.d, adapters)
    }

    pub fn get(&self, d: usize) -> Result<&AdapterParameters> {
        self.pairs.get(&d).ok_or(HscError::MissingAdapter { d })
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.pairs.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Writes `adapter-d{d}.hscm` per rank.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (d, a) in &self.pairs {
            a.save(&dir.join(format!("adapter-d{d}.hscm")))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut reg = AdapterRegistry::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("adapter-d") && n.ends_with(".hscm"))
            })
            .collect();
        entries.sort();
        for p in entries {
            reg.insert(AdapterParameters::load(&p)?);
        }
        Ok(reg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterConfig {
    pub finetune: FinetuneConfig,
    pub delivery: CrDelivery,
    pub encoder_hidden: Option<usize>,
    pub decoder_hidden: usize,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            finetune: FinetuneConfig::default(),
            delivery: CrDelivery::Chain(Default::default()),
            encoder_hidden: None,
            decoder_hidden: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterReport {
    pub epoch_loss: Vec<f64>,
    /// Held-out recomposed error before training and after each epoch.
    pub validation: Vec<f64>,
    /// Epoch whose parameters were kept; 0 means the identity pair.
    pub best_epoch: usize,
}

/// Recomposed-image loss and adapter gradient for one batch. Gradients stop
/// at the basis `A` and at the delivered CR; they reach the adapters through
/// `(I − ÂᵀÂ)X̂` and the frozen decoder.
fn adapter_batch(
    base: &SemanticCodec,
    adapters: &AdapterParameters,
    images: &[&Image],
    modes: &[ChannelMode],
    delivery: &CrDelivery,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<DenseGrad>)> {
    let side = base.side();
    let n = base.arch.input_len() as f64;
    let b = images.len() as f64;
    let x = images_to_batch(images)?;
    let z0 = base.transmit_batch(x.view())?;
    let enc_trace = adapters.encoder.forward_trace(z0.view());
    let u = &z0 + enc_trace.output();
    let (z, norms) = normalize_rows(&u, base.power)?;

    let mirror = base.decoder.forward(z.view());
    let mirror = &mirror + &adapters.decoder.forward(mirror.view());

    let mut links = Vec::with_capacity(images.len());
    let mut cr_channels = Vec::with_capacity(images.len());
    for _ in images {
        let mode = modes[rng.random_range(0..modes.len())];
        let sr = ChannelRealization::draw(mode, base.power, rng)?;
        links.push(link_effect(&sr, base.k(), true, rng)?);
        cr_channels.push(ChannelRealization::draw(mode, base.power, rng)?);
    }
    let y = apply_links(&z, &links);
    let dec_trace = base.decoder.forward_trace(y.view());
    let xr = dec_trace.output();
    let ad_trace = adapters.decoder.forward_trace(xr.view());
    let xa = xr + ad_trace.output();

    let mut g_xa = Array2::zeros(xa.dim());
    let mut loss = 0.0;
    for (i, img) in images.iter().enumerate() {
        let tx_view = row_to_image(mirror.row(i), side)?;
        let payload = build_cr(img, &tx_view, adapters.d)?;
        let rx = deliver_cr(&payload, delivery, &cr_channels[i], rng)?;
        let gen = row_to_image(xa.row(i), side)?;
        let rec = rx.recompose(&gen)?;
        let diff = rec.pixels().to_owned() - img.pixels();
        loss += diff.iter().map(|v| v * v).sum::<f64>();
        let g = diff * (2.0 / (b * n));
        let a = rx.basis.rows();
        let g_null = &g - &a.t().dot(&a.dot(&g));
        g_xa.row_mut(i).assign(&ArrayView1::from(g_null.as_slice().unwrap()));
    }

    let (dec_ad_grads, g_in) = adapters.decoder.backward(&ad_trace, &g_xa);
    let g_xr = &g_xa + &g_in;
    let g_y = base.decoder.backward_input(&dec_trace, &g_xr);
    let g_z = links_backward(&g_y, &links);
    let g_u = normalize_rows_backward(&z, &norms, &g_z, base.power);
    let (enc_ad_grads, _) = adapters.encoder.backward(&enc_trace, &g_u);
    let grads = enc_ad_grads.into_iter().chain(dec_ad_grads).collect();
    Ok((loss / (b * n), grads))
}

/// Trains the adapter pair for rank `d` around a frozen base and keeps the
/// epoch with the lowest held-out fading error, the identity pair included.
pub fn train_ncr_adapters(base: &SemanticCodec, d: usize, cfg: &AdapterConfig, data: &[Image]) -> Result<(AdapterParameters, AdapterReport)> {
    if d > base.side() {
        return Err(HscError::RankOutOfRange { d, max: base.side() });
    }
    let ft = &cfg.finetune;
    let (train, val) = ft.split(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ft.seed);
    rng.set_stream(20 + d as u64);
    let mut adapters = AdapterParameters::identity_with_widths(
        base.k(),
        base.side(),
        d,
        cfg.encoder_hidden.unwrap_or(4 * base.k()),
        cfg.decoder_hidden,
        &mut rng,
    );
    adapters.check(base)?;
    let modes = ft.modes();
    let eval_seed = ft.seed ^ 0x5eed;
    let score = |a: &AdapterParameters| fading_hsc_mse(&Transceiver::with_adapters(base, a), val, d, &modes, &cfg.delivery, eval_seed);
    let mut validation = vec![score(&adapters)?];
    let mut best = (0, adapters.clone());
    let mut opt = crate::codec::adam::Adam::new(ft.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::with_capacity(ft.epochs);
    let mut step = 0;
    for epoch in 0..ft.epochs {
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        let mut acc = 0.0;
        for chunk in order.chunks(ft.batch_size.max(1)) {
            let batch: Vec<&Image> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = adapter_batch(base, &adapters, &batch, &modes, &cfg.delivery, &mut rng)?;
            if !loss.is_finite() {
                return Err(HscError::Divergence { epoch, step });
            }
            let g: Vec<&[f64]> = grads
                .iter()
                .flat_map(|g| [g.weight.as_slice().unwrap(), g.bias.as_slice().unwrap()])
                .collect();
            opt.step(adapters.params_mut(), g);
            if !adapters.is_finite() {
                return Err(HscError::Divergence { epoch, step });
            }
            acc += loss * chunk.len() as f64 / train.len() as f64;
            step += 1;
        }
        epoch_loss.push(acc);
        let v = score(&adapters)?;
        if v < validation[best.0] {
            best = (epoch + 1, adapters.clone());
        }
        validation.push(v);
    }
    Ok((
        best.1,
        AdapterReport {
            epoch_loss,
            validation,
            best_epoch: best.0,
        },
    ))
}

/// Mean recomposed per-pixel error over fading at rank `d`, SNR drawn per
/// image from `modes` with common random numbers for a fixed seed.
pub fn fading_hsc_mse(tx: &Transceiver<'_>, images: &[Image], d: usize, modes: &[ChannelMode], delivery: &CrDelivery, seed: u64) -> Result<f64> {
    if modes.is_empty() {
        return Err(HscError::Empty("channel modes"));
    }
    let mut total = 0.0;
    for (i, img) in images.iter().enumerate() {
        let mode = modes[pick_mode(seed, i, modes.len())];
        let link = LinkConfig::symmetric(mode, *delivery);
        let out = run_hsc(tx, std::slice::from_ref(img), &[d], &link, seed.wrapping_add(i as u64))?;
        total += out[0][0].mse_recomposed;
    }
    Ok(total / images.len() as f64)
}
