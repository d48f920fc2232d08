//! Experiment configuration: `key = value` lines, `#` comments, overridable
//! from the command line. The schema is listed in `docs/config.md`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hsc::adaptation::{snr_grid, FinetuneConfig};
use hsc::chain::quantize::QuantizerSpec;
use hsc::chain::ChainSpec;
use hsc::channel::ChannelMode;
use hsc::codec::{ArchSpec, EpsilonMode, TrainConfig};
use hsc::cr::CrDelivery;
use hsc::{HscError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig2Vae,
    Fig2VqVae,
    Fig3FixedLoad,
    Fig4Fading,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Fig2Vae,
        Scenario::Fig2VqVae,
        Scenario::Fig3FixedLoad,
        Scenario::Fig4Fading,
        Scenario::Custom,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Scenario::Fig2Vae => "fig2_vae",
            Scenario::Fig2VqVae => "fig2_vqvae",
            Scenario::Fig3FixedLoad => "fig3_fixed_load",
            Scenario::Fig4Fading => "fig4_fading",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scenario {
    type Err = HscError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| bad("scenario", s, "fig2_vae | fig2_vqvae | fig3_fixed_load | fig4_fading | custom"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    ErrorFree,
    Awgn,
    Fading,
}

impl FromStr for ChannelKind {
    type Err = HscError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error_free" => Ok(ChannelKind::ErrorFree),
            "awgn" => Ok(ChannelKind::Awgn),
            "fading" => Ok(ChannelKind::Fading),
            _ => Err(bad("channel", s, "error_free | awgn | fading")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryKind {
    Exact,
    Quantized,
    Chain,
}

impl FromStr for DeliveryKind {
    type Err = HscError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(DeliveryKind::Exact),
            "quantized" => Ok(DeliveryKind::Quantized),
            "chain" => Ok(DeliveryKind::Chain),
            _ => Err(bad("delivery", s, "exact | quantized | chain")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    /// MNIST if a data directory is configured, synthetic digits otherwise.
    Auto,
    Mnist,
    Synthetic,
}

impl FromStr for Dataset {
    type Err = HscError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Dataset::Auto),
            "mnist" => Ok(Dataset::Mnist),
            "synthetic" => Ok(Dataset::Synthetic),
            _ => Err(bad("dataset", s, "auto | mnist | synthetic")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Widths {
    Full,
    Desk,
}

impl FromStr for Widths {
    type Err = HscError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Widths::Full),
            "desk" => Ok(Widths::Desk),
            _ => Err(bad("arch", s, "full | desk")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub k: usize,
    pub power: f64,
    pub side: usize,
    pub d_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub eta_values: Vec<f64>,
    pub channel: ChannelKind,
    pub snr_db: Vec<f64>,
    pub mu: f64,
    pub seeds: Vec<u64>,
    pub eval_images: usize,
    pub delivery: DeliveryKind,
    pub noisy_delivery: DeliveryKind,
    pub quantizer_bits: u8,
    pub dataset: Dataset,
    pub data_dir: Option<PathBuf>,
    pub model_dir: PathBuf,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub record_wall_time: bool,

    pub arch: Widths,
    pub codebook_size: usize,
    pub train_images: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    pub train_seed: u64,

    pub ft_samples: usize,
    pub ft_validation: usize,
    pub ft_epochs: usize,
    pub ft_learning_rate: f64,
    pub ft_batch_size: usize,
    pub adapter_learning_rate: f64,
    pub adapter_decoder_hidden: usize,
    pub dump_d: Vec<usize>,
    pub dump_images: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Custom,
            k: 128,
            power: 1.0,
            side: 28,
            d_values: (0..=28).step_by(2).collect(),
            k_values: vec![32, 64, 128, 256, 512],
            eta_values: (1..=40).map(|i| i as f64 * 0.025).collect(),
            channel: ChannelKind::ErrorFree,
            snr_db: snr_grid(0.0, 5.0, 0.5),
            mu: 1.0,
            seeds: vec![0, 1, 2],
            eval_images: 100,
            delivery: DeliveryKind::Quantized,
            noisy_delivery: DeliveryKind::Chain,
            quantizer_bits: 8,
            dataset: Dataset::Auto,
            data_dir: None,
            model_dir: PathBuf::from("models"),
            out_dir: PathBuf::from("out"),
            workers: 0,
            record_wall_time: false,
            arch: Widths::Desk,
            codebook_size: 512,
            train_images: 5000,
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            kl_weight: 1e-3,
            train_seed: 0,
            ft_samples: 200,
            ft_validation: 100,
            ft_epochs: 10,
            ft_learning_rate: 3e-5,
            ft_batch_size: 16,
            adapter_learning_rate: 1e-3,
            adapter_decoder_hidden: 1024,
            dump_d: vec![0, 8, 16, 28],
            dump_images: 4,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> HscError {
    HscError::InvalidParameter(format!("{key}: cannot parse {value:?} (expected {expected})"))
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, v, std::any::type_name::<T>()))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "true | false")),
    }
}

/// `a, b, c` or an inclusive range `start:stop:step`.
fn list<T>(key: &str, v: &str) -> Result<Vec<T>>
where
    T: FromStr + Copy + PartialOrd + std::ops::Add<Output = T>,
{
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (start, stop, step): (T, T, T) = (scalar(key, parts[0])?, scalar(key, parts[1])?, scalar(key, parts[2])?);
        if !(start + step > start) {
            return Err(bad(key, v, "a positive step"));
        }
        let mut out = Vec::new();
        let mut i = 0usize;
        let mut x = start;
        while x <= stop && i < 100_000 {
            out.push(x);
            x = x + step;
            i += 1;
        }
        return Ok(out);
    }
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| scalar(key, s)).collect()
}

fn float_range(key: &str, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let (lo, hi, step): (f64, f64, f64) = (scalar(key, parts[0])?, scalar(key, parts[1])?, scalar(key, parts[2])?);
        if !(step > 0.0) || hi < lo {
            return Err(bad(key, v, "start:stop:step with step > 0"));
        }
        return Ok(snr_grid(lo, hi, step));
    }
    list(key, v)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HscError::InvalidParameter(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HscError::InvalidParameter(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = v.parse()?,
            "k" => self.k = scalar(key, v)?,
            "power" => self.power = scalar(key, v)?,
            "side" => self.side = scalar(key, v)?,
            "d" => self.d_values = list(key, v)?,
            "k_values" => self.k_values = list(key, v)?,
            "eta" => self.eta_values = float_range(key, v)?,
            "channel" => self.channel = v.parse()?,
            "snr" => self.snr_db = float_range(key, v)?,
            "mu" => self.mu = scalar(key, v)?,
            "seeds" => self.seeds = list(key, v)?,
            "eval_images" => self.eval_images = scalar(key, v)?,
            "delivery" => self.delivery = v.parse()?,
            "noisy_delivery" => self.noisy_delivery = v.parse()?,
            "quantizer_bits" => self.quantizer_bits = scalar(key, v)?,
            "dataset" => self.dataset = v.parse()?,
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "model_dir" => self.model_dir = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "workers" => self.workers = scalar(key, v)?,
            "record_wall_time" => self.record_wall_time = flag(key, v)?,
            "arch" => self.arch = v.parse()?,
            "codebook_size" => self.codebook_size = scalar(key, v)?,
            "train_images" => self.train_images = scalar(key, v)?,
            "epochs" => self.epochs = scalar(key, v)?,
            "batch_size" => self.batch_size = scalar(key, v)?,
            "learning_rate" => self.learning_rate = scalar(key, v)?,
            "kl_weight" => self.kl_weight = scalar(key, v)?,
            "train_seed" => self.train_seed = scalar(key, v)?,
            "ft_samples" => self.ft_samples = scalar(key, v)?,
            "ft_validation" => self.ft_validation = scalar(key, v)?,
            "ft_epochs" => self.ft_epochs = scalar(key, v)?,
            "ft_learning_rate" => self.ft_learning_rate = scalar(key, v)?,
            "ft_batch_size" => self.ft_batch_size = scalar(key, v)?,
            "adapter_learning_rate" => self.adapter_learning_rate = scalar(key, v)?,
            "adapter_decoder_hidden" => self.adapter_decoder_hidden = scalar(key, v)?,
            "dump_d" => self.dump_d = list(key, v)?,
            "dump_images" => self.dump_images = scalar(key, v)?,
            _ => return Err(HscError::InvalidParameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HscError::InvalidParameter(m));
        if let Some(&d) = self.d_values.iter().chain(&self.dump_d).find(|&&d| d > self.side) {
            return fail(format!("d = {d} outside [0, {}]", self.side));
        }
        if self.d_values.is_empty() {
            return fail("d sweep is empty".into());
        }
        if self.k == 0 || self.k_values.contains(&0) {
            return fail("k must be positive".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if !(self.power > 0.0) || !(self.mu > 0.0) {
            return fail("power and mu must be positive".into());
        }
        if self.channel != ChannelKind::ErrorFree && self.snr_db.is_empty() {
            return fail("a noisy channel needs an SNR grid".into());
        }
        if self.eval_images == 0 {
            return fail("eval_images must be positive".into());
        }
        self.quantizer().validate()?;
        self.train_config().validate()?;
        self.arch_spec(self.k, false).validate()
    }

    pub fn arch_spec(&self, k: usize, vq: bool) -> ArchSpec {
        let mut a = match self.arch {
            Widths::Full => ArchSpec::full(k),
            Widths::Desk => ArchSpec::desk(k),
        };
        a.side = self.side;
        if vq {
            a = a.vq(self.codebook_size);
        }
        a
    }

    pub fn variant_is_vq(&self) -> bool {
        self.scenario == Scenario::Fig2VqVae
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            kl_weight: self.kl_weight,
            commitment: 0.25,
            seed: self.train_seed,
            epsilon: EpsilonMode::PerDimension,
        }
    }

    pub fn finetune_config(&self) -> FinetuneConfig {
        FinetuneConfig {
            snr_db: self.snr_db.clone(),
            mu: self.mu,
            samples: self.ft_samples,
            validation: self.ft_validation,
            epochs: self.ft_epochs,
            learning_rate: self.ft_learning_rate,
            batch_size: self.ft_batch_size,
            seed: self.train_seed,
        }
    }

    pub fn quantizer(&self) -> QuantizerSpec {
        QuantizerSpec::with_bits(self.quantizer_bits)
    }

    pub fn chain_spec(&self) -> ChainSpec {
        ChainSpec {
            quantizer: self.quantizer(),
            ..ChainSpec::default()
        }
    }

    pub fn cr_delivery(&self, kind: DeliveryKind) -> CrDelivery {
        match kind {
            DeliveryKind::Exact => CrDelivery::Exact,
            DeliveryKind::Quantized => CrDelivery::Quantized(self.quantizer()),
            DeliveryKind::Chain => CrDelivery::Chain(self.chain_spec()),
        }
    }

    /// Channel modes for the configured kind, one per SNR point.
    pub fn channel_modes(&self) -> Vec<ChannelMode> {
        match self.channel {
            ChannelKind::ErrorFree => vec![ChannelMode::ErrorFree],
            ChannelKind::Awgn => self.snr_db.iter().map(|&snr_db| ChannelMode::Awgn { snr_db }).collect(),
            ChannelKind::Fading => self
                .snr_db
                .iter()
                .map(|&snr_db| ChannelMode::SlowFading { snr_db, mu: self.mu })
                .collect(),
        }
    }

    pub fn fading_modes(&self) -> Vec<ChannelMode> {
        self.snr_db
            .iter()
            .map(|&snr_db| ChannelMode::SlowFading { snr_db, mu: self.mu })
            .collect()
    }
}
