//! Datasets, checkpoint locations and the training commands.

use std::path::PathBuf;

use hsc::adaptation::{finetune, train_ncr_adapters, AdapterConfig, AdapterRegistry, FinetuneConfig, FinetuneReport};
use hsc::codec::checkpoint::{load_codec, save_codec};
use hsc::codec::{train_elbo, train_vqvae, SemanticCodec, TrainReport};
use hsc::data::idx::{data_dir_from_env, DATA_ENV};
use hsc::data::{load_mnist_split, synthetic_digits};
use hsc::{HscError, Image, Result};

use crate::config::{Dataset, ExperimentConfig};

pub const SYNTH_TRAIN_SEED: u64 = 1;
pub const SYNTH_EVAL_SEED: u64 = 2;

#[derive(Debug, Clone)]
pub struct Data {
    pub train: Vec<Image>,
    pub eval: Vec<Image>,
    pub source: &'static str,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Data> {
    let dir = cfg.data_dir.clone().or_else(data_dir_from_env);
    let use_mnist = match cfg.dataset {
        Dataset::Mnist => true,
        Dataset::Synthetic => false,
        Dataset::Auto => dir.is_some(),
    };
    if use_mnist {
        let dir = dir.ok_or_else(|| HscError::InvalidParameter(format!("dataset = mnist needs data_dir or {DATA_ENV}")))?;
        let mut split = load_mnist_split(&dir)?;
        split.train.truncate(cfg.train_images);
        split.eval.truncate(cfg.eval_images.max(cfg.dump_images));
        log::info!("MNIST from {}: {} train, {} eval", dir.display(), split.train.len(), split.eval.len());
        return Ok(Data {
            train: split.train,
            eval: split.eval,
            source: "mnist",
        });
    }
    log::info!("no MNIST directory configured; using synthetic digits");
    Ok(Data {
        train: synthetic_digits(cfg.train_images, SYNTH_TRAIN_SEED).0,
        eval: synthetic_digits(cfg.eval_images.max(cfg.dump_images), SYNTH_EVAL_SEED).0,
        source: "synthetic",
    })
}

pub fn codec_path(cfg: &ExperimentConfig, k: usize, vq: bool) -> PathBuf {
    let kind = if vq { "vqvae" } else { "vae" };
    cfg.model_dir.join(format!("{kind}-k{k}.hscm"))
}

pub fn finetuned_path(cfg: &ExperimentConfig, k: usize) -> PathBuf {
    cfg.model_dir.join(format!("vae-k{k}-ft.hscm"))
}

pub fn adapter_dir(cfg: &ExperimentConfig, k: usize) -> PathBuf {
    cfg.model_dir.join(format!("adapters-k{k}"))
}

fn load_checked(path: PathBuf, hint: &str) -> Result<SemanticCodec> {
    if !path.exists() {
        return Err(HscError::InvalidParameter(format!(
            "missing checkpoint {} (run `hsc {hint}` first)",
            path.display()
        )));
    }
    load_codec(&path)
}

pub fn load_base(cfg: &ExperimentConfig, k: usize, vq: bool) -> Result<SemanticCodec> {
    load_checked(codec_path(cfg, k, vq), "train")
}

pub fn load_finetuned(cfg: &ExperimentConfig, k: usize) -> Result<SemanticCodec> {
    load_checked(finetuned_path(cfg, k), "finetune")
}

pub fn load_adapters(cfg: &ExperimentConfig, k: usize) -> Result<AdapterRegistry> {
    let dir = adapter_dir(cfg, k);
    if !dir.is_dir() {
        return Err(HscError::InvalidParameter(format!(
            "missing adapter directory {} (run `hsc train-adapters` first)",
            dir.display()
        )));
    }
    AdapterRegistry::load_dir(&dir)
}

pub fn train_one(cfg: &ExperimentConfig, data: &[Image], k: usize, vq: bool) -> Result<(SemanticCodec, TrainReport)> {
    let arch = cfg.arch_spec(k, vq);
    let tc = cfg.train_config();
    if vq {
        train_vqvae(data, arch, cfg.power, &tc)
    } else {
        train_elbo(data, arch, cfg.power, &tc)
    }
}

/// Trains and saves one model per `k` in `ks`.
pub fn train_models(cfg: &ExperimentConfig, data: &Data, ks: &[usize], vq: bool) -> Result<Vec<(usize, TrainReport)>> {
    std::fs::create_dir_all(&cfg.model_dir)?;
    let mut out = Vec::new();
    for &k in ks {
        let (codec, report) = train_one(cfg, &data.train, k, vq)?;
        let path = codec_path(cfg, k, vq);
        save_codec(&codec, &path)?;
        log::info!("k = {k}: eval MSE {:.4e} -> {}", report.final_eval.recon, path.display());
        out.push((k, report));
    }
    Ok(out)
}

pub fn finetune_model(cfg: &ExperimentConfig, data: &Data) -> Result<FinetuneReport> {
    let base = load_base(cfg, cfg.k, false)?;
    let (tuned, report) = finetune(&base, &cfg.finetune_config(), &data.train)?;
    save_codec(&tuned, &finetuned_path(cfg, cfg.k))?;
    Ok(report)
}

pub fn adapter_config(cfg: &ExperimentConfig) -> AdapterConfig {
    AdapterConfig {
        finetune: FinetuneConfig {
            learning_rate: cfg.adapter_learning_rate,
            ..cfg.finetune_config()
        },
        delivery: cfg.cr_delivery(cfg.noisy_delivery),
        encoder_hidden: None,
        decoder_hidden: cfg.adapter_decoder_hidden,
    }
}

/// One adapter pair per configured `d`, around the fine-tuned model.
pub fn train_adapters(cfg: &ExperimentConfig, base: &SemanticCodec, data: &[Image]) -> Result<AdapterRegistry> {
    use rayon::prelude::*;
    let acfg = adapter_config(cfg);
    let pairs = cfg
        .d_values
        .par_iter()
        .map(|&d| train_ncr_adapters(base, d, &acfg, data).map(|(a, _)| a))
        .collect::<Result<Vec<_>>>()?;
    let mut reg = AdapterRegistry::new();
    for a in pairs {
        reg.insert(a);
    }
    Ok(reg)
}
