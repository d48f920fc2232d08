//! The figure sweeps. Each point is an independent job with its own seeded
//! channel streams; jobs run on a bounded pool and results are collected in
//! job order, so output does not depend on scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use hsc::adaptation::AdapterRegistry;
use hsc::channel::ChannelMode;
use hsc::codec::SemanticCodec;
use hsc::cr::payload_ratio;
use hsc::data::pnm::write_pgm;
use hsc::pipeline::{run_hsc, LinkConfig, Transceiver};
use hsc::{HscError, Image, Result};

use crate::config::ExperimentConfig;
use crate::record::{Stat, SweepRecord};

/// Per-sample errors at one rank, pooled over images and seeds.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub generated: Vec<f64>,
    pub recomposed: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub seconds: f64,
}

pub fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HscError::InvalidParameter(format!("worker pool: {e}")))
}

/// Runs `images` at every rank for each seed and pools the errors.
pub fn evaluate(tx: &Transceiver<'_>, images: &[Image], ranks: &[usize], link: &LinkConfig, seeds: &[u64]) -> Result<Vec<Samples>> {
    let start = Instant::now();
    let mut out = vec![Samples::default(); ranks.len()];
    for &seed in seeds {
        for per_image in run_hsc(tx, images, ranks, link, seed)? {
            for (j, o) in per_image.iter().enumerate() {
                out[j].generated.push(o.mse_generated);
                out[j].recomposed.push(o.mse_recomposed);
                out[j].closed_form.push(o.mse_closed_form);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    for s in &mut out {
        s.seconds = secs;
    }
    Ok(out)
}

fn seed_label(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn eta(cfg: &ExperimentConfig, k: usize, d: usize) -> Result<f64> {
    Ok(payload_ratio(k, cfg.chain_spec().rate(), cfg.side, d)?.eta)
}

struct Point<'a> {
    curve: &'a str,
    k: usize,
    d: usize,
    mode: ChannelMode,
    samples: &'a Samples,
}

fn record(cfg: &ExperimentConfig, p: Point<'_>) -> Result<SweepRecord> {
    Ok(SweepRecord {
        scenario: cfg.scenario.id().to_string(),
        curve: p.curve.to_string(),
        k: p.k,
        d: p.d,
        eta: eta(cfg, p.k, p.d)?,
        eta_budget: None,
        snr_db: p.mode.snr_db(),
        generated: Stat::of(&p.samples.generated),
        recomposed: Stat::of(&p.samples.recomposed),
        closed_form: Stat::of(&p.samples.closed_form),
        seed: seed_label(&cfg.seeds),
        wall_time: cfg.record_wall_time.then_some(p.samples.seconds),
    })
}

fn link_for(cfg: &ExperimentConfig, mode: ChannelMode) -> LinkConfig {
    let delivery = match mode {
        ChannelMode::ErrorFree => cfg.cr_delivery(cfg.delivery),
        _ => cfg.cr_delivery(cfg.noisy_delivery),
    };
    LinkConfig::symmetric(mode, delivery)
}

fn eval_set<'a>(cfg: &ExperimentConfig, images: &'a [Image]) -> Result<&'a [Image]> {
    if images.is_empty() {
        return Err(HscError::Empty("evaluation set"));
    }
    Ok(&images[..cfg.eval_images.min(images.len())])
}

/// SC grows `k` at `d = 0`; HSC keeps `k = cfg.k` and grows `d`. One pair of
/// curves per configured channel mode.
pub fn run_fig2(cfg: &ExperimentConfig, models: &BTreeMap<usize, SemanticCodec>, images: &[Image]) -> Result<Vec<SweepRecord>> {
    let images = eval_set(cfg, images)?;
    let hsc_model = models
        .get(&cfg.k)
        .ok_or_else(|| HscError::InvalidParameter(format!("no model for k = {}", cfg.k)))?;
    let modes = cfg.channel_modes();
    let mut jobs: Vec<(&str, usize, &SemanticCodec, Vec<usize>, ChannelMode)> = Vec::new();
    for &mode in &modes {
        for &k in &cfg.k_values {
            let m = models
                .get(&k)
                .ok_or_else(|| HscError::InvalidParameter(format!("no model for k = {k}")))?;
            jobs.push(("sc", k, m, vec![0], mode));
        }
        jobs.push(("hsc", cfg.k, hsc_model, cfg.d_values.clone(), mode));
    }
    let results = pool(cfg)?.install(|| {
        jobs.par_iter()
            .map(|(_, _, m, ranks, mode)| evaluate(&Transceiver::new(m), images, ranks, &link_for(cfg, *mode), &cfg.seeds))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out = Vec::new();
    for ((curve, k, _, ranks, mode), res) in jobs.iter().zip(&results) {
        for (&d, samples) in ranks.iter().zip(res) {
            out.push(record(
                cfg,
                Point {
                    curve,
                    k: *k,
                    d,
                    mode: *mode,
                    samples,
                },
            )?);
        }
    }
    Ok(out)
}

/// Fixed total load: at each budget, the best SR-only allocation against the
/// best SR+CR allocation over the available models. The returned crossover is
/// the smallest budget at which SR+CR wins outright.
pub fn run_fig3(cfg: &ExperimentConfig, models: &BTreeMap<usize, SemanticCodec>, images: &[Image]) -> Result<(Vec<SweepRecord>, Option<f64>)> {
    let images = eval_set(cfg, images)?;
    let mode = cfg.channel_modes()[0];
    let ranks: Vec<usize> = (0..=cfg.side).collect();
    let ks: Vec<usize> = cfg.k_values.iter().copied().filter(|k| models.contains_key(k)).collect();
    if ks.is_empty() {
        return Err(HscError::InvalidParameter("no models for the configured k values".into()));
    }
    let tables = pool(cfg)?.install(|| {
        ks.par_iter()
            .map(|k| evaluate(&Transceiver::new(&models[k]), images, &ranks, &link_for(cfg, mode), &cfg.seeds))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out = Vec::new();
    let mut crossover = None;
    for &budget in &cfg.eta_values {
        let mut best_sc: Option<(usize, usize, f64)> = None;
        let mut best_hsc: Option<(usize, usize, f64)> = None;
        for (i, &k) in ks.iter().enumerate() {
            for &d in &ranks {
                if eta(cfg, k, d)? > budget + 1e-12 {
                    break;
                }
                let m = Stat::of(&tables[i][d].recomposed).mean;
                if d == 0 && best_sc.is_none_or(|b| m < b.2) {
                    best_sc = Some((i, d, m));
                }
                if best_hsc.is_none_or(|b| m < b.2) {
                    best_hsc = Some((i, d, m));
                }
            }
        }
        let (Some(sc), Some(hsc)) = (best_sc, best_hsc) else {
            continue;
        };
        for (curve, (i, d, _)) in [("sc", sc), ("hsc", hsc)] {
            let mut r = record(
                cfg,
                Point {
                    curve,
                    k: ks[i],
                    d,
                    mode,
                    samples: &tables[i][d],
                },
            )?;
            r.eta_budget = Some(budget);
            out.push(r);
        }
        if crossover.is_none() && hsc.1 > 0 && hsc.2 < sc.2 {
            crossover = Some(budget);
            let mut r = out.last().unwrap().clone();
            r.curve = "crossover".into();
            out.push(r);
        }
    }
    Ok((out, crossover))
}

pub struct Fig4Models<'a> {
    pub base: &'a SemanticCodec,
    pub finetuned: &'a SemanticCodec,
    pub adapters: &'a AdapterRegistry,
}

/// Error-free, fading, fading after fine-tuning, fading with fine-tuning and
/// per-rank adapters, all against `d`. Every fading curve sees the same
/// channel draws for a given seed.
pub fn run_fig4(cfg: &ExperimentConfig, m: &Fig4Models<'_>, images: &[Image]) -> Result<Vec<SweepRecord>> {
    let images = eval_set(cfg, images)?;
    for &d in &cfg.d_values {
        m.adapters.get(d)?;
    }
    enum Job {
        All(&'static str, ChannelMode),
        Ncr(ChannelMode, usize),
    }
    let mut jobs = vec![Job::All("error_free", ChannelMode::ErrorFree)];
    for mode in cfg.fading_modes() {
        jobs.push(Job::All("fading", mode));
        jobs.push(Job::All("fading_ft", mode));
        for &d in &cfg.d_values {
            jobs.push(Job::Ncr(mode, d));
        }
    }
    let results = pool(cfg)?.install(|| {
        jobs.par_iter()
            .map(|job| match job {
                Job::All(curve, mode) => {
                    let codec = if *curve == "fading_ft" { m.finetuned } else { m.base };
                    evaluate(&Transceiver::new(codec), images, &cfg.d_values, &link_for(cfg, *mode), &cfg.seeds)
                }
                Job::Ncr(mode, d) => {
                    let tx = Transceiver::with_adapters(m.finetuned, m.adapters.get(*d)?);
                    evaluate(&tx, images, &[*d], &link_for(cfg, *mode), &cfg.seeds)
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out = Vec::new();
    for (job, res) in jobs.iter().zip(&results) {
        match job {
            Job::All(curve, mode) => {
                for (&d, samples) in cfg.d_values.iter().zip(res) {
                    out.push(record(
                        cfg,
                        Point {
                            curve,
                            k: m.base.k(),
                            d,
                            mode: *mode,
                            samples,
                        },
                    )?);
                }
            }
            Job::Ncr(mode, d) => {
                out.push(record(
                    cfg,
                    Point {
                        curve: "fading_ncr",
                        k: m.base.k(),
                        d: *d,
                        mode: *mode,
                        samples: &res[0],
                    },
                )?);
            }
        }
    }
    Ok(out)
}

/// One model, the configured channel and `d` sweep.
pub fn run_custom(cfg: &ExperimentConfig, codec: &SemanticCodec, images: &[Image]) -> Result<Vec<SweepRecord>> {
    let images = eval_set(cfg, images)?;
    let modes = cfg.channel_modes();
    let results = pool(cfg)?.install(|| {
        modes
            .par_iter()
            .map(|&mode| evaluate(&Transceiver::new(codec), images, &cfg.d_values, &link_for(cfg, mode), &cfg.seeds))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut out = Vec::new();
    for (&mode, res) in modes.iter().zip(&results) {
        for (&d, samples) in cfg.d_values.iter().zip(res) {
            out.push(record(
                cfg,
                Point {
                    curve: "hsc",
                    k: codec.k(),
                    d,
                    mode,
                    samples,
                },
            )?);
        }
    }
    Ok(out)
}

/// Writes `X`, `X̂` and `X̃` at every `dump_d` for the first `dump_images`
/// images as PGM files. The channel is the first configured mode.
pub fn dump_examples(cfg: &ExperimentConfig, tx: &Transceiver<'_>, images: &[Image], dir: &Path) -> Result<Vec<PathBuf>> {
    if images.is_empty() || cfg.dump_images == 0 {
        return Err(HscError::Empty("images to dump"));
    }
    std::fs::create_dir_all(dir)?;
    let n = cfg.dump_images.min(images.len());
    let mode = cfg.channel_modes()[0];
    let seed = cfg.seeds[0];
    let outcomes = run_hsc(tx, &images[..n], &cfg.dump_d, &link_for(cfg, mode), seed)?;
    let mut written = Vec::new();
    let mut put = |name: String, img: &Image| -> Result<()> {
        let p = dir.join(name);
        write_pgm(&p, &img.clamp_unit())?;
        written.push(p);
        Ok(())
    };
    for (i, per_rank) in outcomes.iter().enumerate() {
        put(format!("img{i:03}-original.pgm"), &images[i])?;
        if let Some(first) = per_rank.first() {
            put(format!("img{i:03}-generated.pgm"), &first.generated)?;
        }
        for o in per_rank {
            put(format!("img{i:03}-d{:02}.pgm", o.d), &o.recomposed)?;
        }
    }
    Ok(written)
}
