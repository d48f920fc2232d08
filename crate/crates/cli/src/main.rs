use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsc::data::idx::DATA_ENV;
use hsc::pipeline::Transceiver;
use hsc::{HscError, Result};
use hsc_bench::config::{ExperimentConfig, Scenario};
use hsc_bench::models::{self, load_data};
use hsc_bench::sweep::{dump_examples, run_custom, run_fig2, run_fig3, run_fig4, Fig4Models};
use hsc_bench::verify::run_checks;
use hsc_bench::write_csv;

#[derive(Parser, Debug)]
#[command(name = "hsc", version, about = "Hybrid semantic-complementary image transmission experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key-value experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for training and the evaluation channel (replaces the seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory. Checkpoints for the training commands, CSV and
    /// images otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CR ranks, `a,b,c` or `start:stop:step`.
    #[arg(long, global = true)]
    d: Option<String>,
    /// SNR grid in dB, `a,b,c` or `start:stop:step`.
    #[arg(long, global = true)]
    snr: Option<String>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true, value_parser = ["error_free", "awgn", "fading"])]
    channel: Option<String>,
    /// MNIST directory holding the IDX files.
    #[arg(long, global = true, env = DATA_ENV)]
    data_dir: Option<PathBuf>,
    /// Any config key, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train transceivers (every `k_values` entry, or `--k`) on an error-free channel.
    Train {
        /// Codebook variant instead of the variational one.
        #[arg(long)]
        vq: bool,
    },
    /// Few-shot fine-tuning of the `k` model under fading.
    Finetune,
    /// One adapter pair per `d` around the fine-tuned model.
    TrainAdapters,
    /// Run a figure sweep and write `<out>/<scenario>.csv`.
    Sweep { scenario: String },
    /// Write original, generated and recomposed images as PGM.
    Dump,
    /// Run the self-check suite.
    Verify,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &cli.data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| HscError::InvalidParameter(format!("--set expects key=value, got {o:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
        cfg.train_seed = s;
    }
    if let Some(d) = &cli.d {
        cfg.set("d", d)?;
    }
    if let Some(s) = &cli.snr {
        cfg.set("snr", s)?;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(c) = &cli.channel {
        cfg.set("channel", c)?;
    }
    if let Some(out) = &cli.out {
        match cli.command {
            Command::Train { .. } | Command::Finetune | Command::TrainAdapters => cfg.model_dir = out.clone(),
            _ => cfg.out_dir = out.clone(),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_family(cfg: &ExperimentConfig, vq: bool) -> Result<BTreeMap<usize, hsc::codec::SemanticCodec>> {
    let mut ks = cfg.k_values.clone();
    ks.push(cfg.k);
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter().map(|k| Ok((k, models::load_base(cfg, k, vq)?))).collect()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = build_config(&cli)?;
    match &cli.command {
        Command::Train { vq } => {
            let data = load_data(&cfg)?;
            let ks = if cli.k.is_some() {
                vec![cfg.k]
            } else {
                let mut ks = cfg.k_values.clone();
                if !ks.contains(&cfg.k) {
                    ks.push(cfg.k);
                }
                ks
            };
            for (k, r) in models::train_models(&cfg, &data, &ks, *vq)? {
                println!("k {k}: eval MSE {:.6e} -> {:.6e}", r.initial.recon, r.final_eval.recon);
            }
        }
        Command::Finetune => {
            let data = load_data(&cfg)?;
            let r = models::finetune_model(&cfg, &data)?;
            println!(
                "fading validation MSE {:.6e} -> {:.6e}{}",
                r.before,
                r.after,
                if r.reverted { " (reverted)" } else { "" }
            );
        }
        Command::TrainAdapters => {
            let data = load_data(&cfg)?;
            let base = models::load_finetuned(&cfg, cfg.k)?;
            let reg = models::train_adapters(&cfg, &base, &data.train)?;
            let dir = models::adapter_dir(&cfg, cfg.k);
            reg.save_dir(&dir)?;
            println!("{} adapter pairs -> {}", reg.len(), dir.display());
        }
        Command::Sweep { scenario } => {
            cfg.scenario = scenario.parse()?;
            let data = load_data(&cfg)?;
            let records = match cfg.scenario {
                Scenario::Fig2Vae | Scenario::Fig2VqVae => run_fig2(&cfg, &load_family(&cfg, cfg.variant_is_vq())?, &data.eval)?,
                Scenario::Fig3FixedLoad => {
                    let (records, crossover) = run_fig3(&cfg, &load_family(&cfg, false)?, &data.eval)?;
                    match crossover {
                        Some(eta) => println!("crossover at eta = {eta:.4}"),
                        None => println!("no crossover in the configured eta grid"),
                    }
                    records
                }
                Scenario::Fig4Fading => {
                    let base = models::load_base(&cfg, cfg.k, false)?;
                    let finetuned = models::load_finetuned(&cfg, cfg.k)?;
                    let adapters = models::load_adapters(&cfg, cfg.k)?;
                    let m = Fig4Models {
                        base: &base,
                        finetuned: &finetuned,
                        adapters: &adapters,
                    };
                    run_fig4(&cfg, &m, &data.eval)?
                }
                Scenario::Custom => run_custom(&cfg, &models::load_base(&cfg, cfg.k, false)?, &data.eval)?,
            };
            let path = cfg.out_dir.join(format!("{}.csv", cfg.scenario));
            write_csv(&path, &records)?;
            println!("{} records -> {}", records.len(), path.display());
        }
        Command::Dump => {
            let data = load_data(&cfg)?;
            let codec = models::load_base(&cfg, cfg.k, false)?;
            let files = dump_examples(&cfg, &Transceiver::new(&codec), &data.eval, &cfg.out_dir.join("dump"))?;
            println!("{} images -> {}", files.len(), cfg.out_dir.join("dump").display());
        }
        Command::Verify => {
            let checks = run_checks(cfg.seeds[0])?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(HscError::InvalidParameter(format!("{failed} self-checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
