//! Sweep output rows and their CSV form.

use std::io::Write;
use std::path::Path;

use hsc::Result;

pub const SCHEMA: &str = "hsc-sweep/1";

pub const COLUMNS: [&str; 16] = [
    "scenario",
    "curve",
    "k",
    "d",
    "eta",
    "eta_budget",
    "snr_db",
    "samples",
    "mse_generated",
    "se_generated",
    "mse_recomposed",
    "se_recomposed",
    "mse_closed_form",
    "se_closed_form",
    "seed",
    "wall_time",
];

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, se, n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub scenario: String,
    pub curve: String,
    pub k: usize,
    pub d: usize,
    pub eta: f64,
    /// Total load a fixed-load allocation was chosen under.
    pub eta_budget: Option<f64>,
    pub snr_db: Option<f64>,
    pub generated: Stat,
    pub recomposed: Stat,
    pub closed_form: Stat,
    /// Seeds averaged over, `;`-separated.
    pub seed: String,
    pub wall_time: Option<f64>,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.9e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl SweepRecord {
    pub fn csv_row(&self) -> String {
        [
            self.scenario.clone(),
            self.curve.clone(),
            self.k.to_string(),
            self.d.to_string(),
            num(self.eta),
            opt(self.eta_budget),
            opt(self.snr_db),
            self.recomposed.n.to_string(),
            num(self.generated.mean),
            num(self.generated.se),
            num(self.recomposed.mean),
            num(self.recomposed.se),
            num(self.closed_form.mean),
            num(self.closed_form.se),
            self.seed.clone(),
            self.wall_time.map(|t| format!("{t:.3}")).unwrap_or_default(),
        ]
        .join(",")
    }
}

/// Schema line, header, one row per record, `\n` line ends.
pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut s = format!("# {SCHEMA}\n{}\n", COLUMNS.join(","));
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(to_csv(records).as_bytes())?;
    Ok(())
}
