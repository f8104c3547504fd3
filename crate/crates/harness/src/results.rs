//! Result rows, CSV output and the summary document.
//!
//! CSV columns, in order:
//!
//! - `replication`: zero-based replication index
//! - `method`: OK, RK, UK, URK, KOH, RK-KOH, IDW or LIMIT
//! - `kernel`: kernel family, `none` for IDW
//! - `theta`: fixed length-scale (calibration rows), else empty
//! - `rmse`, `interval_score`: on the test set, empty when not defined
//! - `mu_hat`: estimated constant mean (OK, RK)
//! - `coef`: `;`-separated regression or calibration coefficients
//! - `theta_hat`: `;`-separated estimated length-scales
//! - `loocv_rmse`: leave-one-out RMSE when requested
//! - `wall_time`: seconds, only when timing is enabled
//! - `error`: error message for a failed fit, else empty
//!
//! Numbers use Rust's shortest round-trip formatting, so identical values
//! always print identically.

use std::io::Write;

use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::error::HarnessError;

pub const CSV_HEADER: [&str; 12] = [
    "replication",
    "method",
    "kernel",
    "theta",
    "rmse",
    "interval_score",
    "mu_hat",
    "coef",
    "theta_hat",
    "loocv_rmse",
    "wall_time",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub replication: usize,
    pub method: Method,
    /// Kernel name, `none` for kernel-free methods.
    pub kernel: String,
    pub theta: Option<f64>,
    pub rmse: Option<f64>,
    pub interval_score: Option<f64>,
    pub mu_hat: Option<f64>,
    pub coef: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub loocv_rmse: Option<f64>,
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn new(replication: usize, method: Method, kernel: &str) -> Self {
        ResultRow {
            replication,
            method,
            kernel: kernel.to_string(),
            theta: None,
            rmse: None,
            interval_score: None,
            mu_hat: None,
            coef: Vec::new(),
            theta_hat: Vec::new(),
            loocv_rmse: None,
            wall_time: None,
            error: None,
        }
    }

    pub fn failed(replication: usize, method: Method, kernel: &str, message: String) -> Self {
        ResultRow { error: Some(message), ..ResultRow::new(replication, method, kernel) }
    }

    pub fn is_failure(&self) -> bool {
        self.error.is_some()
    }

    fn record(&self) -> [String; 12] {
        [
            self.replication.to_string(),
            self.method.label().to_string(),
            self.kernel.clone(),
            opt(self.theta),
            opt(self.rmse),
            opt(self.interval_score),
            opt(self.mu_hat),
            join(&self.coef),
            join(&self.theta_hat),
            opt(self.loocv_rmse),
            opt(self.wall_time),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quartiles {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

/// Linearly interpolated sample quantile (type 7) of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quartiles {
    /// `None` when no finite value is present.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        Some(Quartiles { count: v.len(), median: quantile(&v, 0.5), q1, q3, iqr: q3 - q1 })
    }
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    Quartiles::of(values).map(|q| q.median)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub method: String,
    pub kernel: String,
    pub theta: Option<f64>,
    pub rows: usize,
    pub failures: usize,
    pub rmse: Option<Quartiles>,
    pub interval_score: Option<Quartiles>,
    pub mu_hat: Option<Quartiles>,
    pub coef: Vec<Option<Quartiles>>,
    pub loocv_rmse: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub function: String,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Reference value for `mu_hat` (true mean) or `coef` where known.
    pub reference: Option<Reference>,
    pub failures: usize,
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub mu_star: Option<f64>,
    pub coef_star: Vec<f64>,
}

/// Groups rows by (method, kernel, theta) in first-seen order.
pub fn summarize(cfg: &ExperimentConfig, rows: &[ResultRow], reference: Option<Reference>) -> Summary {
    let mut keys: Vec<(Method, String, Option<f64>)> = Vec::new();
    for r in rows {
        let key = (r.method, r.kernel.clone(), r.theta);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let groups = keys
        .into_iter()
        .map(|(method, kernel, theta)| {
            let members: Vec<&ResultRow> =
                rows.iter().filter(|r| r.method == method && r.kernel == kernel && r.theta == theta).collect();
            let ok: Vec<&&ResultRow> = members.iter().filter(|r| !r.is_failure()).collect();
            let n_coef = ok.iter().map(|r| r.coef.len()).max().unwrap_or(0);
            GroupSummary {
                method: method.label().to_string(),
                kernel,
                theta,
                rows: members.len(),
                failures: members.len() - ok.len(),
                rmse: Quartiles::of(ok.iter().filter_map(|r| r.rmse)),
                interval_score: Quartiles::of(ok.iter().filter_map(|r| r.interval_score)),
                mu_hat: Quartiles::of(ok.iter().filter_map(|r| r.mu_hat)),
                coef: (0..n_coef).map(|k| Quartiles::of(ok.iter().filter_map(|r| r.coef.get(k).copied()))).collect(),
                loocv_rmse: Quartiles::of(ok.iter().filter_map(|r| r.loocv_rmse)),
            }
        })
        .collect();
    Summary {
        experiment: cfg.experiment.as_str().to_string(),
        function: cfg.function.clone(),
        n: cfg.n,
        replications: cfg.replications,
        seed: cfg.seed,
        alpha: cfg.alpha,
        reference,
        failures: rows.iter().filter(|r| r.is_failure()).count(),
        groups,
    }
}
