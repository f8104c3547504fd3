//! Replicated simulation studies.
//!
//! Every replication draws its design from its own ChaCha8 stream (see
//! [`crate::design`]) and fits every requested (kernel, method) pair. Models
//! work in unit-cube coordinates, so `theta_hat` is reported on that scale.
//! Test sets are shared by all replications: the equispaced grid for 1-D
//! functions, `grid` uniform draws from [`TEST_STREAM`] otherwise.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use ratkrig::calibration::{fit_linear, CalibrationProblem, EtaMethod};
use ratkrig::krige::{fit_ok, fit_rk, predict_idw, FitOptions, FittedOK, LimitKriging};
use ratkrig::metrics::{interval_score, loocv_ok, loocv_rk, loocv_uk, rmse};
use ratkrig::optimize::OptimizerConfig;
use ratkrig::testfns::{linear_projection_1d, true_mean, MeanConfig, Registry, TestFunction};
use ratkrig::universal::{fit_uk, BasisTerm};
use ratkrig::{DataSet, KernelFamily, Prediction, RegressionBasis, UkVariant};

use crate::config::{ExperimentConfig, ExperimentKind, Method};
use crate::design::{design_equispaced, design_rescale_endpoints, design_uniform_from, stream_rng, TEST_STREAM};
use crate::error::HarnessError;
use crate::results::{csv_string, summarize, Reference, ResultRow, Summary};

/// Kernel label for kernel-free methods.
pub const NO_KERNEL: &str = "none";

/// Upper end of the calibration study's input range.
const CALIBRATION_UPPER: f64 = 0.8;

/// The calibration study's data-generating process `4x + x sin(5x)`.
pub fn calibration_truth(x: f64) -> f64 {
    4.0 * x + x * (5.0 * x).sin()
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.is_failure()).count()
    }

    pub fn csv(&self) -> Result<String, HarnessError> {
        csv_string(&self.rows)
    }

    /// Writes `<out>` (CSV) and `<out>` with extension `summary.json`.
    pub fn write(&self, out: &std::path::Path) -> Result<Vec<PathBuf>, HarnessError> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(out, self.csv()?)?;
        let summary_path = out.with_extension("summary.json");
        std::fs::write(&summary_path, serde_json::to_string_pretty(&self.summary)?)?;
        Ok(vec![out.to_path_buf(), summary_path])
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    run_experiment_with(cfg, &Registry::builtin())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, registry: &Registry) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate(registry)?;
    let (rows, reference) = if cfg.experiment == ExperimentKind::Calibration {
        (replicate(cfg, |rep| calibration_replication(cfg, rep))?, None)
    } else {
        let study = SurrogateStudy::new(cfg, registry.get(&cfg.function)?)?;
        let reference = study.reference()?;
        (replicate(cfg, |rep| study.replication(rep))?, Some(reference))
    };
    let summary = summarize(cfg, &rows, reference);
    Ok(ExperimentOutput { rows, summary })
}

/// Runs `f` for every replication and concatenates in replication order.
fn replicate<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<ResultRow>, HarnessError>
where
    F: Fn(usize) -> Vec<ResultRow> + Sync,
{
    let reps = cfg.replications;
    let nested: Vec<Vec<ResultRow>> = match cfg.threads {
        Some(1) => (0..reps).map(&f).collect(),
        Some(t) if t > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?
            .install(|| (0..reps).into_par_iter().map(&f).collect()),
        _ => (0..reps).into_par_iter().map(&f).collect(),
    };
    Ok(nested.into_iter().flatten().collect())
}

fn fit_options(cfg: &ExperimentConfig, rep: usize) -> FitOptions {
    FitOptions {
        nugget: cfg.nugget,
        optimizer: OptimizerConfig { seed: cfg.seed.wrapping_add(rep as u64), ..Default::default() },
        ..Default::default()
    }
}

fn z_quantile(alpha: f64) -> f64 {
    StdNormal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - alpha / 2.0)
}

struct SurrogateStudy<'a> {
    cfg: &'a ExperimentConfig,
    tf: &'a TestFunction,
    test_x: Vec<Vec<f64>>,
    truth: Vec<f64>,
    z: f64,
}

impl<'a> SurrogateStudy<'a> {
    fn new(cfg: &'a ExperimentConfig, tf: &'a TestFunction) -> Result<Self, HarnessError> {
        let p = tf.dim();
        let test_x: Vec<Vec<f64>> = if p == 1 {
            design_equispaced(cfg.grid, 0.0, 1.0)?.into_iter().map(|v| vec![v]).collect()
        } else {
            let m = design_uniform_from(&mut stream_rng(cfg.seed, TEST_STREAM), cfg.grid, p);
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let truth = test_x.iter().map(|u| tf.eval_unit(u)).collect::<ratkrig::Result<Vec<_>>>()?;
        Ok(SurrogateStudy { cfg, tf, test_x, truth, z: z_quantile(cfg.alpha) })
    }

    fn reference(&self) -> Result<Reference, HarnessError> {
        let mu_star = true_mean(self.tf, &MeanConfig::default())?.value;
        let universal = self.cfg.methods.iter().any(|m| matches!(m, Method::Uk | Method::Urk));
        let coef_star = if universal && self.tf.dim() == 1 {
            let (b0, b1) = linear_projection_1d(self.tf, 1e-10)?;
            vec![b0, b1]
        } else {
            Vec::new()
        };
        Ok(Reference { mu_star: Some(mu_star), coef_star })
    }

    fn design(&self, rep: usize) -> Result<DataSet, HarnessError> {
        let p = self.tf.dim();
        let mut x = design_uniform_from(&mut stream_rng(self.cfg.seed, rep as u64), self.cfg.n, p);
        if p == 1 && self.cfg.rescale {
            let col: Vec<f64> = x.column(0).iter().copied().collect();
            x = DMatrix::from_vec(self.cfg.n, 1, design_rescale_endpoints(&col)?);
        }
        let y = (0..x.nrows())
            .map(|i| self.tf.eval_unit(&x.row(i).iter().copied().collect::<Vec<_>>()))
            .collect::<ratkrig::Result<Vec<_>>>()?;
        Ok(DataSet::new(x, y.into())?)
    }

    fn pairs(&self) -> Vec<(Method, Option<KernelFamily>)> {
        let mut out = Vec::new();
        for k in &self.cfg.kernels {
            for m in self.cfg.methods.iter().filter(|m| m.uses_kernel()) {
                out.push((*m, Some(*k)));
            }
        }
        if self.cfg.methods.contains(&Method::Idw) {
            out.push((Method::Idw, None));
        }
        out
    }

    fn replication(&self, rep: usize) -> Vec<ResultRow> {
        let pairs = self.pairs();
        let label = |k: Option<KernelFamily>| k.map_or(NO_KERNEL, KernelFamily::as_str);
        let data = match self.design(rep) {
            Ok(d) => d,
            Err(e) => {
                return pairs.into_iter().map(|(m, k)| ResultRow::failed(rep, m, label(k), e.to_string())).collect();
            }
        };
        let opts = fit_options(self.cfg, rep);
        let mut ok_cache: Vec<(KernelFamily, FittedOK)> = Vec::new();
        pairs
            .into_iter()
            .map(|(method, kernel)| {
                let start = Instant::now();
                let mut row = match self.fit_one(&data, method, kernel, rep, &opts, &mut ok_cache) {
                    Ok(row) => row,
                    Err(e) => ResultRow::failed(rep, method, label(kernel), e.to_string()),
                };
                if self.cfg.timing {
                    row.wall_time = Some(start.elapsed().as_secs_f64());
                }
                row
            })
            .collect()
    }

    fn scores(&self, preds: &[Prediction], row: &mut ResultRow) -> Result<(), HarnessError> {
        let means: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        let (lo, hi): (Vec<f64>, Vec<f64>) = preds.iter().map(|p| p.interval(self.z)).unzip();
        row.rmse = Some(rmse(&means, &self.truth)?);
        row.interval_score = Some(interval_score(&lo, &hi, &self.truth, self.cfg.alpha)?);
        Ok(())
    }

    fn fit_one(
        &self,
        data: &DataSet,
        method: Method,
        kernel: Option<KernelFamily>,
        rep: usize,
        opts: &FitOptions,
        ok_cache: &mut Vec<(KernelFamily, FittedOK)>,
    ) -> Result<ResultRow, HarnessError> {
        let mut row = ResultRow::new(rep, method, kernel.map_or(NO_KERNEL, KernelFamily::as_str));
        let refit = self.cfg.loocv_refit;
        match (method, kernel) {
            (Method::Idw, _) => {
                let w = vec![1.0; data.p()];
                let means =
                    self.test_x.iter().map(|x| predict_idw(data, &w, x)).collect::<ratkrig::Result<Vec<_>>>()?;
                row.rmse = Some(rmse(&means, &self.truth)?);
            }
            (Method::Ok, Some(k)) => {
                let fit = cached_ok(data, k, opts, ok_cache)?;
                self.scores(&fit.predict_many(&self.test_x)?, &mut row)?;
                row.mu_hat = Some(fit.mu());
                row.theta_hat = fit.spec().lengthscales().to_vec();
                if self.cfg.loocv {
                    row.loocv_rmse = Some(loocv_ok(&fit, refit, opts)?.rmse);
                }
            }
            (Method::Limit, Some(k)) => {
                let fit = cached_ok(data, k, opts, ok_cache)?;
                let lk = LimitKriging::new(data, fit.spec())?;
                let means = self.test_x.iter().map(|x| lk.predict(x)).collect::<ratkrig::Result<Vec<_>>>()?;
                row.rmse = Some(rmse(&means, &self.truth)?);
                row.theta_hat = fit.spec().lengthscales().to_vec();
            }
            (Method::Rk, Some(k)) => {
                let fit = fit_rk(data, k, opts)?;
                self.scores(&fit.predict_many(&self.test_x)?, &mut row)?;
                row.mu_hat = Some(fit.mu());
                row.theta_hat = fit.spec().lengthscales().to_vec();
                if self.cfg.loocv {
                    row.loocv_rmse = Some(loocv_rk(&fit, refit, opts)?.rmse);
                }
            }
            (Method::Uk | Method::Urk, Some(k)) => {
                let variant = if method == Method::Uk { UkVariant::Plain } else { UkVariant::Rational };
                let fit = fit_uk(data, &RegressionBasis::centered_linear(data.p()), k, variant, opts)?;
                self.scores(&fit.predict_many(&self.test_x)?, &mut row)?;
                row.coef = fit.beta().iter().copied().collect();
                row.theta_hat = fit.spec().lengthscales().to_vec();
                if self.cfg.loocv {
                    row.loocv_rmse = Some(loocv_uk(&fit, refit, opts)?.rmse);
                }
            }
            (m, _) => return Err(HarnessError::InvalidConfig(format!("method {m} is not a surrogate method"))),
        }
        let numbers = [row.rmse, row.interval_score, row.mu_hat, row.loocv_rmse];
        let all_finite = numbers.iter().flatten().chain(&row.coef).chain(&row.theta_hat).all(|v| v.is_finite());
        if !all_finite {
            row.error = Some("non-finite result".into());
        }
        Ok(row)
    }
}

fn cached_ok(
    data: &DataSet,
    k: KernelFamily,
    opts: &FitOptions,
    cache: &mut Vec<(KernelFamily, FittedOK)>,
) -> Result<FittedOK, HarnessError> {
    if let Some((_, fit)) = cache.iter().find(|(f, _)| *f == k) {
        return Ok(fit.clone());
    }
    let fit = fit_ok(data, k, opts)?;
    cache.push((k, fit.clone()));
    Ok(fit)
}

/// Noisy observations of [`calibration_truth`] at `n` equispaced inputs on `[0, 0.8]`.
pub fn calibration_data(n: usize, noise_sd: f64, seed: u64, rep: usize) -> Result<DataSet, HarnessError> {
    let xs = design_equispaced(n, 0.0, CALIBRATION_UPPER)?;
    let noise = Normal::new(0.0, noise_sd).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let mut rng = stream_rng(seed, rep as u64);
    let y: Vec<f64> = xs.iter().map(|x| calibration_truth(*x) + noise.sample(&mut rng)).collect();
    let rows: Vec<Vec<f64>> = xs.into_iter().map(|x| vec![x]).collect();
    Ok(DataSet::from_rows(&rows, y)?)
}

/// Simulator `f(x; eta) = eta x`.
pub fn calibration_basis() -> RegressionBasis {
    RegressionBasis::new(vec![BasisTerm::Linear { coord: 0, center: 0.0 }]).expect("non-empty basis")
}

fn calibration_replication(cfg: &ExperimentConfig, rep: usize) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let data = calibration_data(cfg.n, cfg.noise_sd, cfg.seed, rep);
    for kernel in &cfg.kernels {
        let problem = data.as_ref().map_err(|e| e.to_string()).and_then(|d| {
            CalibrationProblem::new(calibration_basis(), d.clone(), cfg.noise_sd, *kernel)
                .map(|p| p.with_nugget(cfg.nugget))
                .map_err(|e| e.to_string())
        });
        for method in &cfg.methods {
            let eta_method = if *method == Method::Koh { EtaMethod::Koh } else { EtaMethod::RkKoh };
            for theta in &cfg.theta_grid {
                let start = Instant::now();
                let mut row = ResultRow::new(rep, *method, kernel.as_str());
                row.theta = Some(*theta);
                match problem.as_ref().map_err(Clone::clone).and_then(|p| {
                    fit_linear(p, *theta, eta_method).map_err(|e| e.to_string())
                }) {
                    Ok(fit) => {
                        row.coef = fit.eta.iter().copied().collect();
                        if row.coef.iter().any(|v| !v.is_finite()) {
                            row.error = Some("non-finite result".into());
                        }
                    }
                    Err(e) => row.error = Some(e),
                }
                if cfg.timing {
                    row.wall_time = Some(start.elapsed().as_secs_f64());
                }
                rows.push(row);
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_quantile_is_standard() {
        assert!((z_quantile(0.05) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn calibration_data_is_deterministic() {
        let a = calibration_data(17, 0.02, 3, 1).unwrap();
        let b = calibration_data(17, 0.02, 3, 1).unwrap();
        assert_eq!(a.y(), b.y());
        assert_eq!(a.row(16), vec![0.8]);
        let clean = calibration_data(5, 0.0, 3, 1).unwrap();
        assert_eq!(clean.y()[4], calibration_truth(0.8));
    }
}
