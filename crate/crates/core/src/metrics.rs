//! Prediction-quality metrics: RMSE, interval score and leave-one-out
//! cross-validation.

use crate::error::{Error, Result};
use crate::kernels::DataSet;
use crate::krige::{fit_ok, fit_ok_fixed, fit_rk, fit_rk_fixed, FitOptions, FittedOK, FittedRK};
use crate::universal::{fit_uk, fit_uk_fixed, FittedUK};

pub const DEFAULT_ALPHA: f64 = 0.05;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), truths.len())?;
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Mean of `(u - l) + (2/alpha) [(l - t)_+ + (t - u)_+]`.
pub fn interval_score(lowers: &[f64], uppers: &[f64], truths: &[f64], alpha: f64) -> Result<f64> {
    check_lengths(lowers.len(), uppers.len())?;
    check_lengths(lowers.len(), truths.len())?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut total = 0.0;
    for ((l, u), t) in lowers.iter().zip(uppers).zip(truths) {
        if l > u {
            return Err(Error::InvalidInput(format!("crossed interval [{l}, {u}]")));
        }
        total += (u - l) + 2.0 / alpha * ((l - t).max(0.0) + (t - u).max(0.0));
    }
    Ok(total / lowers.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub rmse: f64,
    pub interval_score: f64,
    pub alpha: f64,
    pub n_test: usize,
}

impl MetricReport {
    pub fn new(means: &[f64], lowers: &[f64], uppers: &[f64], truths: &[f64], alpha: f64) -> Result<Self> {
        Ok(MetricReport {
            rmse: rmse(means, truths)?,
            interval_score: interval_score(lowers, uppers, truths, alpha)?,
            alpha,
            n_test: truths.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvReport {
    /// RMSE over the folds that succeeded.
    pub rmse: f64,
    pub n_folds: usize,
    pub failures: Vec<(usize, Error)>,
}

/// Generic leave-one-out loop: `fold(train, x_i)` predicts the held-out
/// response from the data without point `i`.
pub fn loocv_rmse<F>(data: &DataSet, fold: F) -> Result<LoocvReport>
where
    F: Fn(&DataSet, &[f64]) -> Result<f64>,
{
    let n = data.n();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let mut sse = 0.0;
    let mut ok = 0usize;
    let mut failures = Vec::new();
    for i in 0..n {
        let res = data.without(i).and_then(|train| fold(&train, &data.row(i)));
        match res {
            Ok(pred) => {
                sse += (pred - data.y()[i]).powi(2);
                ok += 1;
            }
            Err(e) => failures.push((i, e)),
        }
    }
    if ok == 0 {
        return Err(failures.swap_remove(0).1);
    }
    Ok(LoocvReport { rmse: (sse / ok as f64).sqrt(), n_folds: n, failures })
}

/// LOOCV for ordinary kriging; with `refit` unset the length-scales stay at
/// the full-data estimate.
pub fn loocv_ok(fit: &FittedOK, refit: bool, opts: &FitOptions) -> Result<LoocvReport> {
    let spec = fit.spec().clone();
    loocv_rmse(fit.data(), |train, x| {
        let model = if refit { fit_ok(train, spec.family(), opts)? } else { fit_ok_fixed(train, &spec)? };
        Ok(model.predict(x)?.mean)
    })
}

/// LOOCV for rational kriging; `c` is always re-derived on the reduced data.
pub fn loocv_rk(fit: &FittedRK, refit: bool, opts: &FitOptions) -> Result<LoocvReport> {
    let spec = fit.spec().clone();
    let opts = FitOptions { c_method: fit.c_method(), ..opts.clone() };
    loocv_rmse(fit.data(), |train, x| {
        let model = if refit { fit_rk(train, spec.family(), &opts)? } else { fit_rk_fixed(train, &spec, &opts)? };
        Ok(model.predict(x)?.mean)
    })
}

pub fn loocv_uk(fit: &FittedUK, refit: bool, opts: &FitOptions) -> Result<LoocvReport> {
    let spec = fit.spec().clone();
    loocv_rmse(fit.data(), |train, x| {
        let model = if refit {
            fit_uk(train, fit.basis(), spec.family(), fit.variant(), opts)?
        } else {
            fit_uk_fixed(train, fit.basis(), &spec, fit.variant(), opts)?
        };
        Ok(model.predict(x)?.mean)
    })
}
