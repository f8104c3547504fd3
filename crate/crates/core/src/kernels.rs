//! Stationary correlation functions and the matrices built from them.
//!
//! All families are evaluated per coordinate with length-scales `theta_i`
//! and satisfy `corr(u, u) = 1`. The nugget only ever touches the diagonal
//! of [`corr_matrix`]; cross-correlation vectors are nugget free.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default diagonal inflation applied to correlation matrices.
pub const DEFAULT_NUGGET: f64 = 1e-6;
/// Largest nugget accepted by [`KernelSpec`].
pub const MAX_NUGGET: f64 = 1e-2;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `exp(-sum (h_i/theta_i)^2)`
    Gaussian,
    /// `(1 + sum (h_i/theta_i)^2)^-1`, also called the Cauchy kernel.
    RationalQuadratic,
    /// Product of `(1 + sqrt(3)|h_i|/theta_i) exp(-sqrt(3)|h_i|/theta_i)`.
    Matern32,
    /// `exp(-sum |h_i|/theta_i)`
    Exponential,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Gaussian,
        KernelFamily::RationalQuadratic,
        KernelFamily::Matern32,
        KernelFamily::Exponential,
    ];

    /// Short name used on the command line and in result files.
    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::RationalQuadratic => "rq",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Exponential => "exp",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => Ok(KernelFamily::Gaussian),
            "rq" | "rational_quadratic" | "rational-quadratic" | "cauchy" => {
                Ok(KernelFamily::RationalQuadratic)
            }
            "matern32" | "matern3_2" | "matern" => Ok(KernelFamily::Matern32),
            "exp" | "exponential" => Ok(KernelFamily::Exponential),
            other => Err(Error::InvalidInput(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Correlation family together with its per-dimension length-scales and nugget.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscales: Vec<f64>,
    nugget: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, nugget: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidInput("at least one length-scale is required".into()));
        }
        if lengthscales.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "length-scales must be finite and positive, got {lengthscales:?}"
            )));
        }
        if !(0.0..=MAX_NUGGET).contains(&nugget) {
            return Err(Error::InvalidInput(format!(
                "nugget must lie in [0, {MAX_NUGGET}], got {nugget}"
            )));
        }
        Ok(KernelSpec { family, lengthscales, nugget })
    }

    /// Isotropic spec with the default nugget.
    pub fn isotropic(family: KernelFamily, theta: f64, dim: usize) -> Result<Self> {
        Self::new(family, vec![theta; dim], DEFAULT_NUGGET)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn with_lengthscales(&self, lengthscales: Vec<f64>) -> Result<Self> {
        Self::new(self.family, lengthscales, self.nugget)
    }

    pub fn with_nugget(&self, nugget: f64) -> Result<Self> {
        Self::new(self.family, self.lengthscales.clone(), nugget)
    }

    /// Weights of the equivalent weighted norm `||h||_w^2 = sum w_i h_i^2`,
    /// normalized to sum to one (`w_i` proportional to `theta_i^-2`).
    pub fn norm_weights(&self) -> Vec<f64> {
        let inv: Vec<f64> = self.lengthscales.iter().map(|t| 1.0 / (t * t)).collect();
        let total: f64 = inv.iter().sum();
        inv.into_iter().map(|v| v / total).collect()
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input point"));
        }
        Ok(())
    }

    /// Correlation from the per-coordinate differences `h = u - v`.
    fn corr_lag<I: Iterator<Item = f64>>(&self, lags: I) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.scaled_sq(lags)).exp(),
            KernelFamily::RationalQuadratic => 1.0 / (1.0 + self.scaled_sq(lags)),
            KernelFamily::Matern32 => lags
                .zip(&self.lengthscales)
                .map(|(h, t)| {
                    let a = SQRT_3 * h.abs() / t;
                    (1.0 + a) * (-a).exp()
                })
                .product(),
            KernelFamily::Exponential => {
                let s: f64 = lags.zip(&self.lengthscales).map(|(h, t)| h.abs() / t).sum();
                (-s).exp()
            }
        }
    }

    /// Natural log of the correlation; finite even where the correlation underflows.
    fn log_corr_lag<I: Iterator<Item = f64>>(&self, lags: I) -> f64 {
        match self.family {
            KernelFamily::Gaussian => -self.scaled_sq(lags),
            KernelFamily::RationalQuadratic => -self.scaled_sq(lags).ln_1p(),
            KernelFamily::Matern32 => lags
                .zip(&self.lengthscales)
                .map(|(h, t)| {
                    let a = SQRT_3 * h.abs() / t;
                    a.ln_1p() - a
                })
                .sum(),
            KernelFamily::Exponential => {
                -lags.zip(&self.lengthscales).map(|(h, t)| h.abs() / t).sum::<f64>()
            }
        }
    }

    fn scaled_sq<I: Iterator<Item = f64>>(&self, lags: I) -> f64 {
        lags.zip(&self.lengthscales)
            .map(|(h, t)| {
                let s = h / t;
                s * s
            })
            .sum()
    }
}

/// Training design `x` (n x p, coordinates in the unit cube) and responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl DataSet {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if p == 0 {
            return Err(Error::InvalidInput("design has zero columns".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("design coordinates must lie in [0, 1]".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (0..p).all(|k| x[(i, k)] == x[(j, k)]) {
                    return Err(Error::InvalidInput(format!("design rows {j} and {i} coincide")));
                }
            }
        }
        Ok(DataSet { x, y })
    }

    /// Builds a data set from row-major points.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged design rows".into()));
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(x, DVector::from_vec(y))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// The data set with observation `i` removed.
    /// Index of the design point equal to `point`, if any.
    pub fn position(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.p() {
            return None;
        }
        (0..self.n()).find(|&i| self.x.row(i).iter().zip(point).all(|(a, b)| a == b))
    }

    pub fn without(&self, i: usize) -> Result<Self> {
        let x = self.x.clone().remove_row(i);
        let y = self.y.clone().remove_row(i);
        Self::new(x, y)
    }

    /// Same design with new responses.
    pub fn with_y(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        Ok(DataSet { x: self.x.clone(), y })
    }
}

/// `R(u - v)` for the chosen family.
pub fn corr(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    spec.check_point(u)?;
    spec.check_point(v)?;
    Ok(spec.corr_lag(u.iter().zip(v).map(|(a, b)| a - b)))
}

/// `ln R(u - v)`.
pub fn log_corr(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    spec.check_point(u)?;
    spec.check_point(v)?;
    Ok(spec.log_corr_lag(u.iter().zip(v).map(|(a, b)| a - b)))
}

fn check_design(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: x.ncols() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design"));
    }
    Ok(())
}

/// Correlation matrix of the design with the nugget added to the diagonal.
pub fn corr_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_design(spec, x)?;
    let n = x.nrows();
    let p = x.ncols();
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = 1.0 + spec.nugget;
        for i in (j + 1)..n {
            let v = spec.corr_lag((0..p).map(|k| x[(i, k)] - x[(j, k)]));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// `r(x)_i = R(x - x_i)` without nugget.
pub fn cross_corr(spec: &KernelSpec, x: &DMatrix<f64>, point: &[f64]) -> Result<DVector<f64>> {
    check_design(spec, x)?;
    spec.check_point(point)?;
    let p = x.ncols();
    Ok(DVector::from_fn(x.nrows(), |i, _| {
        spec.corr_lag((0..p).map(|k| point[k] - x[(i, k)]))
    }))
}

/// Entrywise `ln r(x)`.
pub fn log_cross_corr(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    point: &[f64],
) -> Result<DVector<f64>> {
    check_design(spec, x)?;
    spec.check_point(point)?;
    let p = x.ncols();
    Ok(DVector::from_fn(x.nrows(), |i, _| {
        spec.log_corr_lag((0..p).map(|k| point[k] - x[(i, k)]))
    }))
}

/// Cross-correlations rescaled so the largest entry is one.
///
/// Returns the rescaled vector `r / exp(m)` together with `m = max ln r_i`.
/// Ratios of linear forms in `r(x)` are invariant to this rescaling, which
/// keeps rational predictors well defined where every raw correlation
/// underflows.
pub fn normalized_cross_corr(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    point: &[f64],
) -> Result<(DVector<f64>, f64)> {
    let log_r = log_cross_corr(spec, x, point)?;
    let m = log_r.max();
    Ok((log_r.map(|l| (l - m).exp()), m))
}
