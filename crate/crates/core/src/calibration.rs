//! Discrepancy-model (KOH) calibration for simulators linear in the calibration
//! parameters, `f(x; eta) = eta'g(x)`, with a plain or rational GP
//! discrepancy and known observation noise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{corr_matrix, DataSet, KernelFamily, KernelSpec, DEFAULT_NUGGET};
use crate::krige::{estimate_c_regularized_with, CRegularization};
use crate::linalg::SpdFactor;
use crate::universal::{check_full_rank, gls_whitened, RegressionBasis};

pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Regula falsi steps allowed after the root is bracketed.
pub const FIXED_POINT_MAX_ITER: usize = 100;
/// Once `sigma^2 / variance` exceeds this the discrepancy has collapsed and
/// the estimate is taken at its limit, ordinary least squares.
pub const COLLAPSE_RATIO: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaMethod {
    Koh,
    RkKoh,
}

impl EtaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EtaMethod::Koh => "koh",
            EtaMethod::RkKoh => "rkkoh",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    /// Simulator basis `g`, so that `f(x; eta) = eta'g(x)`.
    pub basis: RegressionBasis,
    pub data: DataSet,
    /// Known observation noise sd.
    pub noise_sd: f64,
    pub family: KernelFamily,
    pub nugget: f64,
    pub regularization: CRegularization,
}

impl CalibrationProblem {
    pub fn new(basis: RegressionBasis, data: DataSet, noise_sd: f64, family: KernelFamily) -> Result<Self> {
        if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
            return Err(Error::InvalidInput(format!("noise sd must be finite and >= 0, got {noise_sd}")));
        }
        let problem = CalibrationProblem {
            basis,
            data,
            noise_sd,
            family,
            nugget: DEFAULT_NUGGET,
            regularization: CRegularization::default(),
        };
        check_full_rank(&problem.design_matrix())?;
        if problem.data.n() <= problem.basis.len() {
            return Err(Error::InsufficientData { needed: problem.basis.len() + 1, got: problem.data.n() });
        }
        Ok(problem)
    }

    pub fn with_nugget(mut self, nugget: f64) -> Self {
        self.nugget = nugget;
        self
    }

    /// `G` with rows `g(x_i)'`.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        self.basis.model_matrix(self.data.x())
    }

    fn spec(&self, theta: f64) -> Result<KernelSpec> {
        KernelSpec::new(self.family, vec![theta; self.data.p()], self.nugget)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub eta: DVector<f64>,
    /// Profiled discrepancy variance (`tau^2` or `nu^2`).
    pub variance: f64,
    pub iterations: usize,
}

/// GLS estimate of `eta` for a covariance proportional to `base + ratio I`,
/// with the scale profiled as `e'(base + ratio I)^-1 e / (n - q)`.
struct Gls {
    eta: DVector<f64>,
    variance: f64,
}

fn gls_under(base: &DMatrix<f64>, ratio: f64, g: &DMatrix<f64>, y: &DVector<f64>) -> Result<Gls> {
    let mut cov = base.clone();
    for i in 0..cov.nrows() {
        cov[(i, i)] += ratio;
    }
    let factor = SpdFactor::new(cov)?;
    let l = factor.l();
    let mut gw = g.clone();
    l.solve_lower_triangular_mut(&mut gw);
    let mut zw = y.clone();
    l.solve_lower_triangular_mut(&mut zw);
    let sol = gls_whitened(&gw, &zw)?;
    let dof = (g.nrows() - g.ncols()) as f64;
    Ok(Gls { eta: sol.beta, variance: sol.residual_quad / dof })
}

/// Solves the variance fixed point `t = phi(t)`, where `phi(t)` is the
/// profiled variance of the GLS fit under `base + (sigma^2/t) I`. The plain
/// iteration `t <- phi(t)` started from the noise-free variance decreases to
/// the largest fixed point below it; that root is located by scanning down in
/// decades and refined by regula falsi on `ln phi(t) - ln t`. With `sigma = 0`
/// a single GLS solve is exact.
fn fixed_point(problem: &CalibrationProblem, base: &DMatrix<f64>) -> Result<CalibrationFit> {
    let g = problem.design_matrix();
    let y = problem.data.y();
    let sigma2 = problem.noise_sd * problem.noise_sd;
    let start = gls_under(base, 0.0, &g, y)?;
    if sigma2 == 0.0 {
        return Ok(CalibrationFit { eta: start.eta, variance: start.variance, iterations: 1 });
    }
    if !(start.variance > 0.0) {
        return Err(Error::DegenerateScale(start.variance));
    }
    let evals = std::cell::Cell::new(0usize);
    let gap = |s: f64| -> Result<(f64, Gls)> {
        evals.set(evals.get() + 1);
        let fit = gls_under(base, sigma2 / s.exp(), &g, y)?;
        Ok((fit.variance.max(f64::MIN_POSITIVE).ln() - s, fit))
    };
    let collapse = (sigma2 / COLLAPSE_RATIO).ln();
    let mut hi = start.variance.ln();
    let (mut g_hi, fit_hi) = gap(hi)?;
    if g_hi >= 0.0 {
        return Ok(CalibrationFit { eta: fit_hi.eta, variance: fit_hi.variance, iterations: evals.get() });
    }
    let mut lo = hi;
    let mut g_lo = g_hi;
    while g_lo < 0.0 {
        hi = lo;
        g_hi = g_lo;
        lo -= std::f64::consts::LN_10;
        if lo < collapse {
            let ols = gls_whitened(&g, y)?;
            return Ok(CalibrationFit { eta: ols.beta, variance: 0.0, iterations: evals.get() });
        }
        g_lo = gap(lo)?.0;
    }
    // Illinois variant of regula falsi; stops once successive iterates agree
    let mut side = 0i8;
    let mut prev = f64::NAN;
    while evals.get() < FIXED_POINT_MAX_ITER + 40 {
        let s = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        let (gs, fit) = gap(s)?;
        if gs == 0.0 || (s - prev).abs() <= FIXED_POINT_TOL || (hi - lo) <= FIXED_POINT_TOL {
            return Ok(CalibrationFit { eta: fit.eta, variance: fit.variance, iterations: evals.get() });
        }
        prev = s;
        if gs > 0.0 {
            lo = s;
            g_lo = gs;
            if side == 1 {
                g_hi /= 2.0;
            }
            side = 1;
        } else {
            hi = s;
            g_hi = gs;
            if side == -1 {
                g_lo /= 2.0;
            }
            side = -1;
        }
    }
    Err(Error::NonConvergence { iterations: evals.get() })
}

/// KOH: GLS under `tau^2 R + sigma^2 I`.
pub fn fit_koh_linear(problem: &CalibrationProblem, theta: f64) -> Result<CalibrationFit> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("theta must be positive, got {theta}")));
    }
    let r = corr_matrix(&problem.spec(theta)?, problem.data.x())?;
    fixed_point(problem, &r)
}

/// RK-KOH: GLS under `nu^2 [D^-1 R D^-1 + (sigma^2/nu^2) I]` with `D = diag(Rc)`.
pub fn fit_rkkoh_linear(problem: &CalibrationProblem, theta: f64) -> Result<CalibrationFit> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("theta must be positive, got {theta}")));
    }
    let r = corr_matrix(&problem.spec(theta)?, problem.data.x())?;
    let factor = SpdFactor::new(r.clone())?;
    let est = estimate_c_regularized_with(&r, Some(&factor), &problem.regularization)?;
    let d = &r * &est.c;
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::ZeroWeight);
    }
    let base = DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] / (d[i] * d[j]));
    fixed_point(problem, &base)
}

pub fn fit_linear(problem: &CalibrationProblem, theta: f64, method: EtaMethod) -> Result<CalibrationFit> {
    match method {
        EtaMethod::Koh => fit_koh_linear(problem, theta),
        EtaMethod::RkKoh => fit_rkkoh_linear(problem, theta),
    }
}

/// `eta_hat` across a grid of length-scales. Column `j` belongs to
/// `theta_grid[j]`; failed fits leave a NaN column and an entry in `failures`.
#[derive(Debug, Clone)]
pub struct EtaProfile {
    pub theta_grid: Vec<f64>,
    pub eta_hat: DMatrix<f64>,
    pub method: EtaMethod,
    pub failures: Vec<(usize, Error)>,
}

impl EtaProfile {
    pub fn column(&self, j: usize) -> Option<DVector<f64>> {
        let col = self.eta_hat.column(j).into_owned();
        col.iter().all(|v| v.is_finite()).then_some(col)
    }
}

pub fn eta_profile(problem: &CalibrationProblem, theta_grid: &[f64], method: EtaMethod) -> Result<EtaProfile> {
    if theta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let q = problem.basis.len();
    let mut eta_hat = DMatrix::from_element(q, theta_grid.len(), f64::NAN);
    let mut failures = Vec::new();
    for (j, &theta) in theta_grid.iter().enumerate() {
        match fit_linear(problem, theta, method) {
            Ok(fit) => eta_hat.set_column(j, &fit.eta),
            Err(e) => failures.push((j, e)),
        }
    }
    Ok(EtaProfile { theta_grid: theta_grid.to_vec(), eta_hat, method, failures })
}
