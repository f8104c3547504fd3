use nalgebra::{DMatrix, DVector};

use super::c_estimate::{estimate_c_eigen, estimate_c_regularized_with, CEstimate};
use super::{is_constant, CMethod, FitOptions, Prediction, Standardizer, EPS_GUARD};
use crate::error::{Error, Result};
use crate::kernels::{corr_matrix, normalized_cross_corr, DataSet, KernelFamily, KernelSpec};
use crate::linalg::SpdFactor;
use crate::optimize::minimize_multistart;

/// GLS mean of the rational model: `c' diag(Rc) y / c'Rc`.
///
/// The weights `c_i (Rc)_i` are nonnegative whenever `c >= 0` and `R` is
/// entrywise positive, so the estimate is a convex combination of `y`.
pub fn gls_mean_rk(r: &DMatrix<f64>, c: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let n = r.nrows();
    if c.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len().min(y.len()) });
    }
    let rc = r * c;
    gls_mean_from_rc(c, &rc, y)
}

fn gls_mean_from_rc(c: &DVector<f64>, rc: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let w = c.component_mul(rc);
    let total = w.sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok(w.iter().zip(y.iter()).map(|(wi, yi)| (wi / total) * yi).sum())
}

/// `(y - mu 1)' diag(Rc) R^-1 diag(Rc) (y - mu 1) / (n - 1)`.
pub fn nu2_hat(r: &DMatrix<f64>, c: &DVector<f64>, y: &DVector<f64>, mu: f64) -> Result<f64> {
    let n = r.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if c.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len().min(y.len()) });
    }
    let factor = SpdFactor::new(r.clone())?;
    nu2_from_parts(&factor, &(r * c), y, mu)
}

fn nu2_from_parts(factor: &SpdFactor, rc: &DVector<f64>, y: &DVector<f64>, mu: f64) -> Result<f64> {
    let n = y.len();
    let z = y.map(|v| v - mu).component_mul(rc);
    Ok(factor.quad_form(&z)? / (n as f64 - 1.0))
}

/// Everything the rational model needs at one length-scale.
#[derive(Debug, Clone)]
struct RationalCore {
    factor: SpdFactor,
    estimate: CEstimate,
    rc: DVector<f64>,
    mu: f64,
    nu2: f64,
    objective: f64,
}

fn rational_core(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &FitOptions,
) -> Result<RationalCore> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let r = corr_matrix(spec, x)?;
    let factor = SpdFactor::new(r.clone())?;
    let estimate = match opts.c_method {
        CMethod::Regularized => estimate_c_regularized_with(&r, Some(&factor), &opts.regularization)?,
        CMethod::Eigenvector => {
            let c = estimate_c_eigen(&r)?;
            let lambda1 = c.dot(&(&r * &c));
            CEstimate { c, gamma: 0.0, delta: 0.0, lambda1 }
        }
    };
    let rc = &r * &estimate.c;
    if rc.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::ZeroWeight);
    }
    let mu = gls_mean_from_rc(&estimate.c, &rc, y)?;
    let nu2 = nu2_from_parts(&factor, &rc, y, mu)?;
    let ctrc = estimate.c.dot(&rc);
    let objective = (n as f64 - 1.0) * nu2.max(f64::MIN_POSITIVE).ln() + factor.log_det()
        - 2.0 * rc.iter().map(|v| v.ln()).sum::<f64>()
        + ctrc.ln();
    Ok(RationalCore { factor, estimate, rc, mu, nu2, objective })
}

/// Profile criterion minimized over the length-scales:
/// `(n-1) log nu2 + log|R| - 2 sum log (Rc)_i + log c'Rc`.
///
/// Returns `+inf` when the correlation matrix cannot be factored.
pub fn rk_profile_objective(
    theta: &[f64],
    data: &DataSet,
    family: KernelFamily,
    opts: &FitOptions,
) -> f64 {
    KernelSpec::new(family, theta.to_vec(), opts.nugget)
        .and_then(|spec| rational_core(&spec, data.x(), data.y(), opts))
        .map_or(f64::INFINITY, |core| core.objective)
}

/// Rational kriging model with estimated length-scales.
#[derive(Debug, Clone)]
pub struct FittedRK {
    spec: KernelSpec,
    data: DataSet,
    c_method: CMethod,
    c_hat: DVector<f64>,
    gamma_hat: f64,
    delta: f64,
    lambda1: f64,
    standardizer: Standardizer,
    /// In standardized units.
    mu_std: f64,
    nu2_std: f64,
    objective: f64,
    factor: SpdFactor,
    rc: DVector<f64>,
    /// `R^-1 diag(Rc) y` in standardized units.
    weights: DVector<f64>,
}

/// Fits the rational model, estimating `theta` by multi-start Nelder-Mead
/// on the profile criterion (over `log10 theta`).
pub fn fit_rk(data: &DataSet, family: KernelFamily, opts: &FitOptions) -> Result<FittedRK> {
    let standardizer = Standardizer::from_data(data.y());
    let ys = standardizer.apply(data.y());
    let p = data.p();
    let theta = if is_constant(data.y()) {
        vec![opts.optimizer.initial_theta; p]
    } else {
        let objective = |log_theta: &[f64]| {
            let theta: Vec<f64> = log_theta.iter().map(|v| 10f64.powf(*v)).collect();
            KernelSpec::new(family, theta, opts.nugget)
                .and_then(|spec| rational_core(&spec, data.x(), &ys, opts))
                .map_or(f64::INFINITY, |core| core.objective)
        };
        let best = minimize_multistart(objective, p, &opts.optimizer)?;
        best.x.iter().map(|v| 10f64.powf(*v)).collect()
    };
    let spec = KernelSpec::new(family, theta, opts.nugget)?;
    FittedRK::build(spec, data.clone(), standardizer, opts)
}

/// Rational model at fixed kernel parameters.
pub fn fit_rk_fixed(data: &DataSet, spec: &KernelSpec, opts: &FitOptions) -> Result<FittedRK> {
    FittedRK::build(spec.clone(), data.clone(), Standardizer::from_data(data.y()), opts)
}

impl FittedRK {
    fn build(
        spec: KernelSpec,
        data: DataSet,
        standardizer: Standardizer,
        opts: &FitOptions,
    ) -> Result<Self> {
        if spec.dim() != data.p() {
            return Err(Error::DimensionMismatch { expected: data.p(), got: spec.dim() });
        }
        let ys = standardizer.apply(data.y());
        let core = rational_core(&spec, data.x(), &ys, opts)?;
        let weights = core.factor.solve(&ys.component_mul(&core.rc))?;
        Ok(FittedRK {
            spec,
            data,
            c_method: opts.c_method,
            c_hat: core.estimate.c,
            gamma_hat: core.estimate.gamma,
            delta: core.estimate.delta,
            lambda1: core.estimate.lambda1,
            standardizer,
            mu_std: core.mu,
            nu2_std: core.nu2,
            objective: core.objective,
            factor: core.factor,
            rc: core.rc,
            weights,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn c_method(&self) -> CMethod {
        self.c_method
    }

    /// Coefficients `c`; invariant to the response scale.
    pub fn c_hat(&self) -> &DVector<f64> {
        &self.c_hat
    }

    /// Regularization weight; zero for the eigenvector method.
    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    /// Feasibility threshold `lambda1 / n`; zero for the eigenvector method.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn standardizer(&self) -> Standardizer {
        self.standardizer
    }

    /// GLS estimate of the mean in response units.
    pub fn mu(&self) -> f64 {
        self.standardizer.restore(self.mu_std)
    }

    /// Scale estimate `nu^2` in squared response units.
    pub fn nu2(&self) -> f64 {
        self.nu2_std * self.standardizer.scale.powi(2)
    }

    /// Posterior variance of the mean, `nu^2 / c'Rc`.
    pub fn mu_variance(&self) -> f64 {
        self.nu2() / self.c_hat.dot(&self.rc)
    }

    /// Profile criterion at the fitted length-scales (standardized responses).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// `R c`.
    pub fn rc(&self) -> &DVector<f64> {
        &self.rc
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let (r, log_max) = normalized_cross_corr(&self.spec, self.data.x(), x)?;
        let den = r.dot(&self.c_hat);
        if !(den > EPS_GUARD) {
            return Err(Error::DegenerateScale(den));
        }
        let mean_std = r.dot(&self.weights) / den;
        // The quadratic form needs the raw correlations; 1/(r'c) is
        // exp(-log_max)/den so the prior scale stays finite until exp overflows.
        let raw = &r * log_max.exp();
        let q = self.factor.quad_form(&raw)?;
        let inv_scale = (-log_max).exp() / den;
        let nu = self.nu2_std.sqrt();
        let sd_std = nu * (1.0 - q).max(0.0).sqrt() * inv_scale;
        let s = self.standardizer.scale;
        let pred = Prediction {
            mean: self.standardizer.restore(mean_std),
            sd: s * sd_std,
            sd_scale: s * nu * inv_scale,
        };
        Ok(pred.at_design_point(&self.data, x))
    }

    pub fn predict_many(&self, points: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        points.iter().map(|p| self.predict(p)).collect()
    }
}
