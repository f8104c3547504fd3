//! Universal kriging `y(x) = beta'f(x) + scale(x) Z(x)` and its rational
//! variant, where the scale is `nu / r(x)'c` instead of a constant.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{corr_matrix, normalized_cross_corr, DataSet, KernelFamily, KernelSpec};
use crate::krige::{
    estimate_c_eigen, estimate_c_regularized_with, CMethod, FitOptions, Prediction, EPS_GUARD,
};
use crate::linalg::SpdFactor;
use crate::optimize::minimize_multistart;

/// Relative pivot threshold for the rank check of `F'F`.
pub const RANK_TOL: f64 = 1e-10;

type BasisFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BasisTerm {
    Constant,
    /// `x_k - center`
    Linear { coord: usize, center: f64 },
    Custom { name: String, f: BasisFn },
}

impl BasisTerm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BasisTerm::Constant => 1.0,
            BasisTerm::Linear { coord, center } => x[*coord] - center,
            BasisTerm::Custom { f, .. } => f(x),
        }
    }

    pub fn name(&self) -> String {
        match self {
            BasisTerm::Constant => "1".to_string(),
            BasisTerm::Linear { coord, center } => format!("x{coord}-{center}"),
            BasisTerm::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for BasisTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Ordered regression functions `f_0, ..., f_m`.
#[derive(Debug, Clone)]
pub struct RegressionBasis {
    terms: Vec<BasisTerm>,
}

impl RegressionBasis {
    pub fn new(terms: Vec<BasisTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("regression basis is empty".into()));
        }
        Ok(RegressionBasis { terms })
    }

    /// `{1}`.
    pub fn constant() -> Self {
        RegressionBasis { terms: vec![BasisTerm::Constant] }
    }

    /// `{1, x_1 - 0.5, ..., x_p - 0.5}`.
    pub fn centered_linear(p: usize) -> Self {
        let mut terms = vec![BasisTerm::Constant];
        terms.extend((0..p).map(|coord| BasisTerm::Linear { coord, center: 0.5 }));
        RegressionBasis { terms }
    }

    /// Appends a user-supplied function.
    pub fn with_fn<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.terms.push(BasisTerm::Custom { name: name.to_string(), f: Arc::new(f) });
        self
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    /// Number of functions, `m + 1`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.terms.len(), self.terms.iter().map(|t| t.eval(x)))
    }

    /// Model matrix `F` (n x (m+1)).
    pub fn model_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
        DMatrix::from_fn(x.nrows(), self.terms.len(), |i, j| self.terms[j].eval(&rows[i]))
    }

    fn check_coords(&self, p: usize) -> Result<()> {
        for t in &self.terms {
            if let BasisTerm::Linear { coord, .. } = t {
                if *coord >= p {
                    return Err(Error::DimensionMismatch { expected: p, got: coord + 1 });
                }
            }
        }
        Ok(())
    }
}

/// Fails with [`Error::RankDeficientBasis`] unless `F` has full column rank.
pub fn check_full_rank(f: &DMatrix<f64>) -> Result<()> {
    if f.nrows() < f.ncols() {
        return Err(Error::RankDeficientBasis);
    }
    let ftf = f.tr_mul(f);
    let scale = ftf.diagonal().max();
    if !(scale > 0.0) {
        return Err(Error::RankDeficientBasis);
    }
    let l = SpdFactor::new(ftf).map_err(|_| Error::RankDeficientBasis)?.l();
    if l.diagonal().iter().any(|d| d * d < RANK_TOL * scale) {
        return Err(Error::RankDeficientBasis);
    }
    Ok(())
}

/// Generalized least squares in whitened coordinates: with `W` a square
/// root of `Sigma^-1`, `g = W F` and `z = W y`.
#[derive(Debug, Clone)]
pub struct GlsSolution {
    pub beta: DVector<f64>,
    /// Factor of `F'Sigma^-1 F = g'g`.
    pub information: SpdFactor,
    /// `(y - F beta)' Sigma^-1 (y - F beta)`.
    pub residual_quad: f64,
}

pub fn gls_whitened(g: &DMatrix<f64>, z: &DVector<f64>) -> Result<GlsSolution> {
    let information = SpdFactor::new(g.tr_mul(g)).map_err(|_| Error::RankDeficientBasis)?;
    let beta = information.solve(&g.tr_mul(z))?;
    let residual_quad = (z - g * &beta).norm_squared();
    Ok(GlsSolution { beta, information, residual_quad })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UkVariant {
    Plain,
    Rational,
}

impl UkVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            UkVariant::Plain => "uk",
            UkVariant::Rational => "urk",
        }
    }
}

/// Which posterior mean [`FittedUK::predict`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanForm {
    /// `f(x)'beta` plus the kriging correction of the GLS residuals.
    #[default]
    Blup,
    /// `f(x)'beta` alone.
    RegressionOnly,
}

struct UniversalCore {
    factor: SpdFactor,
    c_hat: Option<DVector<f64>>,
    gamma_hat: Option<f64>,
    /// `Rc` for the rational variant, ones for the plain one.
    d: DVector<f64>,
    gls: GlsSolution,
    nu2: f64,
    objective: f64,
}

fn universal_core(
    spec: &KernelSpec,
    x: &DMatrix<f64>,
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    variant: UkVariant,
    opts: &FitOptions,
) -> Result<UniversalCore> {
    let n = x.nrows();
    let q = f.ncols();
    let r = corr_matrix(spec, x)?;
    let factor = SpdFactor::new(r.clone())?;
    let (c_hat, gamma_hat, d) = match variant {
        UkVariant::Plain => (None, None, DVector::from_element(n, 1.0)),
        UkVariant::Rational => {
            let (c, gamma) = match opts.c_method {
                CMethod::Regularized => {
                    let est = estimate_c_regularized_with(&r, Some(&factor), &opts.regularization)?;
                    (est.c, est.gamma)
                }
                CMethod::Eigenvector => (estimate_c_eigen(&r)?, 0.0),
            };
            let d = &r * &c;
            if d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::ZeroWeight);
            }
            (Some(c), Some(gamma), d)
        }
    };
    // Sigma^-1 = D R^-1 D, so W = L^-1 D whitens it.
    let mut g = f.clone();
    for (i, di) in d.iter().enumerate() {
        g.row_mut(i).scale_mut(*di);
    }
    let lower = factor.l();
    lower.solve_lower_triangular_mut(&mut g);
    let mut z = y.component_mul(&d);
    lower.solve_lower_triangular_mut(&mut z);
    let gls = gls_whitened(&g, &z)?;
    let dof = (n - q) as f64;
    let nu2 = gls.residual_quad / dof;
    let objective = dof * nu2.max(f64::MIN_POSITIVE).ln() + factor.log_det()
        - 2.0 * d.iter().map(|v| v.ln()).sum::<f64>()
        + gls.information.log_det();
    Ok(UniversalCore { factor, c_hat, gamma_hat, d, gls, nu2, objective })
}

/// Empirical-Bayes criterion `(n-m-1) log nu2 + log|R| - 2 sum log (Rc)_i + log|F'Sigma^-1 F|`
/// (the `Rc` term vanishes for the plain variant). `+inf` on failure.
pub fn uk_profile_objective(
    theta: &[f64],
    data: &DataSet,
    basis: &RegressionBasis,
    family: KernelFamily,
    variant: UkVariant,
    opts: &FitOptions,
) -> f64 {
    let f = basis.model_matrix(data.x());
    KernelSpec::new(family, theta.to_vec(), opts.nugget)
        .and_then(|spec| universal_core(&spec, data.x(), &f, data.y(), variant, opts))
        .map_or(f64::INFINITY, |core| core.objective)
}

/// Universal kriging model (plain or rational).
#[derive(Debug, Clone)]
pub struct FittedUK {
    basis: RegressionBasis,
    variant: UkVariant,
    mean_form: MeanForm,
    spec: KernelSpec,
    data: DataSet,
    /// Responses are divided by this before fitting.
    scale: f64,
    beta_std: DVector<f64>,
    nu2_std: f64,
    c_hat: Option<DVector<f64>>,
    gamma_hat: Option<f64>,
    objective: f64,
    factor: SpdFactor,
    information: SpdFactor,
    /// `F' D`, the rows of the correction term in `h(x)`.
    ftd: DMatrix<f64>,
    /// `R^-1 D (y - F beta)` in standardized units.
    weights: DVector<f64>,
}

fn validate(data: &DataSet, basis: &RegressionBasis) -> Result<DMatrix<f64>> {
    basis.check_coords(data.p())?;
    let needed = basis.len() + 2;
    if data.n() < needed {
        return Err(Error::InsufficientData { needed, got: data.n() });
    }
    let f = basis.model_matrix(data.x());
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model matrix"));
    }
    check_full_rank(&f)?;
    Ok(f)
}

fn response_scale(y: &DVector<f64>) -> f64 {
    let s = y.amax();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Fits a universal model with length-scales chosen by empirical Bayes.
pub fn fit_uk(
    data: &DataSet,
    basis: &RegressionBasis,
    family: KernelFamily,
    variant: UkVariant,
    opts: &FitOptions,
) -> Result<FittedUK> {
    let f = validate(data, basis)?;
    let scale = response_scale(data.y());
    let ys = data.y() / scale;
    let p = data.p();
    let objective = |log_theta: &[f64]| {
        let theta: Vec<f64> = log_theta.iter().map(|v| 10f64.powf(*v)).collect();
        KernelSpec::new(family, theta, opts.nugget)
            .and_then(|spec| universal_core(&spec, data.x(), &f, &ys, variant, opts))
            .map_or(f64::INFINITY, |core| core.objective)
    };
    let best = minimize_multistart(objective, p, &opts.optimizer)?;
    let theta = best.x.iter().map(|v| 10f64.powf(*v)).collect();
    let spec = KernelSpec::new(family, theta, opts.nugget)?;
    FittedUK::build(basis.clone(), variant, spec, data.clone(), f, scale, opts)
}

/// Universal model at fixed kernel parameters.
pub fn fit_uk_fixed(
    data: &DataSet,
    basis: &RegressionBasis,
    spec: &KernelSpec,
    variant: UkVariant,
    opts: &FitOptions,
) -> Result<FittedUK> {
    let f = validate(data, basis)?;
    let scale = response_scale(data.y());
    FittedUK::build(basis.clone(), variant, spec.clone(), data.clone(), f, scale, opts)
}

impl FittedUK {
    fn build(
        basis: RegressionBasis,
        variant: UkVariant,
        spec: KernelSpec,
        data: DataSet,
        f: DMatrix<f64>,
        scale: f64,
        opts: &FitOptions,
    ) -> Result<Self> {
        if spec.dim() != data.p() {
            return Err(Error::DimensionMismatch { expected: data.p(), got: spec.dim() });
        }
        let ys = data.y() / scale;
        let core = universal_core(&spec, data.x(), &f, &ys, variant, opts)?;
        let resid = &ys - &f * &core.gls.beta;
        let weights = core.factor.solve(&resid.component_mul(&core.d))?;
        let mut ftd = f.transpose();
        for (j, dj) in core.d.iter().enumerate() {
            ftd.column_mut(j).scale_mut(*dj);
        }
        Ok(FittedUK {
            basis,
            variant,
            mean_form: MeanForm::Blup,
            spec,
            data,
            scale,
            beta_std: core.gls.beta,
            nu2_std: core.nu2,
            c_hat: core.c_hat,
            gamma_hat: core.gamma_hat,
            objective: core.objective,
            factor: core.factor,
            information: core.gls.information,
            ftd,
            weights,
        })
    }

    /// Switches the reported posterior mean.
    pub fn with_mean_form(mut self, form: MeanForm) -> Self {
        self.mean_form = form;
        self
    }

    pub fn mean_form(&self) -> MeanForm {
        self.mean_form
    }

    pub fn basis(&self) -> &RegressionBasis {
        &self.basis
    }

    pub fn variant(&self) -> UkVariant {
        self.variant
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn beta(&self) -> DVector<f64> {
        &self.beta_std * self.scale
    }

    pub fn nu2(&self) -> f64 {
        self.nu2_std * self.scale * self.scale
    }

    pub fn c_hat(&self) -> Option<&DVector<f64>> {
        self.c_hat.as_ref()
    }

    pub fn gamma_hat(&self) -> Option<f64> {
        self.gamma_hat
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Posterior mean and sd. The variance is
    /// `nu2 [ (1 - r'R^-1 r) / s(x)^2 + h' (F'Sigma^-1 F)^-1 h ]` with
    /// `h = f(x) - F' D R^-1 r / s(x)` and `s(x) = r'c` (one for plain UK).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let (r_norm, log_max) = normalized_cross_corr(&self.spec, self.data.x(), x)?;
        let fx = self.basis.eval(x);
        let raw = &r_norm * log_max.exp();
        // Work with the normalized r; `inv_scale` restores 1/s(x).
        let (den, inv_scale) = match &self.c_hat {
            Some(c) => {
                let den = r_norm.dot(c);
                if !(den > EPS_GUARD) {
                    return Err(Error::DegenerateScale(den));
                }
                (den, (-log_max).exp() / den)
            }
            None => (log_max.exp().recip(), 1.0),
        };
        let correction = r_norm.dot(&self.weights) / den;
        let mut mean_std = fx.dot(&self.beta_std);
        if self.mean_form == MeanForm::Blup {
            mean_std += correction;
        }
        let rinv_r = self.factor.solve(&r_norm)?;
        let h = &fx - &self.ftd * &rinv_r / den;
        let h_term = self.information.quad_form(&h)?;
        let q = self.factor.quad_form(&raw)?;
        let kernel_term = (1.0 - q).max(0.0) * inv_scale * inv_scale;
        let var_std = self.nu2_std * (kernel_term + h_term);
        let nu = self.nu2_std.sqrt();
        let pred = Prediction {
            mean: self.scale * mean_std,
            sd: self.scale * var_std.max(0.0).sqrt(),
            sd_scale: self.scale * nu * inv_scale,
        };
        Ok(match self.mean_form {
            MeanForm::Blup => pred.at_design_point(&self.data, x),
            MeanForm::RegressionOnly => pred,
        })
    }

    pub fn predict_many(&self, points: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        points.iter().map(|p| self.predict(p)).collect()
    }
}
