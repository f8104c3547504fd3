use nalgebra::{DMatrix, DVector};

use super::{is_constant, FitOptions, Prediction, Standardizer};
use crate::error::{Error, Result};
use crate::kernels::{corr_matrix, cross_corr, DataSet, KernelFamily, KernelSpec};
use crate::linalg::SpdFactor;
use crate::optimize::minimize_multistart;

/// GLS mean `1'R^-1 y / 1'R^-1 1`.
pub fn gls_mean_ok(r: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    if y.len() != r.nrows() {
        return Err(Error::DimensionMismatch { expected: r.nrows(), got: y.len() });
    }
    let factor = SpdFactor::new(r.clone())?;
    let rinv1 = factor.solve(&DVector::from_element(y.len(), 1.0))?;
    Ok(rinv1.dot(y) / rinv1.sum())
}

struct OrdinaryCore {
    factor: SpdFactor,
    rinv1: DVector<f64>,
    mu: f64,
    tau2: f64,
    objective: f64,
}

fn ordinary_core(spec: &KernelSpec, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OrdinaryCore> {
    let n = x.nrows();
    let factor = SpdFactor::new(corr_matrix(spec, x)?)?;
    let rinv1 = factor.solve(&DVector::from_element(n, 1.0))?;
    let denom = rinv1.sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let mu = rinv1.dot(y) / denom;
    let tau2 = factor.quad_form(&y.add_scalar(-mu))? / n as f64;
    let objective = n as f64 * tau2.max(f64::MIN_POSITIVE).ln() + factor.log_det();
    Ok(OrdinaryCore { factor, rinv1, mu, tau2, objective })
}

/// Profile criterion `n log tau2 + log|R|`; `+inf` if `R` cannot be factored.
pub fn ok_profile_objective(
    theta: &[f64],
    data: &DataSet,
    family: KernelFamily,
    opts: &FitOptions,
) -> f64 {
    KernelSpec::new(family, theta.to_vec(), opts.nugget)
        .and_then(|spec| ordinary_core(&spec, data.x(), data.y()))
        .map_or(f64::INFINITY, |core| core.objective)
}

/// Ordinary kriging model.
#[derive(Debug, Clone)]
pub struct FittedOK {
    spec: KernelSpec,
    data: DataSet,
    standardizer: Standardizer,
    mu_std: f64,
    tau2_std: f64,
    objective: f64,
    factor: SpdFactor,
    rinv1: DVector<f64>,
    /// `R^-1 (y - mu 1)` in standardized units.
    weights: DVector<f64>,
}

pub fn fit_ok(data: &DataSet, family: KernelFamily, opts: &FitOptions) -> Result<FittedOK> {
    let standardizer = Standardizer::from_data(data.y());
    let ys = standardizer.apply(data.y());
    let p = data.p();
    let theta = if is_constant(data.y()) {
        vec![opts.optimizer.initial_theta; p]
    } else {
        let objective = |log_theta: &[f64]| {
            let theta: Vec<f64> = log_theta.iter().map(|v| 10f64.powf(*v)).collect();
            KernelSpec::new(family, theta, opts.nugget)
                .and_then(|spec| ordinary_core(&spec, data.x(), &ys))
                .map_or(f64::INFINITY, |core| core.objective)
        };
        let best = minimize_multistart(objective, p, &opts.optimizer)?;
        best.x.iter().map(|v| 10f64.powf(*v)).collect()
    };
    let spec = KernelSpec::new(family, theta, opts.nugget)?;
    FittedOK::build(spec, data.clone(), standardizer)
}

pub fn fit_ok_fixed(data: &DataSet, spec: &KernelSpec) -> Result<FittedOK> {
    FittedOK::build(spec.clone(), data.clone(), Standardizer::from_data(data.y()))
}

impl FittedOK {
    fn build(spec: KernelSpec, data: DataSet, standardizer: Standardizer) -> Result<Self> {
        if spec.dim() != data.p() {
            return Err(Error::DimensionMismatch { expected: data.p(), got: spec.dim() });
        }
        let ys = standardizer.apply(data.y());
        let core = ordinary_core(&spec, data.x(), &ys)?;
        let weights = core.factor.solve(&ys.add_scalar(-core.mu))?;
        Ok(FittedOK {
            spec,
            data,
            standardizer,
            mu_std: core.mu,
            tau2_std: core.tau2,
            objective: core.objective,
            factor: core.factor,
            rinv1: core.rinv1,
            weights,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn standardizer(&self) -> Standardizer {
        self.standardizer
    }

    pub fn mu(&self) -> f64 {
        self.standardizer.restore(self.mu_std)
    }

    pub fn tau2(&self) -> f64 {
        self.tau2_std * self.standardizer.scale.powi(2)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Mean `mu + r'R^-1(y - mu 1)`; the variance adds the GLS mean
    /// uncertainty `(1 - r'R^-1 1)^2 / 1'R^-1 1` to `1 - r'R^-1 r`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let r = cross_corr(&self.spec, self.data.x(), x)?;
        let mean_std = self.mu_std + r.dot(&self.weights);
        let q = self.factor.quad_form(&r)?;
        let u = 1.0 - r.dot(&self.rinv1);
        let var_std = self.tau2_std * ((1.0 - q).max(0.0) + u * u / self.rinv1.sum());
        let s = self.standardizer.scale;
        let pred = Prediction {
            mean: self.standardizer.restore(mean_std),
            sd: s * var_std.max(0.0).sqrt(),
            sd_scale: s * self.tau2_std.sqrt(),
        };
        Ok(pred.at_design_point(&self.data, x))
    }

    pub fn predict_many(&self, points: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        points.iter().map(|p| self.predict(p)).collect()
    }
}
