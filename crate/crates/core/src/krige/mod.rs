//! Ordinary, limit and rational kriging, plus the inverse distance
//! weighting predictor that rational kriging approaches as the
//! rational-quadratic length-scale shrinks.

mod c_estimate;
mod limit;
mod ordinary;
mod rational;

pub use c_estimate::{
    estimate_c_eigen, estimate_c_regularized, estimate_c_regularized_with, CEstimate,
    CRegularization,
};
pub use limit::{predict_idw, predict_limit, LimitKriging};
pub use ordinary::{fit_ok, fit_ok_fixed, gls_mean_ok, ok_profile_objective, FittedOK};
pub use rational::{
    fit_rk, fit_rk_fixed, gls_mean_rk, nu2_hat, rk_profile_objective, FittedRK,
};

use nalgebra::DVector;

use crate::kernels::DEFAULT_NUGGET;
use crate::optimize::OptimizerConfig;

/// Guard on rational denominators such as `r(x)'c`.
pub const EPS_GUARD: f64 = 1e-12;

/// Posterior summary at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Posterior standard deviation; may be `+inf` where the rational scale
    /// function has numerically vanished.
    pub sd: f64,
    /// Prior scale at the point: `nu / r(x)'c` for rational models, `tau` for ordinary kriging.
    pub sd_scale: f64,
}

impl Prediction {
    /// Central `(1 - alpha)` interval from a normal quantile `z`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.sd, self.mean + z * self.sd)
    }

    /// Exact-hit convention: at a design point the predictor returns the
    /// observed response with zero posterior sd.
    pub(crate) fn at_design_point(self, data: &crate::kernels::DataSet, x: &[f64]) -> Self {
        match data.position(x) {
            Some(i) => Prediction { mean: data.y()[i], sd: 0.0, ..self },
            None => self,
        }
    }
}

/// How the coefficient vector `c` of a rational model is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CMethod {
    /// Regularized `[(1-g)R + gI]^-1 1` with the smallest feasible `g`.
    #[default]
    Regularized,
    /// Perron eigenvector of `R`.
    Eigenvector,
}

impl CMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CMethod::Regularized => "regularized",
            CMethod::Eigenvector => "eigenvector",
        }
    }
}

/// Settings shared by every fitting routine.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub optimizer: OptimizerConfig,
    pub nugget: f64,
    pub c_method: CMethod,
    pub regularization: CRegularization,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            optimizer: OptimizerConfig::default(),
            nugget: DEFAULT_NUGGET,
            c_method: CMethod::Regularized,
            regularization: CRegularization::default(),
        }
    }
}

/// Affine map `y -> (y - center) / scale` applied before fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub center: f64,
    pub scale: f64,
}

impl Standardizer {
    /// Sample mean and standard deviation; a constant response keeps scale one.
    pub fn from_data(y: &DVector<f64>) -> Self {
        let n = y.len() as f64;
        let center = y.mean();
        let var = if y.len() > 1 {
            y.iter().map(|v| (v - center).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Standardizer { center, scale }
    }

    pub fn identity() -> Self {
        Standardizer { center: 0.0, scale: 1.0 }
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.center) / self.scale)
    }

    pub fn restore(&self, v: f64) -> f64 {
        self.center + self.scale * v
    }
}

fn is_constant(y: &DVector<f64>) -> bool {
    y.iter().all(|v| *v == y[0])
}
