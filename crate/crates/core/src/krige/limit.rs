use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::{corr_matrix, normalized_cross_corr, DataSet, KernelSpec};
use crate::linalg::SpdFactor;

use super::EPS_GUARD;

/// Limit kriging `r'R^-1 y / r'R^-1 1` with both solves cached.
#[derive(Debug, Clone)]
pub struct LimitKriging {
    spec: KernelSpec,
    data: DataSet,
    rinv_y: DVector<f64>,
    rinv_1: DVector<f64>,
}

impl LimitKriging {
    pub fn new(data: &DataSet, spec: &KernelSpec) -> Result<Self> {
        if spec.dim() != data.p() {
            return Err(Error::DimensionMismatch { expected: data.p(), got: spec.dim() });
        }
        let factor = SpdFactor::new(corr_matrix(spec, data.x())?)?;
        let rinv_y = factor.solve(data.y())?;
        let rinv_1 = factor.solve(&DVector::from_element(data.n(), 1.0))?;
        Ok(LimitKriging { spec: spec.clone(), data: data.clone(), rinv_y, rinv_1 })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let (r, _) = normalized_cross_corr(&self.spec, self.data.x(), x)?;
        if let Some(i) = self.data.position(x) {
            return Ok(self.data.y()[i]);
        }
        let den = r.dot(&self.rinv_1);
        if !(den.abs() > EPS_GUARD) {
            return Err(Error::DegenerateDenominator(den));
        }
        Ok(r.dot(&self.rinv_y) / den)
    }
}

pub fn predict_limit(data: &DataSet, spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    LimitKriging::new(data, spec)?.predict(x)
}

/// Inverse distance weighting with squared weighted distances
/// `||x - x_i||_w^2 = sum_k w_k (x_k - x_ik)^2`. A query that coincides with
/// a design point returns that point's response.
pub fn predict_idw(data: &DataSet, weights: &[f64], x: &[f64]) -> Result<f64> {
    let p = data.p();
    if weights.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: weights.len() });
    }
    if x.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: x.len() });
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("IDW weights must be positive".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query point"));
    }
    let xs = data.x();
    let d2: Vec<f64> = (0..data.n())
        .map(|i| (0..p).map(|k| weights[k] * (x[k] - xs[(i, k)]).powi(2)).sum())
        .collect();
    if let Some(i) = d2.iter().position(|d| *d == 0.0) {
        return Ok(data.y()[i]);
    }
    // scale by the smallest distance so no weight overflows
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, y) in d2.iter().zip(data.y().iter()) {
        let w = dmin / d;
        num += w * y;
        den += w;
    }
    Ok(num / den)
}
