use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenpair, SpdFactor};

/// Knobs of the regularized coefficient search.
#[derive(Debug, Clone, PartialEq)]
pub struct CRegularization {
    /// Uniform grid size on `[0, 1]` for the `gamma` scan.
    pub grid_points: usize,
    /// Bisection tolerance between the last infeasible and first feasible grid values.
    pub bisection_tol: f64,
    /// Slack in the componentwise test `c >= delta 1 - tol`.
    pub feasibility_tol: f64,
    /// Multiplier on `lambda1 / n`; the threshold is clamped to `[0, 1]`.
    pub delta_scale: f64,
}

impl Default for CRegularization {
    fn default() -> Self {
        CRegularization {
            grid_points: 1001,
            bisection_tol: 1e-6,
            feasibility_tol: 1e-12,
            delta_scale: 1.0,
        }
    }
}

/// Result of the regularized coefficient search.
#[derive(Debug, Clone, PartialEq)]
pub struct CEstimate {
    pub c: DVector<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub lambda1: f64,
}

pub fn estimate_c_regularized(r: &DMatrix<f64>) -> Result<CEstimate> {
    estimate_c_regularized_with(r, None, &CRegularization::default())
}

/// `c = [(1-g)R + gI]^-1 1` for the smallest `g` in `[0, 1]` with
/// `c >= delta 1` componentwise, where `delta = lambda1 / n`.
///
/// The feasible set in `g` need not be an interval, so the grid is scanned
/// upward from zero and the first feasible grid value is refined by
/// bisection against its infeasible left neighbor. `lambda1` comes from power
/// iteration, or from a dense eigensolver when power iteration stalls. `factor`, when given,
/// must be the Cholesky factor of `r` and is reused for the `g = 0` test.
pub fn estimate_c_regularized_with(
    r: &DMatrix<f64>,
    factor: Option<&SpdFactor>,
    cfg: &CRegularization,
) -> Result<CEstimate> {
    if cfg.grid_points < 2 || !(cfg.bisection_tol > 0.0) {
        return Err(Error::InvalidInput("gamma grid needs two points and a positive tolerance".into()));
    }
    let n = r.nrows();
    let mut eig: Option<SymmetricEigen<f64, nalgebra::Dyn>> = None;
    let lambda1 = match dominant_eigenpair(r) {
        Ok(pair) => pair.lambda1,
        // nearly tied top eigenvalues: only lambda1 is needed here
        Err(Error::NonConvergence { .. }) => {
            let dense = SymmetricEigen::new(r.clone());
            let top = dense.eigenvalues.max();
            eig = Some(dense);
            top
        }
        Err(e) => return Err(e),
    };
    let delta = (cfg.delta_scale * lambda1 / n as f64).clamp(0.0, 1.0);
    let threshold = delta - cfg.feasibility_tol;
    let feasible = |c: &DVector<f64>| c.iter().all(|v| *v >= threshold);
    let ones = DVector::from_element(n, 1.0);

    let owned;
    let factor = match factor {
        Some(f) => f,
        None => {
            owned = SpdFactor::new(r.clone())?;
            &owned
        }
    };
    let c0 = factor.solve(&ones)?;
    if feasible(&c0) {
        return Ok(CEstimate { c: c0, gamma: 0.0, delta, lambda1 });
    }

    // One spectral decomposition makes every trial solve O(n^2):
    // [(1-g)R + gI]^-1 1 = V diag(1 / ((1-g) l + g)) V' 1.
    let eig = eig.unwrap_or_else(|| SymmetricEigen::new(r.clone()));
    let proj = eig.eigenvectors.tr_mul(&ones);
    let trial = |g: f64| -> DVector<f64> {
        let scaled = DVector::from_fn(n, |j, _| proj[j] / ((1.0 - g) * eig.eigenvalues[j] + g));
        &eig.eigenvectors * scaled
    };

    let last = cfg.grid_points - 1;
    let first_feasible = (1..=last)
        .find(|&k| feasible(&trial(k as f64 / last as f64)))
        .ok_or_else(|| Error::Internal("no feasible gamma; correlation matrix is malformed".into()))?;
    let mut lo = (first_feasible - 1) as f64 / last as f64;
    let mut hi = first_feasible as f64 / last as f64;
    while hi - lo > cfg.bisection_tol {
        let mid = 0.5 * (lo + hi);
        if feasible(&trial(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gamma = hi;

    let mut a = r * (1.0 - gamma);
    for i in 0..n {
        a[(i, i)] += gamma;
    }
    let c = SpdFactor::new(a)?.solve(&ones)?;
    Ok(CEstimate { c, gamma, delta, lambda1 })
}

/// Perron eigenvector of `r` (unit norm, nonnegative).
pub fn estimate_c_eigen(r: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(dominant_eigenpair(r)?.e1)
}
