//! Dense SPD factorization and the dominant eigenpair of positive matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 10_000;

/// Lower Cholesky factor `L` of an SPD matrix `A = L L'`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factors `a`, reading only its lower triangle.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        let chol = Cholesky::new(a).ok_or(Error::NotPositiveDefinite)?;
        // nalgebra accepts tiny positive pivots produced by round-off
        if chol.l_dirty().diagonal().iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(SpdFactor { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// The lower-triangular factor.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(b.len())?;
        Ok(self.chol.solve(b))
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(b.nrows())?;
        Ok(self.chol.solve(b))
    }

    /// `L^-1 b`.
    pub fn half_solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(b.len())?;
        let mut z = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut z);
        Ok(z)
    }

    /// `b' A^-1 b`, computed as `||L^-1 b||^2` so it is never negative.
    pub fn quad_form(&self, b: &DVector<f64>) -> Result<f64> {
        Ok(self.half_solve(b)?.norm_squared())
    }

    /// `log|A| = 2 sum log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    fn check_rows(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }
}

/// Dominant eigenvalue and its unit-norm, entrywise nonnegative eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda1: f64,
    pub e1: DVector<f64>,
}

/// Power iteration from the all-ones vector.
///
/// Stops when successive normalized iterates differ by less than
/// [`POWER_TOL`] in the max norm. A repeated top eigenvalue is not an
/// error: the iteration then settles on the projection of the ones vector
/// onto the top eigenspace.
pub fn dominant_eigenpair(r: &DMatrix<f64>) -> Result<EigenPair> {
    if !r.is_square() || r.nrows() == 0 {
        return Err(Error::InvalidInput("expected a non-empty square matrix".into()));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let n = r.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut w = DVector::zeros(n);
    let mut converged = false;
    for _ in 0..POWER_MAX_ITER {
        w.gemv(1.0, r, &v, 0.0);
        let norm = w.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Internal("power iteration collapsed to zero".into()));
        }
        w /= norm;
        let diff = (&w - &v).amax();
        std::mem::swap(&mut v, &mut w);
        if diff < POWER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: POWER_MAX_ITER });
    }
    for e in v.iter_mut() {
        if *e < 0.0 {
            if *e > -POWER_TOL {
                *e = 0.0;
            } else {
                return Err(Error::NegativeEntry { value: *e });
            }
        }
    }
    let norm = v.norm();
    v /= norm;
    let lambda1 = v.dot(&(r * &v));
    Ok(EigenPair { lambda1, e1: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        a.transpose() * &a + DMatrix::identity(n, n)
    }

    fn random_positive_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        // Gram matrix of positive vectors plus a ridge: entrywise positive and SPD
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() + 0.05);
        a.transpose() * &a + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_factor() {
        let f = SpdFactor::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.l(), DMatrix::identity(3, 3));
    }

    #[test]
    fn two_by_two_factor_and_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = SpdFactor::new(a.clone()).unwrap();
        let l = f.l();
        let want = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert_relative_eq!(l, want, epsilon = 1e-15);
        assert_relative_eq!(&l * l.transpose(), a, epsilon = 1e-14);
        let x = f.solve(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(x[0], 3.0 / 8.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], -0.25, epsilon = 1e-15);
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = SpdFactor::new(DMatrix::identity(4, 4)).unwrap();
        let b = DVector::from_vec(vec![1.5, -2.0, 0.0, 7.0]);
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn reconstruction_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_spd(20, &mut rng);
        let l = SpdFactor::new(a.clone()).unwrap().l();
        let err = (&l * l.transpose() - &a).norm() / a.norm();
        assert!(err < 1e-12, "reconstruction error {err}");
        assert!(l.diagonal().iter().all(|d| *d > 0.0));
    }

    #[test]
    fn solve_residual_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(30, &mut rng);
        let b = DVector::from_fn(30, |_, _| rng.random::<f64>());
        let x = SpdFactor::new(a.clone()).unwrap().solve(&b).unwrap();
        assert!((&a * x - &b).norm() / b.norm() < 1e-10);
    }

    #[test]
    fn solve_matrix_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_spd(6, &mut rng);
        let b = DMatrix::from_fn(6, 3, |_, _| rng.random::<f64>());
        let x = SpdFactor::new(a.clone()).unwrap().solve_matrix(&b).unwrap();
        assert!((&a * x - &b).norm() / b.norm() < 1e-12);
    }

    #[test]
    fn log_det_cases() {
        assert_eq!(SpdFactor::new(DMatrix::identity(5, 5)).unwrap().log_det(), 0.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert_relative_eq!(SpdFactor::new(d).unwrap().log_det(), 6f64.ln(), epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(10, &mut rng);
        // LU-based determinant is an independent route
        let direct = a.clone().lu().determinant().ln();
        let ld = SpdFactor::new(a).unwrap().log_det();
        assert!((ld - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn quad_form_matches_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(8, &mut rng);
        let b = DVector::from_fn(8, |_, _| rng.random::<f64>());
        let f = SpdFactor::new(a).unwrap();
        assert_relative_eq!(f.quad_form(&b).unwrap(), b.dot(&f.solve(&b).unwrap()), max_relative = 1e-12);
    }

    #[test]
    fn factor_errors() {
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(SpdFactor::new(indefinite).unwrap_err(), Error::NotPositiveDefinite);
        let f = SpdFactor::new(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            f.solve(&DVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(SpdFactor::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eigenpair_identity_is_fixed_point() {
        let pair = dominant_eigenpair(&DMatrix::identity(4, 4)).unwrap();
        assert_relative_eq!(pair.lambda1, 1.0, epsilon = 1e-15);
        for e in pair.e1.iter() {
            assert_relative_eq!(*e, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn eigenpair_two_by_two() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let pair = dominant_eigenpair(&r).unwrap();
        assert_relative_eq!(pair.lambda1, 1.6, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(pair.e1[0], h, epsilon = 1e-14);
        assert_relative_eq!(pair.e1[1], h, epsilon = 1e-14);
    }

    #[test]
    fn eigenpair_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let r = random_positive_spd(8, &mut rng);
        let pair = dominant_eigenpair(&r).unwrap();
        let eig = SymmetricEigen::new(r.clone());
        let k = eig.eigenvalues.imax();
        let mut e = eig.eigenvectors.column(k).into_owned();
        if e.sum() < 0.0 {
            e = -e;
        }
        assert!((pair.lambda1 - eig.eigenvalues[k]).abs() < 1e-8 * eig.eigenvalues[k]);
        assert!((&pair.e1 - e).amax() < 1e-8);
        assert!((&r * &pair.e1 - &pair.e1 * pair.lambda1).norm() < 1e-8 * pair.lambda1);
    }

    #[test]
    fn eigenpair_rejects_indefinite_sign_pattern() {
        // dominant eigenvector has entries of opposite sign
        let r = DMatrix::from_row_slice(2, 2, &[2.0, -0.9, -0.9, 1.0]);
        assert!(matches!(dominant_eigenpair(&r), Err(Error::NegativeEntry { .. })));
    }
}
