//! Design generation.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). A master
//! seed selects the key; replication `k` reads stream `k` of that key, so
//! every replication owns an independent, counter-addressed sequence and the
//! result does not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::HarnessError;

/// Stream reserved for test-set draws shared by all replications.
pub const TEST_STREAM: u64 = u64::MAX;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n x p` iid uniforms on `(0,1)^p` from stream 0 of `seed`, filled row by row.
pub fn design_uniform(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    design_uniform_from(&mut stream_rng(seed, 0), n, p)
}

pub fn design_uniform_from<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.random::<f64>();
        }
    }
    x
}

/// Affine map sending the minimum to 0 and the maximum to 1. The endpoints
/// are set exactly.
pub fn design_rescale_endpoints(points: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::InvalidDesign("need at least two points to rescale".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::InvalidDesign("non-finite design point".into()));
    }
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(HarnessError::InvalidDesign("all points coincide".into()));
    }
    Ok(points
        .iter()
        .map(|&v| {
            if v == lo {
                0.0
            } else if v == hi {
                1.0
            } else {
                (v - lo) / (hi - lo)
            }
        })
        .collect())
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn design_equispaced(n: usize, a: f64, b: f64) -> Result<Vec<f64>, HarnessError> {
    if n < 2 {
        return Err(HarnessError::InvalidDesign(format!("equispaced grid needs n >= 2, got {n}")));
    }
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(HarnessError::InvalidDesign(format!("invalid interval [{a}, {b}]")));
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / last })
        .collect())
}
