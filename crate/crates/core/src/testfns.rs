//! Closed-form test functions, unit-cube wrappers and true-mean oracles.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A test function on a box domain, evaluated in native coordinates.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    domain: Vec<(f64, f64)>,
    /// Interior native points where 1-D quadrature is split.
    breakpoints: Vec<f64>,
    f: Evaluator,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl TestFunction {
    pub fn new<F>(name: &str, domain: Vec<(f64, f64)>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if domain.is_empty() {
            return Err(Error::InvalidInput("domain must have at least one coordinate".into()));
        }
        if domain.iter().any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid domain for {name}")));
        }
        Ok(TestFunction { name: name.to_string(), domain, breakpoints: Vec::new(), f: Arc::new(f) })
    }

    pub fn with_breakpoints(mut self, points: Vec<f64>) -> Self {
        self.breakpoints = points;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    /// Evaluates at a native point; errors outside the domain.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        for (v, (a, b)) in x.iter().zip(&self.domain) {
            if !(*v >= *a && *v <= *b) {
                return Err(Error::InvalidInput(format!("{v} outside [{a}, {b}] for {}", self.name)));
            }
        }
        Ok((self.f)(x))
    }

    /// Affine map from `[0,1]^p` to the native box.
    pub fn to_native(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.domain)
            .map(|(t, (a, b))| if *t == 1.0 { *b } else { a + t * (b - a) })
            .collect()
    }

    /// Evaluates at a unit-cube point.
    pub fn eval_unit(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        if u.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput("unit-cube point outside [0,1]".into()));
        }
        self.eval(&self.to_native(u))
    }
}

pub fn beam() -> TestFunction {
    TestFunction::new("beam", vec![(0.0, 1.0)], |x| {
        let t = x[0];
        -t * (t * t * t - 2.0 * t * t + 1.0)
    })
    .expect("valid domain")
}

pub fn sin2x() -> TestFunction {
    TestFunction::new("sin2x", vec![(0.0, 1.0)], |x| (2.0 * x[0]).sin()).expect("valid domain")
}

pub fn xiong() -> TestFunction {
    TestFunction::new("xiong", vec![(0.0, 1.0)], |x| {
        let d = x[0] - 0.9;
        (30.0 * d.powi(4)).sin() * (2.0 * d).cos() + d / 2.0
    })
    .expect("valid domain")
}

pub fn gramacy_lee() -> TestFunction {
    TestFunction::new("gramacy_lee", vec![(0.5, 2.5)], |x| {
        let t = x[0];
        (10.0 * PI * t).sin() / (2.0 * t) + (t - 1.0).powi(4)
    })
    .expect("valid domain")
}

pub fn buhmann() -> TestFunction {
    let pole = (PI / 2.0 - 1.0).sqrt();
    TestFunction::new("buhmann", vec![(-1.0, 1.0)], |x| {
        let t = x[0];
        t.powi(8) / ((1.0 + t * t).tan() + 0.5)
    })
    .expect("valid domain")
    .with_breakpoints(vec![-pole, pole])
}

/// Ranges: r_w, r, T_u, H_u, T_l, H_l, L, K_w.
pub const BOREHOLE_DOMAIN: [(f64, f64); 8] = [
    (0.05, 0.15),
    (100.0, 50000.0),
    (63070.0, 115600.0),
    (990.0, 1110.0),
    (63.1, 116.0),
    (700.0, 820.0),
    (1120.0, 1680.0),
    (9855.0, 12045.0),
];

pub fn borehole_native(x: &[f64]) -> f64 {
    let [rw, r, tu, hu, tl, hl, l, kw] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]];
    let log_ratio = (r / rw).ln();
    2.0 * PI * tu * (hu - hl) / (log_ratio * (1.0 + 2.0 * l * tu / (log_ratio * rw * rw * kw) + tu / tl))
}

pub fn borehole() -> TestFunction {
    TestFunction::new("borehole", BOREHOLE_DOMAIN.to_vec(), borehole_native).expect("valid domain")
}

/// Name-keyed collection of test functions.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    fns: BTreeMap<String, TestFunction>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// The built-in functions.
    pub fn builtin() -> Self {
        let mut reg = Registry::empty();
        for f in [beam(), sin2x(), xiong(), gramacy_lee(), buhmann(), borehole()] {
            reg.register(f);
        }
        reg
    }

    /// Adds or replaces a function under its name.
    pub fn register(&mut self, f: TestFunction) {
        self.fns.insert(f.name().to_string(), f);
    }

    pub fn get(&self, name: &str) -> Result<&TestFunction> {
        self.fns.get(name).ok_or_else(|| Error::InvalidInput(format!("unknown test function '{name}'")))
    }

    pub fn names(&self) -> Vec<&str> {
        self.fns.keys().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanConfig {
    /// Absolute error target for 1-D quadrature.
    pub quad_tol: f64,
    /// Monte Carlo sample size for `p > 1`.
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig { quad_tol: 1e-10, n_mc: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub value: f64,
    /// Quadrature error estimate or Monte Carlo standard error.
    pub std_error: f64,
}

/// `int_a^b f(t) dt`, split at the function's breakpoints.
fn integrate_1d(tf: &TestFunction, g: impl Fn(f64) -> f64, tol: f64) -> (f64, f64) {
    let (a, b) = tf.domain[0];
    let mut cuts = vec![a];
    cuts.extend(tf.breakpoints.iter().copied().filter(|t| *t > a && *t < b));
    cuts.push(b);
    let pieces = (cuts.len() - 1) as f64;
    cuts.windows(2).fold((0.0, 0.0), |(sum, err), w| {
        let out = quadrature::integrate(&g, w[0], w[1], tol / pieces);
        (sum + out.integral, err + out.error_estimate)
    })
}

/// Mean of the function under the uniform distribution on its domain:
/// adaptive quadrature for `p = 1`, seeded Monte Carlo otherwise.
pub fn true_mean(tf: &TestFunction, cfg: &MeanConfig) -> Result<MeanEstimate> {
    if tf.dim() == 1 {
        let (a, b) = tf.domain[0];
        let (integral, err) = integrate_1d(tf, |t| (tf.f)(&[t]), cfg.quad_tol);
        return Ok(MeanEstimate { value: integral / (b - a), std_error: err / (b - a) });
    }
    if cfg.n_mc < 2 {
        return Err(Error::InsufficientData { needed: 2, got: cfg.n_mc });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = vec![0.0; tf.dim()];
    // Welford accumulation
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=cfg.n_mc {
        u.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let y = (tf.f)(&tf.to_native(&u));
        let delta = y - mean;
        mean += delta / k as f64;
        m2 += delta * (y - mean);
    }
    let var = m2 / (cfg.n_mc - 1) as f64;
    Ok(MeanEstimate { value: mean, std_error: (var / cfg.n_mc as f64).sqrt() })
}

/// `L2` projection of a 1-D function onto `{1, u - 0.5}` in unit-cube
/// coordinates, returned as `(b0, b1)`.
pub fn linear_projection_1d(tf: &TestFunction, tol: f64) -> Result<(f64, f64)> {
    if tf.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: tf.dim() });
    }
    let (a, b) = tf.domain[0];
    let w = b - a;
    let (m0, _) = integrate_1d(tf, |t| (tf.f)(&[t]), tol);
    let (m1, _) = integrate_1d(tf, |t| ((t - a) / w - 0.5) * (tf.f)(&[t]), tol);
    // int_0^1 (u - 0.5)^2 du = 1/12
    Ok((m0 / w, 12.0 * m1 / w))
}
