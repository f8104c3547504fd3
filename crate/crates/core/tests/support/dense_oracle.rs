//! Reference implementation built on explicit matrix inverses and
//! entrywise kernel formulas. Shared by integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Rq,
    Matern32,
    Exp,
}

pub fn corr(family: Family, theta: &[f64], u: &[f64], v: &[f64]) -> f64 {
    match family {
        Family::Gaussian => {
            let s: f64 = (0..u.len()).map(|k| ((u[k] - v[k]) / theta[k]).powi(2)).sum();
            (-s).exp()
        }
        Family::Rq => {
            let s: f64 = (0..u.len()).map(|k| ((u[k] - v[k]) / theta[k]).powi(2)).sum();
            1.0 / (1.0 + s)
        }
        Family::Matern32 => (0..u.len())
            .map(|k| {
                let a = 3f64.sqrt() * (u[k] - v[k]).abs() / theta[k];
                (1.0 + a) * (-a).exp()
            })
            .product(),
        Family::Exp => {
            let s: f64 = (0..u.len()).map(|k| (u[k] - v[k]).abs() / theta[k]).sum();
            (-s).exp()
        }
    }
}

#[derive(Clone)]
pub struct Model {
    pub x: Vec<Vec<f64>>,
    pub y: DVector<f64>,
    pub family: Family,
    pub theta: Vec<f64>,
    pub nugget: f64,
}

impl Model {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn r(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            corr(self.family, &self.theta, &self.x[i], &self.x[j]) + if i == j { self.nugget } else { 0.0 }
        })
    }

    pub fn r_inv(&self) -> DMatrix<f64> {
        self.r().try_inverse().expect("invertible")
    }

    pub fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.x.iter().map(|xi| corr(self.family, &self.theta, x, xi)))
    }

    /// Smallest grid-then-bisection `g` with `[(1-g)R + gI]^-1 1 >= lambda1/n`.
    pub fn c_hat(&self) -> DVector<f64> {
        let r = self.r();
        let n = self.n();
        let lambda1 = SymmetricEigen::new(r.clone()).eigenvalues.max();
        let delta = (lambda1 / n as f64).min(1.0);
        let ones = DVector::from_element(n, 1.0);
        let c_at = |g: f64| {
            let a = &r * (1.0 - g) + DMatrix::identity(n, n) * g;
            a.try_inverse().expect("invertible") * &ones
        };
        let ok = |c: &DVector<f64>| c.iter().all(|v| *v >= delta - 1e-12);
        if ok(&c_at(0.0)) {
            return c_at(0.0);
        }
        let k = (1..=1000).find(|&k| ok(&c_at(k as f64 / 1000.0))).expect("feasible");
        let (mut lo, mut hi) = ((k - 1) as f64 / 1000.0, k as f64 / 1000.0);
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if ok(&c_at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        c_at(hi)
    }

    pub fn ok_mu(&self) -> f64 {
        let ri = self.r_inv();
        let ones = DVector::from_element(self.n(), 1.0);
        (ones.transpose() * &ri * &self.y)[0] / (ones.transpose() * &ri * &ones)[0]
    }

    pub fn ok_tau2(&self) -> f64 {
        let e = self.y.add_scalar(-self.ok_mu());
        (e.transpose() * self.r_inv() * &e)[0] / self.n() as f64
    }

    /// Mean and variance of the ordinary kriging predictor.
    pub fn ok_predict(&self, x: &[f64]) -> (f64, f64) {
        let ri = self.r_inv();
        let ones = DVector::from_element(self.n(), 1.0);
        let r = self.cross(x);
        let mu = self.ok_mu();
        let mean = mu + (r.transpose() * &ri * self.y.add_scalar(-mu))[0];
        let u = 1.0 - (r.transpose() * &ri * &ones)[0];
        let var = self.ok_tau2()
            * ((1.0 - (r.transpose() * &ri * &r)[0]) + u * u / (ones.transpose() * &ri * &ones)[0]);
        (mean, var)
    }

    pub fn rk_mu(&self, c: &DVector<f64>) -> f64 {
        let r = self.r();
        let d = &r * c;
        c.dot(&d.component_mul(&self.y)) / (c.transpose() * &r * c)[0]
    }

    pub fn rk_nu2(&self, c: &DVector<f64>) -> f64 {
        let d = DMatrix::from_diagonal(&(self.r() * c));
        let e = self.y.add_scalar(-self.rk_mu(c));
        (e.transpose() * &d * self.r_inv() * &d * &e)[0] / (self.n() - 1) as f64
    }

    pub fn rk_predict(&self, c: &DVector<f64>, x: &[f64]) -> (f64, f64) {
        let ri = self.r_inv();
        let d = self.r() * c;
        let r = self.cross(x);
        let rc = r.dot(c);
        let mean = (r.transpose() * &ri * d.component_mul(&self.y))[0] / rc;
        let var = self.rk_nu2(c) * (1.0 - (r.transpose() * &ri * &r)[0]) / (rc * rc);
        (mean, var)
    }

    /// GLS coefficients under `Sigma^-1 = D R^-1 D`; `c = None` gives `D = I`.
    pub fn uk_beta(&self, f: &DMatrix<f64>, c: Option<&DVector<f64>>) -> DVector<f64> {
        let d = match c {
            Some(c) => DMatrix::from_diagonal(&(self.r() * c)),
            None => DMatrix::identity(self.n(), self.n()),
        };
        let w = &d * self.r_inv() * &d;
        let info = f.transpose() * &w * f;
        info.try_inverse().expect("full rank") * f.transpose() * &w * &self.y
    }

    /// Plain iteration of the calibration variance fixed point.
    pub fn calibration_eta(&self, g: &DMatrix<f64>, sigma: f64, rational: bool) -> DVector<f64> {
        let n = self.n();
        let r = self.r();
        let base = if rational {
            let d = &r * self.c_hat();
            DMatrix::from_fn(n, n, |i, j| r[(i, j)] / (d[i] * d[j]))
        } else {
            r
        };
        let gls = |ratio: f64| {
            let v = (&base + DMatrix::identity(n, n) * ratio).try_inverse().expect("invertible");
            let info = g.transpose() * &v * g;
            let eta = info.try_inverse().expect("full rank") * g.transpose() * &v * &self.y;
            let e = &self.y - g * &eta;
            let t = (e.transpose() * &v * &e)[0] / (n - g.ncols()) as f64;
            (eta, t)
        };
        let (mut eta, mut t) = gls(0.0);
        if sigma == 0.0 {
            return eta;
        }
        for _ in 0..100_000 {
            if sigma * sigma / t > 1e12 {
                // discrepancy variance collapsed: least-squares limit
                let info = g.transpose() * g;
                return info.try_inverse().expect("full rank") * g.transpose() * &self.y;
            }
            let (e2, t2) = gls(sigma * sigma / t);
            let done = ((t2 - t) / t).abs() < 1e-15;
            eta = e2;
            t = t2;
            if done {
                break;
            }
        }
        eta
    }
}

use rand::Rng;

pub fn condition_number(r: &DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(r.clone()).eigenvalues;
    ev.max() / ev.min()
}

/// Random small instance with `n` in `n_range`, isotropic length-scale and a
/// correlation matrix with condition number at most `1e4`.
pub fn random_instance<R: Rng>(rng: &mut R, n_range: std::ops::RangeInclusive<usize>) -> Model {
    loop {
        let p = rng.random_range(1..=3);
        let n = rng.random_range(n_range.clone());
        let family = [Family::Gaussian, Family::Rq, Family::Matern32, Family::Exp][rng.random_range(0..4)];
        let theta = rng.random_range(0.1..0.6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let model = Model { x, y, family, theta: vec![theta; p], nugget: 1e-6 };
        if condition_number(&model.r()) <= 1e4 {
            return model;
        }
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
