//! Independent oracles shared by the integration tests. Nothing here calls
//! the filter or evidence code under test.
#![allow(dead_code)]

use dada_core::filters::GaussianBelief;
use dada_core::models::{HmmSpec, ObservationSequence};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `A A' / n + floor I`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let a = gaussian_matrix(rng, n, n);
    let s = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor;
    (&s + s.transpose()) * 0.5
}

/// Random dynamics rescaled to spectral radius `radius`.
pub fn random_stable<R: Rng>(rng: &mut R, n: usize, radius: f64) -> DMatrix<f64> {
    let m = gaussian_matrix(rng, n, n);
    let rho = m.complex_eigenvalues().iter().fold(0.0_f64, |a, l| a.max(l.norm()));
    if rho < 1e-12 {
        return DMatrix::identity(n, n) * radius;
    }
    m * (radius / rho)
}

pub struct LinearCase {
    pub m: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub prior_mean: DVector<f64>,
    pub prior_cov: DMatrix<f64>,
}

impl LinearCase {
    pub fn random<R: Rng>(rng: &mut R, n: usize, d: usize) -> Self {
        Self {
            m: random_stable(rng, n, 0.95),
            h: gaussian_matrix(rng, d, n),
            q: random_spd(rng, n, 0.1),
            r: random_spd(rng, d, 0.2),
            prior_mean: gaussian_vector(rng, n),
            prior_cov: random_spd(rng, n, 0.5),
        }
    }

    pub fn spec(&self) -> HmmSpec {
        HmmSpec::linear(self.m.clone(), self.h.clone(), self.q.clone(), self.r.clone()).unwrap()
    }

    pub fn prior(&self) -> GaussianBelief {
        GaussianBelief::prior(self.prior_mean.clone(), self.prior_cov.clone()).unwrap()
    }

    /// Draws `y_0 … y_T` directly from the generative model.
    pub fn sample<R: Rng>(&self, steps: usize, rng: &mut R) -> (Vec<DVector<f64>>, ObservationSequence) {
        let lq = self.q.clone().cholesky().unwrap().l();
        let lr = self.r.clone().cholesky().unwrap().l();
        let lp = self.prior_cov.clone().cholesky().unwrap().l();
        let n = self.m.nrows();
        let d = self.h.nrows();
        let mut x = &self.prior_mean + &lp * gaussian_vector(rng, n);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for t in 0..=steps {
            if t > 0 {
                x = &self.m * &x + &lq * gaussian_vector(rng, n);
            }
            ys.push(&self.h * &x + &lr * gaussian_vector(rng, d));
            xs.push(x.clone());
        }
        (xs, ObservationSequence::new(ys).unwrap())
    }

    /// Log density of the stacked observation vector, built from the joint
    /// Gaussian law of `(y_0, …, y_T)`.
    pub fn joint_loglik(&self, y: &ObservationSequence) -> f64 {
        let n = self.m.nrows();
        let d = self.h.nrows();
        let len = y.len();
        // x_t = M^t x_0 + sum_{k=1..t} M^{t-k} v_k, so Cov(x_s, x_t) follows
        // from the powers of M.
        let mut pow = vec![DMatrix::identity(n, n)];
        for k in 1..len {
            pow.push(&self.m * &pow[k - 1]);
        }
        let cov_x = |s: usize, t: usize| -> DMatrix<f64> {
            let lo = s.min(t);
            let mut c = &pow[s] * &self.prior_cov * pow[t].transpose();
            for k in 1..=lo {
                c += &pow[s - k] * &self.q * pow[t - k].transpose();
            }
            c
        };
        let dim = d * len;
        let mut sigma = DMatrix::zeros(dim, dim);
        let mut mean = DVector::zeros(dim);
        for s in 0..len {
            let mx = &self.h * (&pow[s] * &self.prior_mean);
            mean.rows_mut(s * d, d).copy_from(&mx);
            for t in 0..len {
                let mut block = &self.h * cov_x(s, t) * self.h.transpose();
                if s == t {
                    block += &self.r;
                }
                sigma.view_mut((s * d, t * d), (d, d)).copy_from(&block);
            }
        }
        let mut stacked = DVector::zeros(dim);
        for (t, yt) in y.obs.iter().enumerate() {
            stacked.rows_mut(t * d, d).copy_from(yt);
        }
        dense_log_normal(&stacked, &mean, &sigma)
    }

    /// Conjugate update of `N(m, P)` by `y = H x + w`, in precision form.
    pub fn conjugate_posterior(
        m: &DVector<f64>,
        p: &DMatrix<f64>,
        h: &DMatrix<f64>,
        r: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let p_inv = p.clone().try_inverse().unwrap();
        let r_inv = r.clone().try_inverse().unwrap();
        let post = (&p_inv + h.transpose() * &r_inv * h).try_inverse().unwrap();
        let mean = &post * (&p_inv * m + h.transpose() * &r_inv * y);
        (mean, post)
    }
}

/// Log density of `N(mean, cov)` from a dense Cholesky factor.
pub fn dense_log_normal(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("positive definite covariance");
    let resid = x - mean;
    let z = chol.l().solve_lower_triangular(&resid).unwrap();
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
