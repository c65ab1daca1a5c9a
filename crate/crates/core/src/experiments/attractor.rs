//! Long-run samples of the stochastic L63 attractor and their leading plane.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{DadaError, Result};
use crate::filters::GaussianBelief;
use crate::linalg::symmetrize;
use crate::models::{burn_in, relabel, step_stochastic, HmmSpec, L63Params, DEFAULT_BURN_IN};

/// Steps between retained samples.
pub const DEFAULT_THIN: usize = 10;
pub const MIN_SAMPLES: usize = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSample {
    pub points: Vec<[f64; 3]>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl AttractorSample {
    pub fn from_points(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(DadaError::Insufficient("need at least two sample points".into()));
        }
        let (mean, cov) = moments(&points);
        Ok(Self { points, mean, cov })
    }

    /// Moments as the forecast belief at `t = 0`.
    pub fn prior(&self) -> Result<GaussianBelief> {
        GaussianBelief::prior(self.mean.clone(), self.cov.clone())
    }
}

pub(crate) fn moments(points: &[[f64; 3]]) -> (DVector<f64>, DMatrix<f64>) {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::zeros(3, 3);
    for p in points {
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    cov /= n - 1.0;
    (DVector::from_row_slice(&mean), symmetrize(&cov))
}

/// `n_samples` states taken every [`DEFAULT_THIN`] steps after the default
/// burn-in, started from `(1, 1, 1)`.
pub fn attractor_sample<R: Rng + ?Sized>(p: &L63Params, n_samples: usize, rng: &mut R) -> Result<AttractorSample> {
    attractor_sample_with(p, n_samples, DEFAULT_THIN, DEFAULT_BURN_IN, rng)
}

pub fn attractor_sample_with<R: Rng + ?Sized>(
    p: &L63Params,
    n_samples: usize,
    thin: usize,
    burn: usize,
    rng: &mut R,
) -> Result<AttractorSample> {
    if n_samples < MIN_SAMPLES {
        return Err(DadaError::Insufficient(format!(
            "attractor sampling needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let thin = thin.max(1);
    // observation noise is irrelevant here
    let spec = HmmSpec::l63(*p, 0.0)?;
    let mut x = burn_in(&spec, &DVector::from_element(3, 1.0), burn, rng)?;
    let mut points = Vec::with_capacity(n_samples);
    let mut step = burn;
    for _ in 0..n_samples {
        for _ in 0..thin {
            step += 1;
            x = step_stochastic(&x, &spec, rng).map_err(|e| relabel(e, step))?;
        }
        points.push([x[0], x[1], x[2]]);
    }
    AttractorSample::from_points(points)
}

/// Eigenvectors of the sample covariance for its two largest eigenvalues.
/// Each vector's largest-magnitude component is made positive.
pub fn leading_plane(points: &[[f64; 3]]) -> Result<[DVector<f64>; 2]> {
    if points.len() < 3 {
        return Err(DadaError::Insufficient(
            "leading plane needs at least three points".into(),
        ));
    }
    let (_, cov) = moments(points);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let second = eig.eigenvalues[order[1]];
    if !(top > 0.0) || second <= 1e-12 * top {
        return Err(DadaError::Domain("sample covariance has rank below 2".into()));
    }
    let pick = |i: usize| {
        let mut v: DVector<f64> = eig.eigenvectors.column(order[i]).into_owned();
        v.normalize_mut();
        let (imax, _) = v.iter().enumerate().fold(
            (0, 0.0_f64),
            |(bi, bv), (i, x)| {
                if x.abs() > bv {
                    (i, x.abs())
                } else {
                    (bi, bv)
                }
            },
        );
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        v
    };
    Ok([pick(0), pick(1)])
}

/// Coordinates of each point in the plane spanned by `plane`.
pub fn project(points: &[[f64; 3]], plane: &[DVector<f64>; 2]) -> Vec<[f64; 2]> {
    points
        .iter()
        .map(|p| {
            let v = DVector::from_row_slice(p);
            [plane[0].dot(&v), plane[1].dot(&v)]
        })
        .collect()
}
