//! Kalman filter and stochastic (perturbed-observation) ensemble Kalman filter.
//!
//! Both filters treat the user-prescribed prior as the forecast belief at
//! `t = 0`, so the first observation is assimilated against it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::linalg::{cholesky, psd_factor, symmetrize};
use crate::models::{relabel, step_stochastic, HmmSpec, ObservationSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefRole {
    Forecast,
    Analysis,
}

/// Gaussian state estimate at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub role: BeliefRole,
    pub t: usize,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, role: BeliefRole, t: usize) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(DadaError::Dimension(format!(
                "covariance is {}x{} for a mean of length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(DadaError::Domain("belief must be finite".into()));
        }
        Ok(Self {
            mean,
            cov: symmetrize(&cov),
            role,
            t,
        })
    }

    /// Prior belief, used as the forecast at `t = 0`.
    pub fn prior(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::new(mean, cov, BeliefRole::Forecast, 0)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_obs_shapes(n: usize, y: &DVector<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    if h.ncols() != n {
        return Err(DadaError::Dimension(format!(
            "H has {} columns, state has {n} components",
            h.ncols()
        )));
    }
    if y.len() != h.nrows() || r.shape() != (h.nrows(), h.nrows()) {
        return Err(DadaError::Dimension(format!(
            "observation of length {} incompatible with H ({}x{}) / R ({}x{})",
            y.len(),
            h.nrows(),
            h.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

/// `K = P H' (H P H' + R)^{-1}`.
pub fn kalman_gain(p: &DMatrix<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pht = p * h.transpose();
    let s = h * &pht + r;
    let chol = cholesky(&s, "innovation covariance")?;
    // K' = S^{-1} (P H')'
    Ok(chol.solve(&pht.transpose()).transpose())
}

/// Analysis step. Returns the analysis belief and the gain that produced it.
pub fn kf_analysis_with_gain(
    fb: &GaussianBelief,
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(GaussianBelief, DMatrix<f64>)> {
    check_obs_shapes(fb.dim(), y, h, r)?;
    let k = kalman_gain(&fb.cov, h, r)?;
    let mean = &fb.mean + &k * (y - h * &fb.mean);
    let n = fb.dim();
    let cov = symmetrize(&((DMatrix::identity(n, n) - &k * h) * &fb.cov));
    let belief = GaussianBelief {
        mean,
        cov,
        role: BeliefRole::Analysis,
        t: fb.t,
    };
    Ok((belief, k))
}

pub fn kf_analysis(
    fb: &GaussianBelief,
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    kf_analysis_with_gain(fb, y, h, r).map(|(b, _)| b)
}

/// Forecast step `x = M x^a`, `P = M P^a M' + Q`.
pub fn kf_forecast(ab: &GaussianBelief, m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<GaussianBelief> {
    let n = ab.dim();
    if m.shape() != (n, n) || q.shape() != (n, n) {
        return Err(DadaError::Dimension(format!(
            "M ({}x{}) and Q ({}x{}) must be {n}x{n}",
            m.nrows(),
            m.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    Ok(GaussianBelief {
        mean: m * &ab.mean,
        cov: symmetrize(&(m * &ab.cov * m.transpose() + q)),
        role: BeliefRole::Forecast,
        t: ab.t + 1,
    })
}

/// Output of a filter pass over `y_0 … y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub forecasts: Vec<GaussianBelief>,
    pub analyses: Vec<GaussianBelief>,
    /// Kalman gain per step; empty for runs that do not keep it.
    pub gains: Vec<DMatrix<f64>>,
}

impl FilterRun {
    pub fn len(&self) -> usize {
        self.forecasts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.forecasts.is_empty()
    }
}

fn check_prior(spec: &HmmSpec, prior: &GaussianBelief, y: &ObservationSequence) -> Result<()> {
    if prior.dim() != spec.state_dim() {
        return Err(DadaError::Dimension(format!(
            "prior has dimension {}, model state has {}",
            prior.dim(),
            spec.state_dim()
        )));
    }
    if prior.role != BeliefRole::Forecast || prior.t != 0 {
        return Err(DadaError::Domain("prior must be the forecast belief at t = 0".into()));
    }
    if y.is_empty() {
        return Err(DadaError::Insufficient("no observations to assimilate".into()));
    }
    if y.dim() != spec.obs_dim() {
        return Err(DadaError::Dimension(format!(
            "observations have dimension {}, model observes {}",
            y.dim(),
            spec.obs_dim()
        )));
    }
    Ok(())
}

/// Exact Kalman filter for linear dynamics.
pub fn kf_run(spec: &HmmSpec, prior: &GaussianBelief, y: &ObservationSequence) -> Result<FilterRun> {
    let m = spec
        .linear_operator()
        .ok_or_else(|| DadaError::Domain("the Kalman filter requires linear dynamics".into()))?;
    check_prior(spec, prior, y)?;
    let steps = y.len();
    let mut run = FilterRun {
        forecasts: Vec::with_capacity(steps),
        analyses: Vec::with_capacity(steps),
        gains: Vec::with_capacity(steps),
    };
    let mut fb = prior.clone();
    for (t, yt) in y.obs.iter().enumerate() {
        let (ab, k) = kf_analysis_with_gain(&fb, yt, spec.h(), spec.r())?;
        let next = if t + 1 < steps {
            Some(kf_forecast(&ab, m, spec.q())?)
        } else {
            None
        };
        run.forecasts.push(fb);
        run.analyses.push(ab);
        run.gains.push(k);
        match next {
            Some(f) => fb = f,
            None => break,
        }
    }
    Ok(run)
}

/// Rauch–Tung–Striebel smoother over a completed [`FilterRun`].
///
/// The filter run is left untouched, so the forecasts feeding the evidence
/// are the same with or without smoothing.
pub fn rts_smooth(run: &FilterRun, m: &DMatrix<f64>) -> Result<Vec<GaussianBelief>> {
    let n = run.analyses.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut out = vec![run.analyses[n - 1].clone(); n];
    for t in (0..n - 1).rev() {
        let a = &run.analyses[t];
        let f_next = &run.forecasts[t + 1];
        let chol = cholesky(&f_next.cov, "forecast covariance")?;
        // J = P^a M' (P^f_{t+1})^{-1}
        let j = chol.solve(&(m * &a.cov)).transpose();
        let s_next = &out[t + 1];
        let mean = &a.mean + &j * (&s_next.mean - &f_next.mean);
        let cov = symmetrize(&(&a.cov + &j * (&s_next.cov - &f_next.cov) * j.transpose()));
        out[t] = GaussianBelief {
            mean,
            cov,
            role: BeliefRole::Analysis,
            t,
        };
    }
    Ok(out)
}

/// Finite set of state vectors approximating a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<DVector<f64>>,
    pub t: usize,
}

impl Ensemble {
    pub fn new(members: Vec<DVector<f64>>, t: usize) -> Result<Self> {
        if members.len() < 2 {
            return Err(DadaError::Insufficient(format!(
                "an ensemble needs at least 2 members, got {}",
                members.len()
            )));
        }
        let n = members[0].len();
        if members.iter().any(|m| m.len() != n) {
            return Err(DadaError::Dimension("ensemble members differ in length".into()));
        }
        if members.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(DadaError::Domain("ensemble members must be finite".into()));
        }
        Ok(Self { members, t })
    }

    /// Draws `size` members from a Gaussian belief.
    pub fn sample<R: Rng + ?Sized>(belief: &GaussianBelief, size: usize, rng: &mut R) -> Result<Self> {
        let l = psd_factor(&belief.cov)?;
        let n = belief.dim();
        let members = (0..size)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                &belief.mean + &l * z
            })
            .collect();
        Self::new(members, belief.t)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.members[0].len()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for m in &self.members {
            acc += m;
        }
        acc / self.size() as f64
    }

    /// Scales anomalies about the mean by `factor`.
    pub fn inflate(&mut self, factor: f64) {
        if factor == 1.0 {
            return;
        }
        let mean = self.mean();
        for m in &mut self.members {
            *m = &mean + (&*m - &mean) * factor;
        }
    }
}

/// Sample mean and unbiased (`Ne − 1`) covariance, as a forecast belief.
pub fn ensemble_moments(e: &Ensemble) -> GaussianBelief {
    let mean = e.mean();
    let n = e.dim();
    let mut cov = DMatrix::zeros(n, n);
    for m in &e.members {
        let a = m - &mean;
        cov.ger(1.0, &a, &a, 1.0);
    }
    cov /= (e.size() - 1) as f64;
    GaussianBelief {
        mean,
        cov: symmetrize(&cov),
        role: BeliefRole::Forecast,
        t: e.t,
    }
}

/// Advances every member with independent model-noise draws.
pub fn enkf_forecast<R: Rng + ?Sized>(e: &Ensemble, spec: &HmmSpec, rng: &mut R) -> Result<Ensemble> {
    let members = e
        .members
        .iter()
        .map(|m| step_stochastic(m, spec, rng).map_err(|err| relabel(err, e.t + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble { members, t: e.t + 1 })
}

/// Perturbed-observation analysis: member `i` is pulled toward `y + w_i`,
/// `w_i ~ N(0, R)`, with the gain built from the ensemble covariance.
pub fn enkf_analysis<R: Rng + ?Sized>(
    e: &Ensemble,
    y: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Ensemble> {
    check_obs_shapes(e.dim(), y, h, r)?;
    let moments = ensemble_moments(e);
    let k = kalman_gain(&moments.cov, h, r)?;
    let r_factor = psd_factor(r)?;
    let d = y.len();
    let members = e
        .members
        .iter()
        .map(|m| {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let yi = y + &r_factor * z;
            m + &k * (yi - h * m)
        })
        .collect();
    Ok(Ensemble { members, t: e.t })
}

/// Ensemble filter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnkfConfig {
    pub ensemble_size: usize,
    pub inflation: f64,
}

impl Default for EnkfConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 100,
            inflation: 1.0,
        }
    }
}

/// Stochastic EnKF over `y_0 … y_T`.
///
/// The ensemble is drawn from the prior; `forecasts[0]` is the prior itself
/// and later forecasts are the (inflated) ensemble moments.
pub fn enkf_run<R: Rng + ?Sized>(
    spec: &HmmSpec,
    prior: &GaussianBelief,
    y: &ObservationSequence,
    cfg: &EnkfConfig,
    rng: &mut R,
) -> Result<FilterRun> {
    check_prior(spec, prior, y)?;
    if cfg.ensemble_size < 2 {
        return Err(DadaError::Config(format!(
            "ensemble size must be >= 2, got {}",
            cfg.ensemble_size
        )));
    }
    if !(cfg.inflation > 0.0) {
        return Err(DadaError::Config(format!(
            "inflation must be > 0, got {}",
            cfg.inflation
        )));
    }
    let steps = y.len();
    let mut run = FilterRun {
        forecasts: Vec::with_capacity(steps),
        analyses: Vec::with_capacity(steps),
        gains: Vec::new(),
    };
    let mut ens = Ensemble::sample(prior, cfg.ensemble_size, rng)?;
    for (t, yt) in y.obs.iter().enumerate() {
        if t > 0 {
            ens = enkf_forecast(&ens, spec, rng)?;
            ens.inflate(cfg.inflation);
            run.forecasts.push(ensemble_moments(&ens));
        } else {
            run.forecasts.push(prior.clone());
        }
        ens = enkf_analysis(&ens, yt, spec.h(), spec.r(), rng)?;
        let mut a = ensemble_moments(&ens);
        a.role = BeliefRole::Analysis;
        run.analyses.push(a);
    }
    Ok(run)
}
