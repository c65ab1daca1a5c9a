//! Model evidence from filter forecasts and the causal probabilities derived
//! from it.
//!
//! For a Gaussian forecast `N(x^f_t, P^f_t)` the predictive density of `y_t`
//! is `N(H x^f_t, Σ_t)` with `Σ_t = H P^f_t H' + R`, and
//!
//! ```text
//! log f(y) = Σ_{t=0}^{T} log N(y_t; H x^f_t, Σ_t)
//! ```
//!
//! where the `t = 0` term uses the prior, i.e. the prior-predictive density
//! of `y_0`. All arithmetic stays in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::filters::{enkf_run, kf_run, rts_smooth, EnkfConfig, FilterRun, GaussianBelief};
use crate::linalg::{cholesky, log_normal_pdf, log_normal_pdf_chol};
use crate::models::{HmmSpec, ObservationSequence};

/// Which of the two worlds a model or a sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum World {
    Factual,
    Counterfactual,
}

impl World {
    pub fn as_str(&self) -> &'static str {
        match self {
            World::Factual => "factual",
            World::Counterfactual => "counterfactual",
        }
    }
}

/// Filter used to produce the forecast moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterKind {
    Kf,
    Enkf(EnkfConfig),
}

/// Per-step log predictive densities and their running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceTrace {
    pub increments: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub label: World,
}

impl EvidenceTrace {
    pub fn from_increments(increments: Vec<f64>, label: World) -> Self {
        let mut acc = 0.0;
        let cumulative = increments
            .iter()
            .map(|&l| {
                acc += l;
                acc
            })
            .collect();
        Self {
            increments,
            cumulative,
            label,
        }
    }

    /// `log f(y)`.
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// `log N(y; H x^f, H P^f H' + R)` via a Cholesky factor of `Σ`.
pub fn evidence_increment(fb: &GaussianBelief, y: &DVector<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    if h.ncols() != fb.dim() || y.len() != h.nrows() || r.shape() != (y.len(), y.len()) {
        return Err(DadaError::Dimension(format!(
            "observation of length {} incompatible with H ({}x{}) and state of length {}",
            y.len(),
            h.nrows(),
            h.ncols(),
            fb.dim()
        )));
    }
    let sigma = h * &fb.cov * h.transpose() + r;
    let chol = cholesky(&sigma, "innovation covariance")?;
    Ok(log_normal_pdf_chol(&(y - h * &fb.mean), &chol))
}

/// Evidence increments for a completed filter run.
pub fn evidence_from_run(
    run: &FilterRun,
    y: &ObservationSequence,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    label: World,
) -> Result<EvidenceTrace> {
    if run.len() != y.len() {
        return Err(DadaError::Dimension(format!(
            "filter run has {} steps, observations have {}",
            run.len(),
            y.len()
        )));
    }
    let increments = run
        .forecasts
        .iter()
        .zip(&y.obs)
        .map(|(fb, yt)| evidence_increment(fb, yt, h, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvidenceTrace::from_increments(increments, label))
}

/// Runs the chosen filter on `y` and accumulates the evidence.
pub fn evidence_trace<R: Rng + ?Sized>(
    spec: &HmmSpec,
    prior: &GaussianBelief,
    y: &ObservationSequence,
    filter: &FilterKind,
    label: World,
    rng: &mut R,
) -> Result<EvidenceTrace> {
    let run = match filter {
        FilterKind::Kf => kf_run(spec, prior, y)?,
        FilterKind::Enkf(cfg) => enkf_run(spec, prior, y, cfg, rng)?,
    };
    evidence_from_run(&run, y, spec.h(), spec.r(), label)
}

/// Where a [`CausalProbs`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbSource {
    FromProbabilities,
    FromDensities,
}

/// Probabilities of necessary, sufficient, and necessary-and-sufficient
/// causation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalProbs {
    pub pn: f64,
    pub ps: f64,
    pub pns: f64,
    pub source: ProbSource,
}

impl CausalProbs {
    /// Fraction of attributable risk; identical to PN.
    pub fn far(&self) -> f64 {
        self.pn
    }

    /// PN clipped to `[0, 1]` for presentation.
    pub fn pn_clipped(&self) -> f64 {
        self.pn.clamp(0.0, 1.0)
    }
}

fn check_probability(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(DadaError::Domain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// PN = 1 − p0/p1, PS = 1 − (1 − p1)/(1 − p0), PNS = p1 − p0.
pub fn causal_probs_from_rates(p0: f64, p1: f64) -> Result<CausalProbs> {
    check_probability(p0, "p0")?;
    check_probability(p1, "p1")?;
    if p1 == 0.0 {
        return Err(DadaError::UndefinedPn);
    }
    if p0 == 1.0 {
        return Err(DadaError::UndefinedPs);
    }
    Ok(CausalProbs {
        pn: 1.0 - p0 / p1,
        ps: 1.0 - (1.0 - p1) / (1.0 - p0),
        pns: p1 - p0,
        source: ProbSource::FromProbabilities,
    })
}

/// Singleton-event limit: PN = 1 − f0(y)/f1(y), PS = PNS = 0.
///
/// PN is left unclipped and is negative when the evidence favours the
/// counterfactual world.
pub fn causal_probs_from_evidence(log_f0: f64, log_f1: f64) -> CausalProbs {
    let diff = log_f0 - log_f1;
    let pn = if diff.is_nan() {
        // both −∞ or both +∞: no information either way
        0.0
    } else {
        // adding 0.0 folds −0.0 into 0.0
        -diff.exp_m1() + 0.0
    };
    CausalProbs {
        pn,
        ps: 0.0,
        pns: 0.0,
        source: ProbSource::FromDensities,
    }
}

/// Residual of the identity `log f(y) = log p(y|x) + log p(x) − log p(x|y)`
/// at a test trajectory `x`, against the filter evidence.
///
/// The posterior density of the trajectory is factored backwards from the
/// Kalman filter output,
/// `p(x|y) = p(x_T | y_{0:T}) Π_t p(x_t | x_{t+1}, y_{0:t})`, which needs
/// `Q` positive definite.
pub fn bayes_ratio_check(
    spec: &HmmSpec,
    prior: &GaussianBelief,
    y: &ObservationSequence,
    x: &[DVector<f64>],
) -> Result<f64> {
    let m = spec
        .linear_operator()
        .ok_or_else(|| DadaError::Domain("the Bayes-ratio check needs linear dynamics".into()))?;
    if x.len() != y.len() {
        return Err(DadaError::Dimension(format!(
            "test trajectory has {} states, observations have {}",
            x.len(),
            y.len()
        )));
    }
    let run = kf_run(spec, prior, y)?;
    let log_f = evidence_from_run(&run, y, spec.h(), spec.r(), World::Factual)?.total();

    let mut log_lik = 0.0;
    for (xt, yt) in x.iter().zip(&y.obs) {
        log_lik += log_normal_pdf(yt, &(spec.h() * xt), spec.r())?;
    }

    let mut log_prior = log_normal_pdf(&x[0], &prior.mean, &prior.cov)?;
    if x.len() > 1 {
        let q_chol = cholesky(spec.q(), "model-error covariance")?;
        for w in x.windows(2) {
            log_prior += log_normal_pdf_chol(&(&w[1] - m * &w[0]), &q_chol);
        }
    }

    let last = x.len() - 1;
    let mut log_post = log_normal_pdf(&x[last], &run.analyses[last].mean, &run.analyses[last].cov)?;
    for t in 0..last {
        let a = &run.analyses[t];
        let f_next = &run.forecasts[t + 1];
        let chol = cholesky(&f_next.cov, "forecast covariance")?;
        let j = chol.solve(&(m * &a.cov)).transpose();
        let mean = &a.mean + &j * (&x[t + 1] - &f_next.mean);
        let cov = &a.cov - &j * &f_next.cov * j.transpose();
        log_post += log_normal_pdf(&x[t], &mean, &cov)?;
    }

    Ok(log_lik + log_prior - log_post - log_f)
}

/// Smoothed posterior mean trajectory of a linear model.
pub fn posterior_mean_trajectory(
    spec: &HmmSpec,
    prior: &GaussianBelief,
    y: &ObservationSequence,
) -> Result<Vec<DVector<f64>>> {
    let m = spec
        .linear_operator()
        .ok_or_else(|| DadaError::Domain("smoothing needs linear dynamics".into()))?;
    let run = kf_run(spec, prior, y)?;
    Ok(rts_smooth(&run, m)?.into_iter().map(|b| b.mean).collect())
}
