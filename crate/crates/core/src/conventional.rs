//! Conventional attribution baseline: a threshold-exceedance event, Monte
//! Carlo estimates of its probability in each world, and a generalized Pareto
//! tail fit for extrapolating to rare thresholds.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::evidence::causal_probs_from_rates;
use crate::models::{burn_in, relabel, step_stochastic, HmmSpec, ObservationSequence, DEFAULT_BURN_IN};

/// Minimum number of exceedances for a GPD fit.
pub const MIN_EXCEEDANCES: usize = 30;

/// Event `{ max_t φ'y_t ≥ u }` over windows of `window_steps + 1` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    phi: DVector<f64>,
    pub u: f64,
    pub window_steps: usize,
}

impl EventSpec {
    /// Normalizes `phi` to unit length.
    pub fn new(phi: DVector<f64>, u: f64, window_steps: usize) -> Result<Self> {
        let norm = phi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(DadaError::Domain(
                "event direction must be a nonzero finite vector".into(),
            ));
        }
        Ok(Self {
            phi: phi / norm,
            u,
            window_steps,
        })
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }
}

/// `max_t φ'y_t`.
pub fn max_projection(y: &ObservationSequence, phi: &DVector<f64>) -> f64 {
    y.obs.iter().map(|yt| phi.dot(yt)).fold(f64::NEG_INFINITY, f64::max)
}

pub fn event_occurs(y: &ObservationSequence, ev: &EventSpec) -> bool {
    max_projection(y, &ev.phi) >= ev.u
}

/// Settings of a long stationary run cut into consecutive windows.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRun {
    pub x0: DVector<f64>,
    pub burn_in: usize,
    pub window_steps: usize,
}

impl LongRun {
    pub fn new(x0: DVector<f64>, window_steps: usize) -> Self {
        Self {
            x0,
            burn_in: DEFAULT_BURN_IN,
            window_steps,
        }
    }
}

/// Consecutive, non-overlapping observation windows from a single run.
pub struct WindowStream<'a, R: Rng> {
    spec: &'a HmmSpec,
    state: DVector<f64>,
    window_len: usize,
    steps_done: usize,
    rng: R,
    started: bool,
}

impl<'a, R: Rng> WindowStream<'a, R> {
    pub fn new(spec: &'a HmmSpec, run: &LongRun, mut rng: R) -> Result<Self> {
        let state = burn_in(spec, &run.x0, run.burn_in, &mut rng)?;
        Ok(Self {
            spec,
            state,
            window_len: run.window_steps + 1,
            steps_done: run.burn_in,
            rng,
            started: false,
        })
    }

    /// States and observations of the next window.
    pub fn next_window(&mut self) -> Result<(Vec<DVector<f64>>, ObservationSequence)> {
        let mut states = Vec::with_capacity(self.window_len);
        let mut obs = Vec::with_capacity(self.window_len);
        for i in 0..self.window_len {
            if self.started || i > 0 {
                self.steps_done += 1;
                self.state =
                    step_stochastic(&self.state, self.spec, &mut self.rng).map_err(|e| relabel(e, self.steps_done))?;
            }
            obs.push(self.spec.observe_state(&self.state, &mut self.rng));
            states.push(self.state.clone());
        }
        self.started = true;
        Ok((states, ObservationSequence { obs }))
    }
}

/// Per-window maxima of `φ_k'y_t` for each direction, over `n_segments`
/// consecutive windows of one run.
pub fn segment_maxima<R: Rng>(
    spec: &HmmSpec,
    directions: &[DVector<f64>],
    run: &LongRun,
    n_segments: usize,
    rng: R,
) -> Result<Vec<Vec<f64>>> {
    for phi in directions {
        if phi.len() != spec.obs_dim() {
            return Err(DadaError::Dimension(format!(
                "direction of length {} for observations of dimension {}",
                phi.len(),
                spec.obs_dim()
            )));
        }
    }
    let mut stream = WindowStream::new(spec, run, rng)?;
    let mut out = vec![Vec::with_capacity(n_segments); directions.len()];
    for _ in 0..n_segments {
        let (_, y) = stream.next_window()?;
        for (phi, maxima) in directions.iter().zip(out.iter_mut()) {
            maxima.push(max_projection(&y, phi));
        }
    }
    Ok(out)
}

/// Threshold `u` such that the fraction of maxima `≥ u` is at least
/// `target_p`: the `⌈target_p·n⌉`-th largest maximum.
pub fn threshold_from_maxima(maxima: &[f64], target_p: f64) -> Result<f64> {
    if !(target_p > 0.0 && target_p <= 1.0) {
        return Err(DadaError::Domain(format!(
            "target probability must be in (0, 1], got {target_p}"
        )));
    }
    let n = maxima.len();
    if (n as f64) * target_p < 1.0 - 1e-9 {
        return Err(DadaError::Insufficient(format!(
            "{n} segments cannot resolve a probability of {target_p}"
        )));
    }
    let mut sorted = maxima.to_vec();
    if sorted.iter().any(|v| v.is_nan()) {
        return Err(DadaError::Domain("segment maxima contain NaN".into()));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((target_p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[k - 1])
}

pub fn calibrate_threshold(segments: &[ObservationSequence], phi: &DVector<f64>, target_p: f64) -> Result<f64> {
    let phi = phi.normalize();
    let maxima: Vec<f64> = segments.iter().map(|y| max_projection(y, &phi)).collect();
    threshold_from_maxima(&maxima, target_p)
}

/// Empirical exceedance frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbEstimate {
    pub p: f64,
    pub std_err: f64,
    pub hits: usize,
    pub n: usize,
}

impl EventProbEstimate {
    pub fn from_maxima(maxima: &[f64], u: f64) -> Self {
        let n = maxima.len();
        let hits = maxima.iter().filter(|&&m| m >= u).count();
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let std_err = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        Self { p, std_err, hits, n }
    }
}

/// Probability of `ev` in the world described by `spec`, from `n` windows of
/// one stationary run.
pub fn estimate_event_probs<R: Rng>(
    spec: &HmmSpec,
    ev: &EventSpec,
    run: &LongRun,
    n: usize,
    rng: R,
) -> Result<EventProbEstimate> {
    if run.window_steps != ev.window_steps {
        return Err(DadaError::Dimension(format!(
            "event window of {} steps but run windows of {}",
            ev.window_steps, run.window_steps
        )));
    }
    let maxima = segment_maxima(spec, std::slice::from_ref(&ev.phi), run, n, rng)?;
    Ok(EventProbEstimate::from_maxima(&maxima[0], ev.u))
}

/// `PN_p = 1 − p0/p1`, unclipped.
pub fn pn_conventional(p0: f64, p1: f64) -> Result<f64> {
    causal_probs_from_rates(p0, p1).map(|c| c.pn)
}

/// Generalized Pareto fit to the exceedances of `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub xi: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub n_exceedances: usize,
    pub n_total: usize,
}

impl GpdFit {
    /// Fraction of the sample above the threshold.
    pub fn exceedance_rate(&self) -> f64 {
        self.n_exceedances as f64 / self.n_total as f64
    }

    /// GPD survival function of an excess `y ≥ 0`.
    pub fn survival(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        if self.xi.abs() < 1e-9 {
            return (-y / self.sigma).exp();
        }
        let base = 1.0 + self.xi * y / self.sigma;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(-1.0 / self.xi)
        }
    }

    /// `P(M ≥ u)` for `u` at or above the fit threshold.
    pub fn tail_prob(&self, u: f64) -> Result<f64> {
        if u < self.threshold {
            return Err(DadaError::Domain(format!(
                "tail probability requested at {u}, below the fit threshold {}",
                self.threshold
            )));
        }
        Ok(self.exceedance_rate() * self.survival(u - self.threshold))
    }

    /// Level exceeded with probability `q` per segment (return period `1/q`).
    pub fn return_level(&self, q: f64) -> f64 {
        let ratio = self.exceedance_rate() / q;
        if self.xi.abs() < 1e-9 {
            self.threshold + self.sigma * ratio.ln()
        } else {
            self.threshold + self.sigma / self.xi * (ratio.powf(self.xi) - 1.0)
        }
    }
}

/// Probability-weighted-moment GPD fit to the exceedances of `fit_threshold`.
pub fn gpd_tail_fit(maxima: &[f64], fit_threshold: f64) -> Result<GpdFit> {
    let mut exc: Vec<f64> = maxima
        .iter()
        .filter(|&&m| m > fit_threshold)
        .map(|&m| m - fit_threshold)
        .collect();
    let n = exc.len();
    if n < MIN_EXCEEDANCES {
        return Err(DadaError::Insufficient(format!(
            "{n} exceedances of {fit_threshold}; at least {MIN_EXCEEDANCES} needed"
        )));
    }
    exc.sort_by(f64::total_cmp);
    let nf = n as f64;
    let a0 = exc.iter().sum::<f64>() / nf;
    let a1 = exc
        .iter()
        .enumerate()
        .map(|(i, &e)| (1.0 - (i as f64 + 1.0 - 0.35) / nf) * e)
        .sum::<f64>()
        / nf;
    let denom = a0 - 2.0 * a1;
    if !(denom > 0.0) {
        return Err(DadaError::Domain("degenerate exceedances for a GPD fit".into()));
    }
    let xi = 2.0 - a0 / denom;
    let sigma = 2.0 * a0 * a1 / denom;
    if !(sigma > 0.0) || !xi.is_finite() {
        return Err(DadaError::Domain("GPD fit produced a non-positive scale".into()));
    }
    Ok(GpdFit {
        xi,
        sigma,
        threshold: fit_threshold,
        n_exceedances: n,
        n_total: maxima.len(),
    })
}

/// Linear-interpolation sample quantile (type 7).
pub fn quantile(sample: &[f64], q: f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Default GPD fit threshold: the 95th percentile of the maxima.
pub fn default_fit_threshold(maxima: &[f64]) -> f64 {
    quantile(maxima, 0.95)
}

/// Nonparametric bootstrap of a GPD fit at a fixed threshold. Resamples with
/// too few exceedances are dropped.
pub fn gpd_bootstrap<R: Rng + ?Sized>(maxima: &[f64], fit_threshold: f64, n_boot: usize, rng: &mut R) -> Vec<GpdFit> {
    let n = maxima.len();
    let mut resample = vec![0.0; n];
    (0..n_boot)
        .filter_map(|_| {
            for slot in resample.iter_mut() {
                *slot = maxima[rng.random_range(0..n)];
            }
            gpd_tail_fit(&resample, fit_threshold).ok()
        })
        .collect()
}

/// Central `level` percentile band of `stat` over bootstrap fits.
pub fn percentile_band(fits: &[GpdFit], level: f64, stat: impl Fn(&GpdFit) -> f64) -> Option<(f64, f64)> {
    if fits.is_empty() {
        return None;
    }
    let mut vals: Vec<f64> = fits.iter().map(stat).collect();
    vals.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some((quantile_sorted(&vals, alpha), quantile_sorted(&vals, 1.0 - alpha)))
}
