//! Parameter sweep comparing evidence-based PN against the conventional
//! threshold-exceedance PN on the forced L63 model.
//!
//! Every random stream is derived from the master seed and the identity of
//! the task that consumes it (grid indices, direction, world, sequence), so
//! results do not depend on the number of workers or on scheduling order.

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conventional::{
    event_occurs, pn_conventional, segment_maxima, threshold_from_maxima, EventProbEstimate, EventSpec, LongRun,
    WindowStream,
};
use crate::error::{DadaError, Result};
use crate::evidence::{causal_probs_from_evidence, FilterKind, World};
use crate::filters::{EnkfConfig, GaussianBelief};
use crate::models::{HmmSpec, L63Params, ObservationSequence, DEFAULT_BURN_IN};
use crate::seeds::{derive_rng, derive_seed};

use super::attractor::{attractor_sample_with, AttractorSample, DEFAULT_THIN};
use super::roc::{roc_curve, RocCurve};
use super::traces::{both_traces, WorldModel};

const TAG_DIRECTIONS: u64 = 1;
const TAG_PROB: u64 = 2;
const TAG_PRIOR: u64 = 3;
const TAG_EVAL: u64 = 4;
const TAG_FILTER: u64 = 5;

/// How evaluation sequences are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// Only windows in which the event occurred.
    EventConditioned,
    /// Any stationary window.
    Unconditioned,
}

/// Prior `(x^f_0, P^f_0)` used by each world's filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    /// Each world uses the moments of its own attractor.
    PerWorld,
    /// Both worlds use the equal-weight mixture of the two attractors.
    Shared,
}

/// Parameters of the sweep. Grids are visited as a full tensor product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda_grid: Vec<f64>,
    pub sigma_q_grid: Vec<f64>,
    pub sigma_r_grid: Vec<f64>,
    pub theta1_deg: f64,
    pub n_directions: usize,
    pub n_eval_sequences: usize,
    /// Window length `T` in steps; windows hold `T + 1` observations.
    pub window_steps: usize,
    pub n_prob_segments: usize,
    pub target_p: f64,
    pub burn_in: usize,
    pub attractor_samples: usize,
    pub attractor_thin: usize,
    pub filter: FilterKind,
    pub conditioning: Conditioning,
    pub prior_mode: PriorMode,
    /// Upper bound on windows drawn per world when rejection sampling.
    pub max_rejection_windows: usize,
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub master_seed: u64,
}

/// `n` equispaced values on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                lo * (1.0 - f) + hi * f
            })
            .collect(),
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = L63Params::default();
        Self {
            lambda_grid: linspace(0.0, 40.0, 10),
            sigma_q_grid: linspace(0.1, 0.5, 10),
            sigma_r_grid: linspace(0.1, 1.0, 10),
            theta1_deg: -140.0,
            n_directions: 10,
            n_eval_sequences: 100,
            window_steps: 20,
            n_prob_segments: 50_000,
            target_p: 0.01,
            burn_in: DEFAULT_BURN_IN,
            attractor_samples: 10_000,
            attractor_thin: DEFAULT_THIN,
            filter: FilterKind::Enkf(EnkfConfig::default()),
            conditioning: Conditioning::EventConditioned,
            prior_mode: PriorMode::PerWorld,
            max_rejection_windows: 2_000_000,
            sigma: base.sigma,
            rho: base.rho,
            beta: base.beta,
            dt: base.dt,
            master_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DadaError::Config(m.to_string()));
        if self.lambda_grid.is_empty() || self.sigma_q_grid.is_empty() || self.sigma_r_grid.is_empty() {
            return bad("all grids must be nonempty");
        }
        if self.window_steps < 1 {
            return bad("window_steps must be >= 1");
        }
        if self.n_directions == 0 || self.n_eval_sequences == 0 {
            return bad("n_directions and n_eval_sequences must be positive");
        }
        if !(self.target_p > 0.0 && self.target_p <= 1.0) {
            return bad("target_p must be in (0, 1]");
        }
        if (self.n_prob_segments as f64) * self.target_p < 1.0 {
            return bad("n_prob_segments too small for target_p");
        }
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return bad("lambda values must be finite and >= 0");
        }
        if self.sigma_q_grid.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return bad("sigma_q values must be finite and >= 0");
        }
        if self.sigma_r_grid.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return bad("sigma_r values must be finite and > 0");
        }
        if let FilterKind::Enkf(e) = &self.filter {
            if e.ensemble_size < 2 || !(e.inflation > 0.0) {
                return bad("ensemble_size must be >= 2 and inflation > 0");
            }
        } else {
            return bad("the L63 sweep needs the ensemble filter");
        }
        self.params(0.0, 0.1).validate()
    }

    fn params(&self, lambda: f64, sigma_q: f64) -> L63Params {
        L63Params {
            sigma: self.sigma,
            rho: self.rho,
            beta: self.beta,
            lambda,
            theta_deg: self.theta1_deg,
            dt: self.dt,
            sigma_q,
        }
    }

    pub fn n_triplets(&self) -> usize {
        self.lambda_grid.len() * self.sigma_q_grid.len() * self.sigma_r_grid.len()
    }
}

/// Conventional quantities for one `(λ₁, σ_Q, σ_R, φ, u)` quintuplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuintupletSummary {
    pub id: usize,
    pub lambda: f64,
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub direction: usize,
    pub phi: [f64; 3],
    pub u: f64,
    pub p0: EventProbEstimate,
    pub p1: EventProbEstimate,
    pub pn_p: f64,
    pub requested_factual: usize,
    pub requested_counterfactual: usize,
    pub n_factual: usize,
    pub n_counterfactual: usize,
}

impl QuintupletSummary {
    /// `log(p1/p0)`, `+∞` when `p0 = 0`.
    pub fn log_contrast(&self) -> f64 {
        (self.p1.p / self.p0.p).ln()
    }
}

/// Scores of one evaluation sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub quintuplet: usize,
    pub lambda: f64,
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub true_world: World,
    pub log_f0: f64,
    pub log_f1: f64,
    /// `PN_f = 1 − f0/f1`, unclipped.
    pub score_dada: f64,
    /// `PN_p = 1 − p0/p1`, constant within a quintuplet.
    pub score_conv: f64,
    pub log_contrast: f64,
}

impl LabeledScore {
    /// `log f1 − log f0`: a strictly increasing function of `PN_f` that does
    /// not saturate when `f0/f1` overflows.
    pub fn dada_rank_key(&self) -> f64 {
        self.log_f1 - self.log_f0
    }

    pub fn is_factual(&self) -> bool {
        self.true_world == World::Factual
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub lambda: f64,
    pub sigma_q: f64,
    pub sigma_r: f64,
    pub quintuplet: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub quintuplets: Vec<QuintupletSummary>,
    pub scores: Vec<LabeledScore>,
    pub failures: Vec<SweepFailure>,
    /// Number of `(λ₁, σ_Q, σ_R)` tasks attempted.
    pub n_tasks: usize,
    /// Tasks that produced no quintuplet at all.
    pub n_failed_tasks: usize,
}

fn prior_key(p: &L63Params) -> (u64, u64) {
    (p.lambda.to_bits(), p.sigma_q.to_bits())
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn mixture_prior(a: &AttractorSample, b: &AttractorSample) -> Result<GaussianBelief> {
    let mean = (&a.mean + &b.mean) * 0.5;
    let da = &a.mean - &mean;
    let db = &b.mean - &mean;
    let cov = (&a.cov + &b.cov) * 0.5 + (&da * da.transpose() + &db * db.transpose()) * 0.5;
    GaussianBelief::prior(mean, cov)
}

struct TaskOutput {
    quintuplets: Vec<QuintupletSummary>,
    scores: Vec<LabeledScore>,
    failures: Vec<SweepFailure>,
}

/// Runs the full sweep. Failures are collected per task; the sweep itself
/// only errors on an invalid configuration.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;

    let mut worlds: Vec<L63Params> = Vec::new();
    for &q in &cfg.sigma_q_grid {
        for lambda in std::iter::once(0.0).chain(cfg.lambda_grid.iter().copied()) {
            let p = cfg.params(lambda, q);
            if !worlds.iter().any(|w| prior_key(w) == prior_key(&p)) {
                worlds.push(p);
            }
        }
    }
    let attractors: HashMap<(u64, u64), std::result::Result<AttractorSample, DadaError>> = worlds
        .par_iter()
        .map(|p| {
            let key = prior_key(p);
            let mut rng = derive_rng(cfg.master_seed, &[TAG_PRIOR, key.0, key.1]);
            let s = attractor_sample_with(p, cfg.attractor_samples, cfg.attractor_thin, cfg.burn_in, &mut rng);
            (key, s)
        })
        .collect();

    let mut triplets = Vec::with_capacity(cfg.n_triplets());
    for il in 0..cfg.lambda_grid.len() {
        for iq in 0..cfg.sigma_q_grid.len() {
            for ir in 0..cfg.sigma_r_grid.len() {
                triplets.push((il, iq, ir));
            }
        }
    }

    let outputs: Vec<TaskOutput> = triplets
        .par_iter()
        .enumerate()
        .map(|(ti, &(il, iq, ir))| run_triplet(cfg, &attractors, ti, [il, iq, ir]))
        .collect();

    let mut result = SweepResult {
        quintuplets: Vec::new(),
        scores: Vec::new(),
        failures: Vec::new(),
        n_tasks: outputs.len(),
        n_failed_tasks: 0,
    };
    for out in outputs {
        if out.quintuplets.is_empty() {
            result.n_failed_tasks += 1;
        }
        result.quintuplets.extend(out.quintuplets);
        result.scores.extend(out.scores);
        result.failures.extend(out.failures);
    }
    Ok(result)
}

fn run_triplet(
    cfg: &SweepConfig,
    attractors: &HashMap<(u64, u64), std::result::Result<AttractorSample, DadaError>>,
    triplet_index: usize,
    idx: [usize; 3],
) -> TaskOutput {
    let lambda = cfg.lambda_grid[idx[0]];
    let sigma_q = cfg.sigma_q_grid[idx[1]];
    let sigma_r = cfg.sigma_r_grid[idx[2]];
    let fail = |quintuplet: Option<usize>, e: &dyn std::fmt::Display| SweepFailure {
        lambda,
        sigma_q,
        sigma_r,
        quintuplet,
        message: e.to_string(),
    };
    match triplet_inner(cfg, attractors, triplet_index, idx) {
        Ok(out) => out,
        Err(e) => TaskOutput {
            quintuplets: Vec::new(),
            scores: Vec::new(),
            failures: vec![fail(None, &e)],
        },
    }
}

fn triplet_inner(
    cfg: &SweepConfig,
    attractors: &HashMap<(u64, u64), std::result::Result<AttractorSample, DadaError>>,
    triplet_index: usize,
    idx: [usize; 3],
) -> Result<TaskOutput> {
    let [il, iq, ir] = idx.map(|i| i as u64);
    let lambda = cfg.lambda_grid[idx[0]];
    let sigma_q = cfg.sigma_q_grid[idx[1]];
    let sigma_r = cfg.sigma_r_grid[idx[2]];
    let p1 = cfg.params(lambda, sigma_q);
    let p0 = p1.counterfactual();
    let spec1 = HmmSpec::l63(p1, sigma_r)?;
    let spec0 = HmmSpec::l63(p0, sigma_r)?;

    let attractor =
        |p: &L63Params| -> Result<&AttractorSample> { attractors[&prior_key(p)].as_ref().map_err(Clone::clone) };
    let (a1, a0) = (attractor(&p1)?, attractor(&p0)?);
    let (prior1, prior0) = match cfg.prior_mode {
        PriorMode::PerWorld => (a1.prior()?, a0.prior()?),
        PriorMode::Shared => {
            let m = mixture_prior(a1, a0)?;
            (m.clone(), m)
        }
    };
    let factual = WorldModel {
        spec: spec1,
        prior: prior1,
    };
    let counterfactual = WorldModel {
        spec: spec0,
        prior: prior0,
    };

    let mut dir_rng = derive_rng(cfg.master_seed, &[TAG_DIRECTIONS, il, iq, ir]);
    let directions: Vec<DVector<f64>> = (0..cfg.n_directions).map(|_| random_direction(&mut dir_rng)).collect();

    let run = LongRun {
        x0: DVector::from_element(3, 1.0),
        burn_in: cfg.burn_in,
        window_steps: cfg.window_steps,
    };
    // Both worlds share the noise stream so that their frequency estimates
    // differ only through the dynamics.
    let (maxima1, maxima0) = rayon::join(
        || {
            let rng = derive_rng(cfg.master_seed, &[TAG_PROB, il, iq, ir]);
            segment_maxima(&factual.spec, &directions, &run, cfg.n_prob_segments, rng)
        },
        || {
            let rng = derive_rng(cfg.master_seed, &[TAG_PROB, il, iq, ir]);
            segment_maxima(&counterfactual.spec, &directions, &run, cfg.n_prob_segments, rng)
        },
    );
    let (maxima1, maxima0) = (maxima1?, maxima0?);

    let per_direction: Vec<TaskOutput> = (0..cfg.n_directions)
        .into_par_iter()
        .map(|k| {
            let id = triplet_index * cfg.n_directions + k;
            let ctx = QuintupletCtx {
                cfg,
                factual: &factual,
                counterfactual: &counterfactual,
                run: &run,
                key: [il, iq, ir, k as u64],
                id,
                lambda,
                sigma_q,
                sigma_r,
            };
            match ctx.evaluate(k, &directions[k], &maxima1[k], &maxima0[k]) {
                Ok(out) => out,
                Err(e) => TaskOutput {
                    quintuplets: Vec::new(),
                    scores: Vec::new(),
                    failures: vec![SweepFailure {
                        lambda,
                        sigma_q,
                        sigma_r,
                        quintuplet: Some(id),
                        message: e.to_string(),
                    }],
                },
            }
        })
        .collect();

    let mut out = TaskOutput {
        quintuplets: Vec::new(),
        scores: Vec::new(),
        failures: Vec::new(),
    };
    for d in per_direction {
        out.quintuplets.extend(d.quintuplets);
        out.scores.extend(d.scores);
        out.failures.extend(d.failures);
    }
    Ok(out)
}

struct QuintupletCtx<'a> {
    cfg: &'a SweepConfig,
    factual: &'a WorldModel,
    counterfactual: &'a WorldModel,
    run: &'a LongRun,
    key: [u64; 4],
    id: usize,
    lambda: f64,
    sigma_q: f64,
    sigma_r: f64,
}

impl QuintupletCtx<'_> {
    fn evaluate(&self, k: usize, phi: &DVector<f64>, maxima1: &[f64], maxima0: &[f64]) -> Result<TaskOutput> {
        let cfg = self.cfg;
        let u = threshold_from_maxima(maxima1, cfg.target_p)?;
        let est1 = EventProbEstimate::from_maxima(maxima1, u);
        let est0 = EventProbEstimate::from_maxima(maxima0, u);
        let pn_p = pn_conventional(est0.p, est1.p)?;
        let n = cfg.n_eval_sequences;
        let want_f = ((n as f64) * est1.p / (est0.p + est1.p)).round() as usize;
        let want_c = n - want_f.min(n);
        let event = EventSpec::new(phi.clone(), u, cfg.window_steps)?;

        let mut failures = Vec::new();
        let mut sequences: Vec<(World, ObservationSequence)> = Vec::with_capacity(n);
        for (world, wm, want) in [
            (World::Factual, self.factual, want_f),
            (World::Counterfactual, self.counterfactual, want_c),
        ] {
            if want == 0 {
                continue;
            }
            let wtag = u64::from(world == World::Factual);
            let [il, iq, ir, kk] = self.key;
            let rng = derive_rng(cfg.master_seed, &[TAG_EVAL, il, iq, ir, kk, wtag]);
            let got = draw_sequences(&wm.spec, self.run, &event, cfg, want, rng)?;
            if got.len() < want {
                failures.push(self.failure(format!(
                    "{}: drew {} of {} event sequences within {} windows",
                    world.as_str(),
                    got.len(),
                    want,
                    cfg.max_rejection_windows
                )));
            }
            sequences.extend(got.into_iter().map(|y| (world, y)));
        }

        let log_contrast = (est1.p / est0.p).ln();
        let scored: Vec<std::result::Result<LabeledScore, String>> = sequences
            .par_iter()
            .enumerate()
            .map(|(j, (world, y))| {
                let [il, iq, ir, kk] = self.key;
                let seed = derive_seed(cfg.master_seed, &[TAG_FILTER, il, iq, ir, kk, j as u64]);
                let (t0, t1) = both_traces(y, self.factual, self.counterfactual, &cfg.filter, seed)
                    .map_err(|e| format!("sequence {j}: {e}"))?;
                let (log_f0, log_f1) = (t0.total(), t1.total());
                Ok(LabeledScore {
                    quintuplet: self.id,
                    lambda: self.lambda,
                    sigma_q: self.sigma_q,
                    sigma_r: self.sigma_r,
                    true_world: *world,
                    log_f0,
                    log_f1,
                    score_dada: causal_probs_from_evidence(log_f0, log_f1).pn,
                    score_conv: pn_p,
                    log_contrast,
                })
            })
            .collect();
        let mut scores = Vec::with_capacity(scored.len());
        for s in scored {
            match s {
                Ok(s) => scores.push(s),
                Err(m) => failures.push(self.failure(m)),
            }
        }
        let n_factual = scores.iter().filter(|s| s.is_factual()).count();
        let summary = QuintupletSummary {
            id: self.id,
            lambda: self.lambda,
            sigma_q: self.sigma_q,
            sigma_r: self.sigma_r,
            direction: k,
            phi: [phi[0], phi[1], phi[2]],
            u,
            p0: est0,
            p1: est1,
            pn_p,
            requested_factual: want_f,
            requested_counterfactual: want_c,
            n_factual,
            n_counterfactual: scores.len() - n_factual,
        };
        Ok(TaskOutput {
            quintuplets: vec![summary],
            scores,
            failures,
        })
    }

    fn failure(&self, message: String) -> SweepFailure {
        SweepFailure {
            lambda: self.lambda,
            sigma_q: self.sigma_q,
            sigma_r: self.sigma_r,
            quintuplet: Some(self.id),
            message,
        }
    }
}

fn draw_sequences<R: Rng>(
    spec: &HmmSpec,
    run: &LongRun,
    event: &EventSpec,
    cfg: &SweepConfig,
    want: usize,
    rng: R,
) -> Result<Vec<ObservationSequence>> {
    let mut stream = WindowStream::new(spec, run, rng)?;
    let mut out = Vec::with_capacity(want);
    let mut drawn = 0;
    while out.len() < want && drawn < cfg.max_rejection_windows {
        let (_, y) = stream.next_window()?;
        drawn += 1;
        if cfg.conditioning == Conditioning::Unconditioned || event_occurs(&y, event) {
            out.push(y);
        }
    }
    Ok(out)
}

/// Gini indices of both methods over a subset of the scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniRow {
    pub lo: f64,
    pub hi: f64,
    pub n_factual: usize,
    pub n_counterfactual: usize,
    /// `None` when the subset holds a single class.
    pub gini_dada: Option<f64>,
    pub gini_conv: Option<f64>,
}

/// ROC curves `(dada, conventional)` over the given scores.
pub fn roc_pair(scores: &[&LabeledScore]) -> Result<(RocCurve, RocCurve)> {
    let labels: Vec<bool> = scores.iter().map(|s| s.is_factual()).collect();
    let dada: Vec<f64> = scores.iter().map(|s| s.dada_rank_key()).collect();
    let conv: Vec<f64> = scores.iter().map(|s| s.score_conv).collect();
    Ok((roc_curve(&dada, &labels)?, roc_curve(&conv, &labels)?))
}

fn gini_row(lo: f64, hi: f64, subset: &[&LabeledScore]) -> GiniRow {
    let n_factual = subset.iter().filter(|s| s.is_factual()).count();
    let pair = roc_pair(subset).ok();
    GiniRow {
        lo,
        hi,
        n_factual,
        n_counterfactual: subset.len() - n_factual,
        gini_dada: pair.as_ref().map(|p| p.0.gini),
        gini_conv: pair.as_ref().map(|p| p.1.gini),
    }
}

/// One row per distinct value of `key`, ascending.
pub fn gini_by_value(scores: &[LabeledScore], key: impl Fn(&LabeledScore) -> f64) -> Vec<GiniRow> {
    let mut values: Vec<f64> = scores.iter().map(&key).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let subset: Vec<&LabeledScore> = scores.iter().filter(|s| key(s) == v).collect();
            gini_row(v, v, &subset)
        })
        .collect()
}

/// One row per half-open bin `[edges[i], edges[i+1])`; the last bin is closed.
pub fn gini_by_bins(scores: &[LabeledScore], key: impl Fn(&LabeledScore) -> f64, edges: &[f64]) -> Vec<GiniRow> {
    edges
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let last = i + 2 == edges.len();
            let subset: Vec<&LabeledScore> = scores
                .iter()
                .filter(|s| {
                    let k = key(s);
                    k >= w[0] && (k < w[1] || (last && k <= w[1]))
                })
                .collect();
            gini_row(w[0], w[1], &subset)
        })
        .collect()
}

/// Bin edges on the `log(p1/p0)` axis.
pub fn default_contrast_edges() -> Vec<f64> {
    vec![f64::NEG_INFINITY, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, f64::INFINITY]
}
