//! Per-step evidence of one observation sequence under both worlds.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conventional::{LongRun, WindowStream};
use crate::error::{DadaError, Result};
use crate::evidence::{causal_probs_from_evidence, evidence_trace, EvidenceTrace, FilterKind, World};
use crate::filters::GaussianBelief;
use crate::models::{HmmSpec, L63Params, ObservationSequence};
use crate::seeds::{derive_rng, derive_seed, rng_from_seed};

use super::attractor::attractor_sample;

/// One row of the evidence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub t: usize,
    pub inc0: f64,
    pub inc1: f64,
    pub cum0: f64,
    pub cum1: f64,
    /// PN over the window `[0, t]`, unclipped.
    pub pn: f64,
}

/// A world's model and prior for assimilation.
#[derive(Debug, Clone)]
pub struct WorldModel {
    pub spec: HmmSpec,
    pub prior: GaussianBelief,
}

/// Assimilates `y` in both worlds with the same filter seed and tabulates
/// increments, cumulative evidences and the running PN.
pub fn evidence_figure_export(
    y: &ObservationSequence,
    factual: &WorldModel,
    counterfactual: &WorldModel,
    filter: &FilterKind,
    filter_seed: u64,
) -> Result<Vec<EvidenceRow>> {
    let (t0, t1) = both_traces(y, factual, counterfactual, filter, filter_seed)?;
    Ok(tabulate(&t0, &t1))
}

/// Evidence traces `(counterfactual, factual)`. Both filters consume an
/// identically seeded stream, so identical worlds give identical traces.
pub fn both_traces(
    y: &ObservationSequence,
    factual: &WorldModel,
    counterfactual: &WorldModel,
    filter: &FilterKind,
    filter_seed: u64,
) -> Result<(EvidenceTrace, EvidenceTrace)> {
    let t0 = evidence_trace(
        &counterfactual.spec,
        &counterfactual.prior,
        y,
        filter,
        World::Counterfactual,
        &mut rng_from_seed(filter_seed),
    )?;
    let t1 = evidence_trace(
        &factual.spec,
        &factual.prior,
        y,
        filter,
        World::Factual,
        &mut rng_from_seed(filter_seed),
    )?;
    Ok((t0, t1))
}

pub fn tabulate(t0: &EvidenceTrace, t1: &EvidenceTrace) -> Vec<EvidenceRow> {
    (0..t0.increments.len().min(t1.increments.len()))
        .map(|t| EvidenceRow {
            t,
            inc0: t0.increments[t],
            inc1: t1.increments[t],
            cum0: t0.cumulative[t],
            cum1: t1.cumulative[t],
            pn: causal_probs_from_evidence(t0.cumulative[t], t1.cumulative[t]).pn,
        })
        .collect()
}

/// Repeated twin experiment: factual-generated sequences assimilated in both
/// worlds, one independent sequence per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudyConfig {
    /// Factual-world parameters; the counterfactual drops the forcing.
    pub params: L63Params,
    pub sigma_r: f64,
    pub steps: usize,
    pub n_seeds: usize,
    pub filter: FilterKind,
    pub attractor_samples: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStudy {
    /// Final PN for each seed.
    pub final_pn: Vec<f64>,
    /// `(log f0, log f1)` for each seed.
    pub log_evidence: Vec<(f64, f64)>,
    /// Seed-averaged `cum1[t] − cum0[t]`.
    pub mean_gap: Vec<f64>,
}

pub fn world_models(
    params: &L63Params,
    sigma_r: f64,
    samples: usize,
    master_seed: u64,
) -> Result<(WorldModel, WorldModel)> {
    let cf = params.counterfactual();
    let prior_of = |p: &L63Params| -> Result<GaussianBelief> {
        let mut rng = derive_rng(master_seed, &[0xA77, p.lambda.to_bits(), p.sigma_q.to_bits()]);
        attractor_sample(p, samples, &mut rng)?.prior()
    };
    let factual = WorldModel {
        spec: HmmSpec::l63(*params, sigma_r)?,
        prior: prior_of(params)?,
    };
    let counterfactual = WorldModel {
        spec: HmmSpec::l63(cf, sigma_r)?,
        prior: prior_of(&cf)?,
    };
    Ok((factual, counterfactual))
}

pub fn evidence_gap_study(cfg: &GapStudyConfig) -> Result<GapStudy> {
    use rayon::prelude::*;
    if cfg.n_seeds == 0 {
        return Err(DadaError::Config("n_seeds must be positive".into()));
    }
    let (factual, counterfactual) = world_models(&cfg.params, cfg.sigma_r, cfg.attractor_samples, cfg.master_seed)?;
    let runs = (0..cfg.n_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let run = LongRun::new(DVector::from_element(3, 1.0), cfg.steps);
            let mut stream = WindowStream::new(&factual.spec, &run, derive_rng(cfg.master_seed, &[0x5EC, s]))?;
            let (_, y) = stream.next_window()?;
            let seed = derive_seed(cfg.master_seed, &[0xF17, s]);
            both_traces(&y, &factual, &counterfactual, &cfg.filter, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean_gap = vec![0.0; cfg.steps + 1];
    let mut final_pn = Vec::with_capacity(runs.len());
    let mut log_evidence = Vec::with_capacity(runs.len());
    for (t0, t1) in &runs {
        log_evidence.push((t0.total(), t1.total()));
        for (t, g) in mean_gap.iter_mut().enumerate() {
            *g += t1.cumulative[t] - t0.cumulative[t];
        }
        final_pn.push(causal_probs_from_evidence(t0.total(), t1.total()).pn);
    }
    mean_gap.iter_mut().for_each(|g| *g /= runs.len() as f64);
    Ok(GapStudy {
        final_pn,
        log_evidence,
        mean_gap,
    })
}
