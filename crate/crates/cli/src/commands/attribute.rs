use std::path::Path;

use dada_core::evidence::{causal_probs_from_evidence, FilterKind};
use dada_core::experiments::attractor::attractor_sample;
use dada_core::experiments::evidence_figure_export;
use dada_core::experiments::traces::{evidence_gap_study, GapStudyConfig, WorldModel};
use dada_core::filters::GaussianBelief;
use dada_core::models::ObservationSequence;
use dada_core::seeds::{derive_rng, derive_seed};
use serde_json::json;

use super::{load_model, to_json};
use crate::config::{resolve_filter, ModelConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_g, json_f64, Manifest, OutputDir, Table};
use crate::tables::{evidence_table, read_vectors};
use crate::Cli;

const PRIOR_STREAM: u64 = 0xA77;
const FILTER_STREAM: u64 = 0xF17;

pub fn attribute(
    cli: &Cli,
    obs: Option<&Path>,
    factual: &Path,
    counterfactual: Option<&Path>,
    repeat: Option<usize>,
) -> CliResult<Manifest> {
    let f = load_model(factual)?;
    match (obs, repeat) {
        (Some(_), Some(_)) => Err(CliError::config("--obs and --repeat are mutually exclusive")),
        (None, None) => Err(CliError::config("attribute needs --obs <file> or --repeat <n>")),
        (Some(obs), None) => {
            let cf = counterfactual.ok_or_else(|| CliError::config("--obs needs --counterfactual <config>"))?;
            single(cli, obs, f, load_model(cf)?)
        }
        (None, Some(n)) => {
            if counterfactual.is_some() {
                return Err(CliError::config(
                    "with --repeat the counterfactual is the factual model without forcing; drop --counterfactual",
                ));
            }
            repeated(cli, f, n)
        }
    }
}

/// Prior from the config, else the moments of the model's attractor.
fn prior_for(cfg: &ModelConfig, seed: u64) -> CliResult<GaussianBelief> {
    if let Some(p) = cfg.explicit_prior()? {
        return Ok(p);
    }
    let Some(p) = cfg.l63() else {
        return Err(CliError::config("linear models need an explicit `prior`"));
    };
    let key = [
        PRIOR_STREAM,
        p.sigma.to_bits(),
        p.rho.to_bits(),
        p.beta.to_bits(),
        p.lambda.to_bits(),
        p.theta_deg.to_bits(),
        p.dt.to_bits(),
        p.sigma_q.to_bits(),
    ];
    let mut rng = derive_rng(seed, &key);
    Ok(attractor_sample(&p, cfg.attractor_samples, &mut rng)?.prior()?)
}

fn filter_for(cli: &Cli, f: &ModelConfig, c: Option<&ModelConfig>) -> CliResult<FilterKind> {
    let configured = match (f.filter, c.and_then(|c| c.filter)) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::config(
                "factual and counterfactual configs name different filters",
            ))
        }
        (a, b) => a.or(b),
    };
    let linear = f.l63().is_none() || c.is_some_and(|c| c.l63().is_none());
    resolve_filter(configured, linear, cli.filter, cli.ensemble_size)
}

fn single(cli: &Cli, obs: &Path, f: ModelConfig, c: ModelConfig) -> CliResult<Manifest> {
    let seed = cli.seed.unwrap_or(f.seed);
    let y = ObservationSequence::new(read_vectors(obs, 'y')?)?;
    let factual = WorldModel {
        spec: f.spec()?,
        prior: prior_for(&f, seed)?,
    };
    let counterfactual = WorldModel {
        spec: c.spec()?,
        prior: prior_for(&c, seed)?,
    };
    for (name, w) in [("factual", &factual), ("counterfactual", &counterfactual)] {
        if w.spec.obs_dim() != y.dim() {
            return Err(CliError::config(format!(
                "{}: observations have {} components but the {name} model observes {}",
                obs.display(),
                y.dim(),
                w.spec.obs_dim()
            )));
        }
    }
    let filter = filter_for(cli, &f, Some(&c))?;
    let filter_seed = derive_seed(seed, &[FILTER_STREAM]);
    let rows = evidence_figure_export(&y, &factual, &counterfactual, &filter, filter_seed)?;
    let last = rows.last().expect("nonempty sequence");
    let probs = causal_probs_from_evidence(last.cum0, last.cum1);

    let config =
        json!({ "factual": to_json(&f), "counterfactual": to_json(&c), "observations": obs.display().to_string() });
    let mut out = OutputDir::create(&cli.out, "attribute", seed, config)?;
    out.table("evidence.csv", &evidence_table(&rows))?;
    out.json(
        "summary.json",
        &json!({
            "steps": rows.len() - 1,
            "log_f0": json_f64(last.cum0),
            "log_f1": json_f64(last.cum1),
            "pn": json_f64(probs.pn),
            "pn_clipped": json_f64(probs.pn_clipped()),
            "ps": json_f64(probs.ps),
            "pns": json_f64(probs.pns),
            "filter": to_json(&filter),
            "filter_seed": filter_seed,
        }),
    )?;
    out.finish()
}

fn repeated(cli: &Cli, f: ModelConfig, n_seeds: usize) -> CliResult<Manifest> {
    let seed = cli.seed.unwrap_or(f.seed);
    let params = f
        .l63()
        .ok_or_else(|| CliError::config("--repeat needs the l63 model"))?;
    if f.steps == 0 || n_seeds == 0 {
        return Err(CliError::config(
            "--repeat needs steps >= 1 and at least one repetition",
        ));
    }
    let filter = filter_for(cli, &f, None)?;
    let study_cfg = GapStudyConfig {
        params,
        sigma_r: f.sigma_r.expect("validated l63 config"),
        steps: f.steps,
        n_seeds,
        filter,
        attractor_samples: f.attractor_samples,
        master_seed: seed,
    };
    let study = evidence_gap_study(&study_cfg)?;

    let mut gap = Table::new(&["t_step", "mean_log_f1_minus_log_f0"]);
    for (t, g) in study.mean_gap.iter().enumerate() {
        gap.push(vec![t.to_string(), fmt_g(*g)]);
    }
    let mut finals = Table::new(&["repetition", "log_f0", "log_f1", "pn"]);
    for (k, ((l0, l1), pn)) in study.log_evidence.iter().zip(&study.final_pn).enumerate() {
        finals.push(vec![k.to_string(), fmt_g(*l0), fmt_g(*l1), fmt_g(*pn)]);
    }
    let positive = study.final_pn.iter().filter(|&&p| p > 0.0).count();
    let nondecreasing = study.mean_gap.windows(2).all(|w| w[1] >= w[0]);

    let mut out = OutputDir::create(&cli.out, "attribute", seed, to_json(&study_cfg))?;
    out.table("gap_study.csv", &gap)?;
    out.table("final_pn.csv", &finals)?;
    out.json(
        "summary.json",
        &json!({
            "repetitions": n_seeds,
            "steps": f.steps,
            "final_pn_positive": positive,
            "mean_gap_nondecreasing": nondecreasing,
            "filter": to_json(&filter),
        }),
    )?;
    out.finish()
}
