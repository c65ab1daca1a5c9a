use std::path::Path;
use std::time::Instant;

use dada_core::experiments::sweep::{
    default_contrast_edges, gini_by_bins, gini_by_value, roc_pair, run_sweep, LabeledScore,
};
use serde_json::json;

use super::to_json;
use crate::config::{self, resolve_filter, SweepFile, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::output::{json_f64, Manifest, OutputDir};
use crate::tables::{binned_gini_table, gini_table, quintuplet_table, read_scores, roc_table, scores_table};
use crate::Cli;

pub fn sweep(cli: &Cli) -> CliResult<Manifest> {
    let mut file = match &cli.config {
        Some(p) => config::load::<SweepFile>(p)?,
        None => SweepFile {
            schema_version: SCHEMA_VERSION,
            sweep: Default::default(),
        },
    };
    if let Some(s) = cli.seed {
        file.sweep.master_seed = s;
    }
    if cli.filter.is_some() || cli.ensemble_size.is_some() {
        file.sweep.filter = resolve_filter(Some(file.sweep.filter), false, cli.filter, cli.ensemble_size)?;
    }
    file.validate()?;
    let cfg = &file.sweep;

    let start = Instant::now();
    let result = run_sweep(cfg)?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut out = OutputDir::create(&cli.out, "sweep", cfg.master_seed, to_json(&file))?;
    out.timing("sweep", elapsed);
    for f in &result.failures {
        out.failure(f);
    }
    out.table("scores.csv", &scores_table(&result.scores))?;
    out.table("quintuplets.csv", &quintuplet_table(&result.quintuplets))?;
    write_roc_tables(&mut out, &result.scores)?;
    out.json(
        "sweep_summary.json",
        &json!({
            "tasks": result.n_tasks,
            "failed_tasks": result.n_failed_tasks,
            "failures": result.failures.len(),
            "quintuplets": result.quintuplets.len(),
            "sequences": result.scores.len(),
        }),
    )?;
    let all_failed = result.n_tasks > 0 && result.n_failed_tasks == result.n_tasks;
    let manifest = out.finish()?;
    if all_failed {
        return Err(CliError::runtime(format!(
            "all {} sweep tasks failed; see {}",
            result.n_tasks,
            cli.out.join(crate::output::MANIFEST).display()
        )));
    }
    Ok(manifest)
}

pub fn roc(cli: &Cli, scores: &Path) -> CliResult<Manifest> {
    let scores_v = read_scores(scores)?;
    let mut out = OutputDir::create(
        &cli.out,
        "roc",
        cli.seed.unwrap_or(0),
        json!({ "scores": scores.display().to_string() }),
    )?;
    write_roc_tables(&mut out, &scores_v)?;
    out.finish()
}

/// `roc_overall.csv`, the grouped Gini tables and `roc_summary.json`.
pub fn write_roc_tables(out: &mut OutputDir, scores: &[LabeledScore]) -> CliResult<()> {
    let all: Vec<&LabeledScore> = scores.iter().collect();
    let (dada, conv) = roc_pair(&all).map_err(|e| CliError::runtime(format!("overall ROC: {e}")))?;
    out.table("roc_overall.csv", &roc_table(&dada, &conv))?;
    out.table(
        "gini_by_lambda.csv",
        &gini_table("lambda", &gini_by_value(scores, |s| s.lambda)),
    )?;
    out.table(
        "gini_by_sigmaQ.csv",
        &gini_table("sigma_q", &gini_by_value(scores, |s| s.sigma_q)),
    )?;
    out.table(
        "gini_by_sigmaR.csv",
        &gini_table("sigma_r", &gini_by_value(scores, |s| s.sigma_r)),
    )?;
    out.table(
        "gini_by_contrast.csv",
        &binned_gini_table(
            "log_contrast",
            &gini_by_bins(scores, |s| s.log_contrast, &default_contrast_edges()),
        ),
    )?;
    out.json(
        "roc_summary.json",
        &json!({
            "sequences": scores.len(),
            "factual": scores.iter().filter(|s| s.is_factual()).count(),
            "auc_dada": json_f64(dada.auc),
            "gini_dada": json_f64(dada.gini),
            "auc_conv": json_f64(conv.auc),
            "gini_conv": json_f64(conv.gini),
        }),
    )
}
