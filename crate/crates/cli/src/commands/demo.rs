use std::time::Instant;

use dada_core::experiments::ar1_demo::{ar1_timing, run_ar1_demo};
use serde_json::json;

use super::to_json;
use crate::config::{self, Ar1File, SCHEMA_VERSION};
use crate::error::CliResult;
use crate::output::{fmt_g, json_f64, Manifest, OutputDir, Table};
use crate::Cli;

/// Return levels, tail probability against sample size, and the timing
/// comparison. Timings go to `timing.csv`, which is not reproducible.
pub fn demo_ar1(cli: &Cli) -> CliResult<Manifest> {
    let mut file = match &cli.config {
        Some(p) => config::load::<Ar1File>(p)?,
        None => Ar1File {
            schema_version: SCHEMA_VERSION,
            ar1: Default::default(),
        },
    };
    if let Some(s) = cli.seed {
        file.ar1.master_seed = s;
    }
    file.validate()?;
    let cfg = &file.ar1;

    let start = Instant::now();
    let demo = run_ar1_demo(cfg)?;
    let demo_secs = start.elapsed().as_secs_f64();
    let timing = ar1_timing(cfg)?;

    let mut tail = Table::new(&[
        "n",
        "p_empirical",
        "p_gpd",
        "p_gpd_lo",
        "p_gpd_hi",
        "p_true",
        "xi",
        "sigma",
        "n_exceedances",
    ]);
    for r in &demo.tail {
        tail.push(vec![
            r.n.to_string(),
            fmt_g(r.empirical),
            fmt_g(r.gpd),
            fmt_g(r.lo),
            fmt_g(r.hi),
            fmt_g(cfg.true_p),
            fmt_g(r.xi),
            fmt_g(r.sigma),
            r.n_exceedances.to_string(),
        ]);
    }
    let mut levels = Table::new(&[
        "return_period_windows",
        "level_empirical",
        "level_gpd",
        "level_lo",
        "level_hi",
        "level_true",
    ]);
    for r in &demo.return_levels {
        levels.push(vec![
            fmt_g(r.period),
            fmt_g(r.empirical),
            fmt_g(r.gpd),
            fmt_g(r.lo),
            fmt_g(r.hi),
            fmt_g(r.truth),
        ]);
    }
    let mut times = Table::new(&["n", "window_steps", "mc_seconds", "closed_form_seconds"]);
    for r in &timing {
        times.push(vec![
            r.n.to_string(),
            r.window_steps.to_string(),
            fmt_g(r.mc_seconds),
            fmt_g(r.closed_form_seconds),
        ]);
    }

    let mut out = OutputDir::create(&cli.out, "demo-ar1", cfg.master_seed, to_json(&file))?;
    out.timing("demo", demo_secs);
    out.table("tail_prob_vs_n.csv", &tail)?;
    out.table("return_levels.csv", &levels)?;
    out.volatile_table("timing.csv", &times)?;
    out.json(
        "summary.json",
        &json!({
            "u": json_f64(demo.u),
            "window_mean_std": json_f64(demo.window_sd),
            "p_true": json_f64(cfg.true_p),
            "band_level": json_f64(cfg.band_level),
        }),
    )?;
    out.finish()
}
