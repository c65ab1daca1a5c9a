//! Conversions between result types and CSV tables.

use std::path::Path;

use dada_core::evidence::World;
use dada_core::experiments::sweep::{GiniRow, LabeledScore, QuintupletSummary};
use dada_core::experiments::{EvidenceRow, RocCurve};
use dada_core::models::{ObservationSequence, Trajectory};
use nalgebra::DVector;

use crate::error::{CliError, CliResult};
use crate::output::{fmt_g, fmt_opt, Table};

pub fn trajectory_table(traj: &Trajectory, with_time: bool) -> Table {
    let n = traj.states.first().map_or(0, |x| x.len());
    let mut header = vec!["t_step".to_string()];
    if with_time {
        header.push("time_day".into());
    }
    header.extend((1..=n).map(|i| format!("x{i}")));
    let mut t = Table::with_header(header);
    for (k, x) in traj.states.iter().enumerate() {
        let mut row = vec![k.to_string()];
        if with_time {
            row.push(fmt_g(k as f64 * traj.dt_per_step));
        }
        row.extend(x.iter().map(|&v| fmt_g(v)));
        t.push(row);
    }
    t
}

pub fn observation_table(y: &ObservationSequence) -> Table {
    let mut header = vec!["t_step".to_string()];
    header.extend((1..=y.dim()).map(|i| format!("y{i}")));
    let mut t = Table::with_header(header);
    for (k, v) in y.obs.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(v.iter().map(|&x| fmt_g(x)));
        t.push(row);
    }
    t
}

/// Reads a table whose first column is `t_step` and whose columns named
/// with `prefix` followed by an index hold vector components.
pub fn read_vectors(path: &Path, prefix: char) -> CliResult<Vec<DVector<f64>>> {
    let bad = |m: String| CliError::config(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with(prefix) && h[1..].parse::<usize>().is_ok())
        .map(|(i, _)| i)
        .collect();
    if header.get(0) != Some("t_step") || cols.is_empty() {
        return Err(bad(format!(
            "expected a `t_step` column followed by `{prefix}1`, `{prefix}2`, ..."
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = |rec: &csv::StringRecord| rec.position().map_or(0, |p| p.line());
        let rec = rec.map_err(|e| bad(format!("row {}: {e}", row + 1)))?;
        if rec.len() != header.len() {
            return Err(bad(format!(
                "row {} (line {}): {} fields, expected {}",
                row + 1,
                line(&rec),
                rec.len(),
                header.len()
            )));
        }
        let t: usize = rec[0].trim().parse().map_err(|_| {
            bad(format!(
                "row {} (line {}): bad t_step `{}`",
                row + 1,
                line(&rec),
                &rec[0]
            ))
        })?;
        if t != row {
            return Err(bad(format!(
                "row {} (line {}): t_step {t} out of sequence",
                row + 1,
                line(&rec)
            )));
        }
        let mut v = Vec::with_capacity(cols.len());
        for &c in &cols {
            let x: f64 = rec[c].trim().parse().map_err(|_| {
                bad(format!(
                    "row {} (line {}): column `{}` is not a number: `{}`",
                    row + 1,
                    line(&rec),
                    &header[c],
                    &rec[c]
                ))
            })?;
            if !x.is_finite() {
                return Err(bad(format!(
                    "row {} (line {}): column `{}` is not finite",
                    row + 1,
                    line(&rec),
                    &header[c]
                )));
            }
            v.push(x);
        }
        out.push(DVector::from_vec(v));
    }
    if out.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(out)
}

pub fn evidence_table(rows: &[EvidenceRow]) -> Table {
    let mut t = Table::new(&["t_step", "log_inc0", "log_inc1", "log_f0", "log_f1", "pn"]);
    for r in rows {
        t.push(vec![
            r.t.to_string(),
            fmt_g(r.inc0),
            fmt_g(r.inc1),
            fmt_g(r.cum0),
            fmt_g(r.cum1),
            fmt_g(r.pn),
        ]);
    }
    t
}

pub const SCORE_COLUMNS: [&str; 11] = [
    "quintuplet",
    "lambda",
    "sigma_q",
    "sigma_r",
    "true_world",
    "log_f0",
    "log_f1",
    "log_ratio",
    "score_dada",
    "score_conv",
    "log_contrast",
];

pub fn scores_table(scores: &[LabeledScore]) -> Table {
    let mut t = Table::new(&SCORE_COLUMNS);
    for s in scores {
        t.push(vec![
            s.quintuplet.to_string(),
            fmt_g(s.lambda),
            fmt_g(s.sigma_q),
            fmt_g(s.sigma_r),
            s.true_world.as_str().to_string(),
            fmt_g(s.log_f0),
            fmt_g(s.log_f1),
            fmt_g(s.dada_rank_key()),
            fmt_g(s.score_dada),
            fmt_g(s.score_conv),
            fmt_g(s.log_contrast),
        ]);
    }
    t
}

pub fn read_scores(path: &Path) -> CliResult<Vec<LabeledScore>> {
    let bad = |m: String| CliError::config(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(SCORE_COLUMNS.iter().copied()) {
        return Err(bad(format!("expected columns {}", SCORE_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("row {}: {e}", row + 1)))?;
        let num = |i: usize| -> CliResult<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                bad(format!(
                    "row {}: column `{}` is not a number",
                    row + 1,
                    SCORE_COLUMNS[i]
                ))
            })
        };
        let true_world = match &rec[4] {
            "factual" => World::Factual,
            "counterfactual" => World::Counterfactual,
            other => return Err(bad(format!("row {}: unknown world `{other}`", row + 1))),
        };
        out.push(LabeledScore {
            quintuplet: rec[0]
                .parse()
                .map_err(|_| bad(format!("row {}: bad quintuplet id", row + 1)))?,
            lambda: num(1)?,
            sigma_q: num(2)?,
            sigma_r: num(3)?,
            true_world,
            log_f0: num(5)?,
            log_f1: num(6)?,
            score_dada: num(8)?,
            score_conv: num(9)?,
            log_contrast: num(10)?,
        });
    }
    Ok(out)
}

pub fn quintuplet_table(q: &[QuintupletSummary]) -> Table {
    let mut t = Table::new(&[
        "quintuplet",
        "lambda",
        "sigma_q",
        "sigma_r",
        "direction",
        "phi1",
        "phi2",
        "phi3",
        "u",
        "p0",
        "p0_std_err",
        "p1",
        "p1_std_err",
        "pn_p",
        "n_factual",
        "n_counterfactual",
    ]);
    for s in q {
        t.push(vec![
            s.id.to_string(),
            fmt_g(s.lambda),
            fmt_g(s.sigma_q),
            fmt_g(s.sigma_r),
            s.direction.to_string(),
            fmt_g(s.phi[0]),
            fmt_g(s.phi[1]),
            fmt_g(s.phi[2]),
            fmt_g(s.u),
            fmt_g(s.p0.p),
            fmt_g(s.p0.std_err),
            fmt_g(s.p1.p),
            fmt_g(s.p1.std_err),
            fmt_g(s.pn_p),
            s.n_factual.to_string(),
            s.n_counterfactual.to_string(),
        ]);
    }
    t
}

pub fn roc_table(dada: &RocCurve, conv: &RocCurve) -> Table {
    let mut t = Table::new(&["method", "fpr", "tpr"]);
    for (name, c) in [("dada", dada), ("conventional", conv)] {
        for &(f, p) in &c.points {
            t.push(vec![name.to_string(), fmt_g(f), fmt_g(p)]);
        }
    }
    t
}

pub fn gini_table(key: &str, rows: &[GiniRow]) -> Table {
    let mut t = Table::new(&[key, "n_factual", "n_counterfactual", "gini_dada", "gini_conv"]);
    for r in rows {
        t.push(vec![
            fmt_g(r.lo),
            r.n_factual.to_string(),
            r.n_counterfactual.to_string(),
            fmt_opt(r.gini_dada),
            fmt_opt(r.gini_conv),
        ]);
    }
    t
}

pub fn binned_gini_table(key: &str, rows: &[GiniRow]) -> Table {
    let lo = format!("{key}_lo");
    let hi = format!("{key}_hi");
    let mut t = Table::new(&[&lo, &hi, "n_factual", "n_counterfactual", "gini_dada", "gini_conv"]);
    for r in rows {
        t.push(vec![
            fmt_g(r.lo),
            fmt_g(r.hi),
            r.n_factual.to_string(),
            r.n_counterfactual.to_string(),
            fmt_opt(r.gini_dada),
            fmt_opt(r.gini_conv),
        ]);
    }
    t
}
