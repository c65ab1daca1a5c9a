use dada_core::experiments::attractor::{attractor_sample_with, leading_plane, project};
use dada_core::experiments::{kde2d, scott_bandwidth, Grid2d};
use dada_core::models::L63Params;
use dada_core::seeds::derive_rng;
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::to_json;
use crate::config::{self, AttractorFile};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_g, json_f64, Manifest, OutputDir, Table};
use crate::Cli;

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    v.iter().map(|&x| json_f64(x)).collect()
}

fn mat_json(m: &DMatrix<f64>) -> serde_json::Value {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| json_f64(m[(i, j)]))
                .collect::<serde_json::Value>()
        })
        .collect()
}

/// Attractor moments of both worlds and their densities on the factual
/// leading plane.
pub fn attractor(cli: &Cli) -> CliResult<Manifest> {
    let path = super::required_config(cli)?;
    let mut file: AttractorFile = config::load(path)?;
    if let Some(s) = cli.seed {
        file.attractor.seed = s;
    }
    file.validate()?;
    let a = &file.attractor;
    let factual = L63Params::from(a.model);
    let counterfactual = factual.counterfactual();

    let (s1, s0) = rayon::join(
        || attractor_sample_with(&factual, a.samples, a.thin, a.burn_in, &mut derive_rng(a.seed, &[1])),
        || {
            attractor_sample_with(
                &counterfactual,
                a.samples,
                a.thin,
                a.burn_in,
                &mut derive_rng(a.seed, &[0]),
            )
        },
    );
    let (s1, s0) = (s1?, s0?);
    let plane = leading_plane(&s1.points)?;
    let p1 = project(&s1.points, &plane);
    let p0 = project(&s0.points, &plane);
    let bw = scott_bandwidth(&p1);
    let both: Vec<[f64; 2]> = p1.iter().chain(&p0).copied().collect();
    let grid = Grid2d::covering(&both, bw, a.pad, a.grid[0], a.grid[1]);
    let (k1, k0) = rayon::join(|| kde2d(&p1, &grid, bw), || kde2d(&p0, &grid, bw));
    let (k1, k0) = (k1?, k0?);
    if k1.density.iter().any(|v| !v.is_finite()) {
        return Err(CliError::runtime("density estimate is not finite"));
    }

    let mut kde = Table::new(&["u", "v", "density_factual", "density_counterfactual", "difference"]);
    let (xs, ys) = (grid.xs(), grid.ys());
    for (iy, &v) in ys.iter().enumerate() {
        for (ix, &u) in xs.iter().enumerate() {
            let (d1, d0) = (k1.density[(iy, ix)], k0.density[(iy, ix)]);
            kde.push(vec![fmt_g(u), fmt_g(v), fmt_g(d1), fmt_g(d0), fmt_g(d1 - d0)]);
        }
    }
    let mut out = OutputDir::create(&cli.out, "attractor", a.seed, to_json(&file))?;
    out.table("kde.csv", &kde)?;
    out.json(
        "attractor_summary.json",
        &json!({
            "factual": { "mean": vec_json(&s1.mean), "cov": mat_json(&s1.cov) },
            "counterfactual": { "mean": vec_json(&s0.mean), "cov": mat_json(&s0.cov) },
            "plane": [vec_json(&plane[0]), vec_json(&plane[1])],
            "bandwidth": [json_f64(bw[0]), json_f64(bw[1])],
            "integral_factual": json_f64(k1.integral()),
            "integral_counterfactual": json_f64(k0.integral()),
        }),
    )?;
    out.finish()
}
