mod support;

use std::fs;

use support::*;
use tempfile::tempdir;

#[test]
fn missing_dt_is_a_config_error() {
    let dir = tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "f.json",
        r#"{"schema_version": 1, "model": {"kind": "l63", "lambda": 20}, "sigma_r": 0.5}"#,
    );
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dt"), "{err}");
}

#[test]
fn unknown_keys_and_bad_versions_are_rejected() {
    let dir = tempdir().unwrap();
    let extra = write(
        dir.path(),
        "a.json",
        &l63_config(20.0, 0.5, 5, 1).replace("\"steps\"", "\"stepz\""),
    );
    assert_eq!(
        run(&["simulate", "--config", s(&extra), "--out", s(dir.path())])
            .status
            .code(),
        Some(2)
    );
    let ver = write(
        dir.path(),
        "b.json",
        &l63_config(20.0, 0.5, 5, 1).replace("\"schema_version\": 1", "\"schema_version\": 7"),
    );
    assert_eq!(
        run(&["simulate", "--config", s(&ver), "--out", s(dir.path())])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn corrupt_observation_row_is_reported() {
    let dir = tempdir().unwrap();
    let f = write(dir.path(), "f.json", &l63_config(20.0, 0.5, 3, 1));
    let c = write(dir.path(), "c.json", &l63_config(0.0, 0.5, 3, 1));
    let obs = write(dir.path(), "obs.csv", "t_step,y1,y2,y3\n0,1,2,3\n1,1,oops,3\n");
    let out = run(&[
        "attribute",
        "--obs",
        s(&obs),
        "--factual",
        s(&f),
        "--counterfactual",
        s(&c),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn observation_dimension_mismatch_is_a_config_error() {
    let dir = tempdir().unwrap();
    let f = write(dir.path(), "f.json", &l63_config(20.0, 0.5, 3, 1));
    let c = write(dir.path(), "c.json", &l63_config(0.0, 0.5, 3, 1));
    let obs = write(dir.path(), "obs.csv", "t_step,y1,y2\n0,1,2\n1,1,2\n");
    let out = run(&[
        "attribute",
        "--obs",
        s(&obs),
        "--factual",
        s(&f),
        "--counterfactual",
        s(&c),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_steps_gives_single_row_files() {
    let dir = tempdir().unwrap();
    let f = write(dir.path(), "f.json", &l63_config(20.0, 0.5, 0, 4));
    let c = write(dir.path(), "c.json", &l63_config(0.0, 0.5, 0, 4));
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--config", s(&f), "--out", s(&sim)]);
    assert_eq!(read_csv(&sim.join("trajectory.csv")).len(), 1);
    assert_eq!(read_csv(&sim.join("observations.csv")).len(), 1);
    let att = dir.path().join("att");
    let obs = sim.join("observations.csv");
    run_ok(&[
        "attribute",
        "--obs",
        s(&obs),
        "--factual",
        s(&f),
        "--counterfactual",
        s(&c),
        "--out",
        s(&att),
    ]);
    assert_eq!(read_csv(&att.join("evidence.csv")).len(), 1);
}

#[test]
fn identical_worlds_give_zero_pn_and_reruns_are_byte_identical() {
    let dir = tempdir().unwrap();
    let f = write(dir.path(), "f.json", &l63_config(20.0, 0.5, 30, 9));
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--config", s(&f), "--out", s(&sim)]);
    let obs = sim.join("observations.csv");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "attribute",
            "--obs",
            s(&obs),
            "--factual",
            s(&f),
            "--counterfactual",
            s(&f),
            "--out",
            s(out),
        ]);
    }
    let summary = read_json(&a.join("summary.json"));
    assert_eq!(summary["pn"].as_f64().unwrap(), 0.0);
    assert_eq!(deterministic_files(&a), deterministic_files(&b));
}

#[test]
fn observe_reproduces_simulated_observations() {
    let dir = tempdir().unwrap();
    let f = write(dir.path(), "f.json", &l63_config(20.0, 0.5, 12, 2));
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--config", s(&f), "--out", s(&sim)]);
    let again = dir.path().join("again");
    run_ok(&[
        "observe",
        "--trajectory",
        s(&sim.join("trajectory.csv")),
        "--config",
        s(&f),
        "--out",
        s(&again),
    ]);
    // the trajectory file carries 12 significant digits, so compare numerically
    let a = read_csv(&sim.join("observations.csv"));
    let b = read_csv(&again.join("observations.csv"));
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        for k in ["y1", "y2", "y3"] {
            assert!((num(ra, k) - num(rb, k)).abs() < 1e-9 * num(ra, k).abs().max(1.0));
        }
    }
}

#[test]
fn kf_is_refused_for_the_nonlinear_model() {
    let dir = tempdir().unwrap();
    let f = write(dir.path(), "f.json", &l63_config(20.0, 0.5, 5, 1));
    let out = run(&[
        "attribute",
        "--repeat",
        "2",
        "--factual",
        s(&f),
        "--filter",
        "kf",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_tables_are_well_formed_and_thread_count_independent() {
    let dir = tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"schema_version": 1, "sweep": {"lambda_grid": [20.0], "sigma_q_grid": [0.1], "sigma_r_grid": [0.5],
            "n_directions": 2, "n_eval_sequences": 20, "n_prob_segments": 2000, "burn_in": 1000,
            "attractor_samples": 1000, "master_seed": 3}}"#,
    );
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    run_ok(&["sweep", "--config", s(&cfg), "--workers", "1", "--out", s(&one)]);
    run_ok(&["sweep", "--config", s(&cfg), "--workers", "4", "--out", s(&four)]);
    assert_eq!(deterministic_files(&one), deterministic_files(&four));

    let roc = read_csv(&one.join("roc_overall.csv"));
    for method in ["dada", "conventional"] {
        let pts: Vec<_> = roc.iter().filter(|r| r["method"] == method).collect();
        assert_eq!((num(pts[0], "fpr"), num(pts[0], "tpr")), (0.0, 0.0));
        let last = pts.last().unwrap();
        assert_eq!((num(last, "fpr"), num(last, "tpr")), (1.0, 1.0));
    }
    for name in [
        "gini_by_lambda.csv",
        "gini_by_sigmaQ.csv",
        "gini_by_sigmaR.csv",
        "gini_by_contrast.csv",
    ] {
        for row in read_csv(&one.join(name)) {
            for key in ["gini_dada", "gini_conv"] {
                // "nan" marks a group holding a single class
                let g = num(&row, key);
                if !g.is_nan() {
                    assert!((-1.0..=1.0).contains(&g), "{name}: {g}");
                }
            }
        }
    }

    // the roc command reproduces the tables from the scores file
    let again = dir.path().join("again");
    run_ok(&["roc", "--scores", s(&one.join("scores.csv")), "--out", s(&again)]);
    assert_eq!(
        fs::read(one.join("roc_overall.csv")).unwrap(),
        fs::read(again.join("roc_overall.csv")).unwrap()
    );
}

#[test]
fn linear_model_attribution_runs_with_the_kalman_filter() {
    let dir = tempdir().unwrap();
    let model = |m: f64| {
        format!(
            r#"{{"schema_version": 1, "model": {{"kind": "linear", "m": [[{m}]], "q": [[0.1]], "r": [[0.2]]}},
                "steps": 20, "seed": 5, "prior": {{"mean": [0.0], "cov": [[1.0]]}}, "filter": {{"kind": "kf"}}}}"#
        )
    };
    let f = write(dir.path(), "f.json", &model(0.9));
    let c = write(dir.path(), "c.json", &model(0.2));
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--config", s(&f), "--out", s(&sim)]);
    let att = dir.path().join("att");
    run_ok(&[
        "attribute",
        "--obs",
        s(&sim.join("observations.csv")),
        "--factual",
        s(&f),
        "--counterfactual",
        s(&c),
        "--out",
        s(&att),
    ]);
    let rows = read_csv(&att.join("evidence.csv"));
    assert_eq!(rows.len(), 21);
    let pn = read_json(&att.join("summary.json"))["pn"].as_f64().unwrap();
    assert!(pn <= 1.0);
}
