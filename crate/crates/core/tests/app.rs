mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use branchsite::app::export::read_coverage_csv;
use branchsite::app::pipeline::{compute, render_report, RunReport, Until};
use branchsite::app::{fixture, load_project, run_pipeline};
use branchsite::candidates::Origin;
use branchsite::geo::planar_distance;
use branchsite::mclp::{solve_exact, ExactOptions};
use branchsite::weights::{consistency_ratio, ComparisonMatrix, RandomIndex};
use branchsite::Error;
use common::*;

#[test]
fn fixture_loads_and_solves() {
    let project = load_project(&fixture_config()).unwrap();
    assert_eq!(project.criteria.len(), 12);
    assert_eq!(project.demand.len(), 20);
    assert_eq!(project.existing.len(), 9);
    assert!(project.synthesis.gates.iter().all(|g| g.passed && g.cr < 0.1));
    let total: f64 = project.criterion_weights().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);

    let run = compute(&project, Until::Solve).unwrap();
    let r = &run.report;
    assert_eq!(r.candidates.len(), 23);
    let proposed = r.candidates.iter().filter(|c| c.origin == Origin::Proposed).count();
    assert_eq!(proposed, 14);
    let curve = r.curve.as_ref().unwrap();
    let pct: Vec<f64> = curve.points.iter().map(|p| p.coverage_pct).collect();
    assert_eq!(pct, vec![90.0, 96.0, 100.0]);

    // Coverage matrix against a per-pair distance recomputation.
    let inst = run.instance.as_ref().unwrap();
    let radius = r.coverage_radius_m.unwrap();
    for (i, area) in inst.areas().iter().enumerate() {
        for (j, site) in inst.sites().iter().enumerate() {
            let want = (planar_distance(area.centroid, site.location) <= radius) as u8;
            assert_eq!(inst.a(i, j), want, "{} / {}", area.id, site.id);
        }
    }
    // Proposed sites keep their separation; existing ones are exempt.
    let sep = project.config.extraction.min_separation;
    let prop: Vec<_> = r.candidates.iter().filter(|c| c.origin == Origin::Proposed).collect();
    for (k, a) in prop.iter().enumerate() {
        for b in &prop[k + 1..] {
            assert!(planar_distance(a.location, b.location) >= sep);
        }
    }
    let _ = solve_exact(inst, 1, ExactOptions::default()).unwrap();
}

#[test]
fn undeclared_and_missing_criteria_are_named() {
    let dir = fixture_copy();
    let cfg = edit_config(dir.path(), |v| {
        let list = v["criteria"].as_array_mut().unwrap();
        list.retain(|c| c["id"] != "parking");
    });
    let err = load_project(&cfg).unwrap_err().to_string();
    assert!(err.contains("parking"), "{err}");
    assert!(err.contains("not a declared criterion"), "{err}");

    let dir = fixture_copy();
    let cfg = edit_config(dir.path(), |v| {
        let list = v["criteria"].as_array_mut().unwrap();
        let mut extra = list[0].clone();
        extra["id"] = "atm_density".into();
        list.push(extra);
    });
    let err = load_project(&cfg).unwrap_err().to_string();
    assert!(err.contains("atm_density") && err.contains("does not appear in the hierarchy"), "{err}");
}

/// 5x5 matrix with an intransitive cycle 0 > 1 > 2 > 0 of strength `k`,
/// tuned so that CR hits `target`.
fn matrix_with_cr(target: f64) -> String {
    let build = |k: f64| {
        let mut rows = vec![vec![1.0; 5]; 5];
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            rows[i][j] = k;
            rows[j][i] = 1.0 / k;
        }
        rows
    };
    let cr = |k: f64| consistency_ratio(&ComparisonMatrix::new(build(k)).unwrap(), &RandomIndex::default()).unwrap();
    let (mut lo, mut hi) = (1.0, 9.0);
    assert!(cr(hi) > target);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cr(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rows = build(hi);
    let labels = ["medicine_center", "business_center", "hotel_tourism", "office", "parking"];
    let mut out = format!(",{}\n", labels.join(","));
    for (label, row) in labels.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{label},{}\n", cells.join(",")));
    }
    out
}

#[test]
fn inconsistent_matrix_fails_the_gate() {
    let dir = fixture_copy();
    fs::write(dir.path().join("matrices/facilities.csv"), matrix_with_cr(0.15)).unwrap();
    match load_project(&dir.path().join("config.json")) {
        Err(e @ Error::Gate { .. }) => {
            assert_eq!(e.exit_code(), 2);
            let Error::Gate { node, cr, threshold } = e else { unreachable!() };
            assert_eq!(node, "facilities");
            assert!((cr - 0.15).abs() < 1e-6);
            assert_eq!(threshold, 0.1);
        }
        other => panic!("expected a gate failure, got {other:?}"),
    }
    fs::write(dir.path().join("matrices/facilities.csv"), matrix_with_cr(0.09)).unwrap();
    load_project(&dir.path().join("config.json")).unwrap();
}

#[test]
fn runs_are_byte_identical() {
    let project = load_project(&fixture_config()).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(&project, a.path()).unwrap();
    let again = load_project(&fixture_config()).unwrap();
    run_pipeline(&again, b.path()).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    assert_eq!(ta, tb);
    for name in ["report.json", "coverage.csv", "candidates.geojson", "score.asc", "score.geojson", "instance.json", "solution.json"] {
        assert!(ta.contains_key(Path::new(name)), "{name}");
    }
    assert_eq!(ta.keys().filter(|k| k.starts_with("rasters")).count(), 12);
    let digest = &project.config_digest;
    for name in ["report.json", "coverage.csv", "candidates.geojson", "instance.json", "solution.json"] {
        let text = String::from_utf8(ta[Path::new(name)].clone()).unwrap();
        assert!(text.contains(digest.as_str()), "{name} lacks the config digest");
    }
}

#[test]
fn coverage_csv_round_trips_and_report_re_renders() {
    let project = load_project(&fixture_config()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&project, out.path()).unwrap();
    let text = fs::read_to_string(out.path().join("coverage.csv")).unwrap();
    assert!(text.starts_with(&format!("# config_digest={}", project.config_digest)));
    let rows = read_coverage_csv(&text).unwrap();
    let pct: Vec<f64> = rows.iter().map(|r| r.covering_percentage).collect();
    assert_eq!(pct, vec![90.0, 96.0, 100.0]);
    let curve = report.curve.as_ref().unwrap();
    for (row, pt) in rows.iter().zip(&curve.points) {
        assert_eq!(row.p, pt.p);
        assert_eq!(row.selected_ids, pt.selected.join(";"));
    }

    let stored = RunReport::from_json(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(stored.to_json(), report.to_json());
    for (rel, body) in render_report(&stored) {
        assert_eq!(fs::read_to_string(out.path().join(&rel)).unwrap(), body, "{}", rel.display());
    }
}

#[test]
fn empty_extraction_skips_the_solver_and_clears_stale_output() {
    let out = tempfile::tempdir().unwrap();
    run_pipeline(&load_project(&fixture_config()).unwrap(), out.path()).unwrap();
    assert!(out.path().join("coverage.csv").exists());

    let dir = fixture_copy();
    let cfg = edit_config(dir.path(), |v| v["extraction"]["min_score"] = 0.99.into());
    let report = run_pipeline(&load_project(&cfg).unwrap(), out.path()).unwrap();
    assert!(report.extraction_empty);
    assert!(report.curve.is_none());
    assert!(!out.path().join("coverage.csv").exists());
    assert!(!out.path().join("solution.json").exists());
    let stored = RunReport::from_json(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert!(stored.extraction_empty);
    assert_eq!(stored.candidates.len(), 9);
}

#[test]
fn held_lock_blocks_writers() {
    let out = tempfile::tempdir().unwrap();
    fs::write(out.path().join(".lock"), "").unwrap();
    let err = run_pipeline(&load_project(&fixture_config()).unwrap(), out.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(!out.path().join("report.json").exists());
    fs::remove_file(out.path().join(".lock")).unwrap();
    run_pipeline(&load_project(&fixture_config()).unwrap(), out.path()).unwrap();
    assert!(!out.path().join(".lock").exists());
    assert!(!out.path().join(".staging").exists());
}

#[test]
fn config_errors_carry_field_paths() {
    let dir = fixture_copy();
    let cfg = edit_config(dir.path(), |v| v["extraction"]["max_proposed"] = "many".into());
    let err = load_project(&cfg).unwrap_err().to_string();
    assert!(err.contains("extraction.max_proposed"), "{err}");

    let dir = fixture_copy();
    let cfg = edit_config(dir.path(), |v| v["bogus"] = 1.into());
    assert!(load_project(&cfg).unwrap_err().to_string().contains("bogus"));

    let dir = fixture_copy();
    fs::remove_file(dir.path().join("matrices/goal.csv")).unwrap();
    let err = load_project(&dir.path().join("config.json")).unwrap_err();
    assert!(err.to_string().contains("hierarchy.matrix"), "{err}");

    let err = load_project(Path::new("/nonexistent/config.json")).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn fixture_regenerates_byte_for_byte() {
    let out = tempfile::tempdir().unwrap();
    let target = out.path().join("isfahan20");
    let summary = fixture::generate(fixture::DEFAULT_SEED, &target).unwrap();
    assert_eq!(summary.candidates, 23);
    assert_eq!(read_tree(&target), read_tree(&fixture_dir()));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_branchsite")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let config = fixture_config();
    let config = config.to_str().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();

    let run = cli(&["pipeline", "--config", config, "--out", o]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("90") && stdout.contains("96") && stdout.contains("100"));

    let weights = cli(&["weights", "--config", config]);
    assert_eq!(weights.status.code(), Some(0));
    assert!(String::from_utf8(weights.stdout).unwrap().contains("familiar_branch"));

    let instance = out.path().join("instance.json");
    let solve = cli(&["solve", "--instance", instance.to_str().unwrap(), "--p", "2"]);
    assert_eq!(solve.status.code(), Some(0));
    let sol: serde_json::Value = serde_json::from_slice(&solve.stdout).unwrap();
    assert_eq!(sol["coverage_pct"], 96.0);

    let refused = cli(&["solve", "--instance", instance.to_str().unwrap(), "--p", "2", "--exact-cap", "5"]);
    assert_eq!(refused.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("greedy"));
    let allowed = cli(&["solve", "--instance", instance.to_str().unwrap(), "--p", "2", "--exact-cap", "5", "--allow-large"]);
    assert_eq!(allowed.status.code(), Some(0));

    assert_eq!(cli(&["weights", "--config", "/nonexistent.json"]).status.code(), Some(4));
    let dir = fixture_copy();
    fs::write(dir.path().join("matrices/facilities.csv"), matrix_with_cr(0.15)).unwrap();
    let gate = cli(&["weights", "--config", dir.path().join("config.json").to_str().unwrap()]);
    assert_eq!(gate.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gate.stderr).contains("facilities"));

    fs::remove_file(out.path().join("coverage.csv")).unwrap();
    assert_eq!(cli(&["report", "--out", o]).status.code(), Some(0));
    assert!(out.path().join("coverage.csv").exists());
}
