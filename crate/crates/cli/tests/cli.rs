//! End-to-end pipeline runs through the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lrdetect::attacks::DcopfSolver;
use lrdetect::grid::{Branch, Bus, BusType, Generator, GridCase, LoadPoint};
use lrdetect::history::{gen_synthetic_history, SynthParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lrdetect"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Clustered case with a deliberately tight mid-ring branch so targeted
/// attacks produce overloads: 6 rings of 8 buses, cheap generation at bus
/// 1, expensive at bus 41.
fn build_case() -> GridCase {
    let n_clusters = 6;
    let cluster_size = 8;
    let n = n_clusters * cluster_size;
    let buses = (1..=n)
        .map(|id| Bus {
            id,
            bus_type: if id == 1 { BusType::Slack } else { BusType::Pq },
        })
        .collect();
    let mut branches = Vec::new();
    for c in 0..n_clusters {
        let first = c * cluster_size + 1;
        let last = (c + 1) * cluster_size;
        for b in first..last {
            branches.push(Branch {
                from_bus: b,
                to_bus: b + 1,
                reactance: 0.08 + 0.01 * ((b % 5) as f64),
                rate_a: 4000.0,
                in_service: true,
            });
        }
        branches.push(Branch {
            from_bus: last,
            to_bus: first,
            reactance: 0.1,
            rate_a: 4000.0,
            in_service: true,
        });
        if c + 1 < n_clusters {
            branches.push(Branch {
                from_bus: last,
                to_bus: last + 1,
                reactance: 0.12,
                rate_a: 4000.0,
                in_service: true,
            });
        }
    }
    let loads = (0..n)
        .map(|i| LoadPoint {
            index: i,
            bus: i + 1,
            base_mw: 40.0 + (i * 17 % 60) as f64,
        })
        .collect();
    let mut case = GridCase {
        base_mva: 100.0,
        buses,
        branches,
        generators: vec![
            Generator { bus: 1, p_min: 0.0, p_max: 6000.0, cost_linear: 1.0 },
            Generator { bus: 41, p_min: 0.0, p_max: 3000.0, cost_linear: 6.0 },
        ],
        loads,
        slack_bus: 1,
    }
    .validated()
    .unwrap();
    // Rate a mid-ring edge of cluster 2 at 88% of its peak unconstrained
    // flow over a probe history, matching the attack generator's census.
    let target = case
        .branches
        .iter()
        .position(|br| br.from_bus == 20 && br.to_bus == 21)
        .unwrap();
    let params = SynthParams { regional_volatility: 0.06, region_size: 8, ..SynthParams::default() };
    let probe = gen_synthetic_history(&case, 100, 5, &params).unwrap();
    let solver = DcopfSolver::new(&case).unwrap();
    let mut peak = 0.0f64;
    for t in 0..100 {
        let d = solver.solve(probe.hour(t), false).unwrap();
        peak = peak.max(solver.flows(&d.p_gen, probe.hour(t)).unwrap().branch_mw[target].abs());
    }
    case.branches[target].rate_a = 0.88 * peak;
    case.validated().unwrap()
}

fn write_config(dir: &Path, case_path: &Path, out_dir: &Path) -> PathBuf {
    let config = serde_json::json!({
        "case_path": case_path.display().to_string(),
        "history": {"synthetic": {"hours": 400, "seed": 5, "params": {
            "base_level": 0.7, "daily_weight": 0.2, "seasonal_weight": 0.1,
            "noise": 0.03, "peak_hour": 17.0,
            "regional_volatility": 0.06, "region_size": 8
        }}},
        "grouping": {"r_g": 7, "n_g": 35, "basis": "HistoryMax"},
        "folds": {"k": 10, "seed": 3},
        "attacks": {
            "kind": "targeted", "shifts": [0.10, 0.15], "footprints": [0.5],
            "balanced": true, "r_a": 4, "congestion_threshold": 0.9,
            "seed": 9, "max_hours": 120
        },
        "localization": {
            "epsilon": 1e-3, "sigma_floor": 1e-6, "delta_cap": 10.0,
            "bin_width": 0.25, "min_bin_count": 2, "min_class_samples": 5,
            "overload_threshold_pct": 1.0, "train_fraction": 0.7,
            "split_seed": 13, "alpha": 1.0
        },
        "out_dir": out_dir.display().to_string()
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let case = build_case();
    let case_path = dir.path().join("case.json");
    std::fs::write(&case_path, case.to_json().unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), &case_path, &out_dir);
    let cfg = config.to_str().unwrap();

    // case-info prints a summary
    let out = run_ok(&["--config", cfg, "case-info"]);
    let info: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["loads"], 48);
    assert_eq!(info["slack_bus"], 1);

    run_ok(&["--config", cfg, "synthesize-history"]);
    assert!(out_dir.join("history.csv").exists());
    assert!(out_dir.join("synthesize_history_meta.json").exists());

    // 48 loads cannot seed 35 groups of radius 7: expect the warning.
    let out = run_ok(&["--config", cfg, "make-groups"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "expected truncation warning, got: {stderr}");
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["truncated"], true);
    assert!(summary["covered_fraction"].as_f64().unwrap() > 0.6);

    run_ok(&["--config", cfg, "calibrate"]);
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("detector_model.json")).unwrap())
            .unwrap();
    let hist_hour = model["hist_hours"][0].as_u64().unwrap() as usize;

    // detect on a vector copied from the historical window: no alarm.
    let history_csv = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    let mut lines = history_csv.lines();
    let header = lines.next().unwrap();
    let row = lines.nth(hist_hour).unwrap();
    let vector_path = dir.path().join("vector.csv");
    std::fs::write(&vector_path, format!("{header}\n{row}\n")).unwrap();
    let out = run_ok(&["--config", cfg, "detect", "--vector", vector_path.to_str().unwrap()]);
    let verdict: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdict["alarm"], false);
    for check in verdict["per_group"].as_array().unwrap() {
        assert_eq!(check["distance"].as_f64().unwrap(), 0.0);
    }

    let out = run_ok(&["--config", cfg, "gen-attacks"]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["records"].as_u64().unwrap() > 50);

    let out = run_ok(&["--config", cfg, "evaluate"]);
    for name in ["roc.csv", "grid_shift_footprint.csv", "grid_overload_fa.csv", "metrics.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let roc = std::fs::read_to_string(out_dir.join("roc.csv")).unwrap();
    assert!(roc.starts_with("alpha,fa,dp\n"));
    assert_eq!(roc.lines().count(), 22); // header + 21 alphas
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["detection_probability"].as_f64().unwrap() > 0.5);

    let out = run_ok(&["--config", cfg, "localize"]);
    let cmp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let zscore = cmp["zscore_loss"].as_f64().unwrap();
    let group = cmp["group_loss"].as_f64().unwrap();
    let constant = cmp["constant_loss"].as_f64().unwrap();
    assert!(zscore < group && group < constant, "{zscore} / {group} / {constant}");
    assert!(out_dir.join("localization_model.json").exists());
    let loc_csv = std::fs::read_to_string(out_dir.join("localization.csv")).unwrap();
    assert!(loc_csv.starts_with("record,load,violated,z,q,attacked\n"));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let case = build_case();
    let case_path = dir.path().join("case.json");
    std::fs::write(&case_path, case.to_json().unwrap()).unwrap();

    let mut outputs = Vec::new();
    for run in 0..2 {
        let out_dir = dir.path().join(format!("out{run}"));
        let config = write_config(dir.path(), &case_path, &out_dir);
        let cfg = config.to_str().unwrap();
        run_ok(&["--config", cfg, "synthesize-history"]);
        run_ok(&["--config", cfg, "make-groups"]);
        run_ok(&["--config", cfg, "gen-attacks"]);
        run_ok(&["--config", cfg, "evaluate"]);
        let mut bundle = Vec::new();
        for name in ["history.csv", "groups.json", "attacks.jsonl", "roc.csv",
                     "grid_shift_footprint.csv", "grid_overload_fa.csv"] {
            bundle.push(std::fs::read(out_dir.join(name)).unwrap());
        }
        outputs.push(bundle);
    }
    for (a, b) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(a, b, "artifact differs between identical runs");
    }
}

#[test]
fn exit_codes() {
    // 1: no config and no case
    let out = bin().arg("case-info").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value =
        serde_json::from_slice(out.stderr.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(err["kind"], "config");

    // 2: malformed case file
    let dir = tempfile::tempdir().unwrap();
    let bad_case = dir.path().join("bad.m");
    std::fs::write(&bad_case, "function mpc = bad\nmpc.baseMVA = 100;\n").unwrap();
    let out = bin()
        .args(["--case", bad_case.to_str().unwrap(), "case-info"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_slice(out.stderr.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(err["kind"], "data");

    // 3: targeted attacks on a system whose dispatch is infeasible
    let mut case = build_case();
    for g in &mut case.generators {
        g.p_max = 1.0;
    }
    let case_path = dir.path().join("starved.json");
    std::fs::write(&case_path, case.to_json().unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), &case_path, &out_dir);
    let cfg = config.to_str().unwrap();
    run_ok(&["--config", cfg, "synthesize-history"]);
    let out = bin().args(["--config", cfg, "gen-attacks"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err: serde_json::Value =
        serde_json::from_slice(out.stderr.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(err["kind"], "infeasible");
}

#[test]
fn matpower_case_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let case_m = dir.path().join("toy.m");
    std::fs::write(
        &case_m,
        "function mpc = toy\n\
         mpc.baseMVA = 100;\n\
         mpc.bus = [\n1 3 0 0 0 0 1 1 0 138 1 1.1 0.9;\n2 1 50 0 0 0 1 1 0 138 1 1.1 0.9;\n\
         3 1 60 0 0 0 1 1 0 138 1 1.1 0.9;\n4 1 40 0 0 0 1 1 0 138 1 1.1 0.9;\n];\n\
         mpc.gen = [\n1 150 0 100 -100 1 100 1 300 0;\n];\n\
         mpc.branch = [\n1 2 0 0.1 0 100 0 0 0 0 1;\n2 3 0 0.1 0 100 0 0 0 0 1;\n\
         3 4 0 0.1 0 100 0 0 0 0 1;\n1 3 0 0.1 0 100 0 0 0 0 1;\n];\n",
    )
    .unwrap();
    let out = run_ok(&["--case", case_m.to_str().unwrap(), "case-info"]);
    let info: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(info["loads"], 3);
    assert_eq!(info["total_base_load_mw"], 150.0);
}
