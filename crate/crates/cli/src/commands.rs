//! Implementations of the pipeline subcommands. Each stage reads the
//! previous stage's artifacts from the output directory, writes its own
//! atomically, and drops a metadata file with input hashes and seeds.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde_json::json;

use lrdetect::attacks::{
    congestion_census, evaluate_consequence_with, random_attack, read_records,
    targeted_attack_with, AttackError, AttackRecord, DcopfSolver,
};
use lrdetect::detector::{calibrate, DetectorModel};
use lrdetect::eval::{
    grid_overload_fa_csv, grid_shift_footprint_csv, metrics_table, roc_csv, run_kfold, EvalConfig,
};
use lrdetect::grid::parse_matpower;
use lrdetect::grouping::{build_groups, coverage_stats, rank_loads, GroupSet};
use lrdetect::history::{load_csv_history, make_folds, LoadHistory};
use lrdetect::localize::{
    assign_probabilities, compare_schemes, damaging_records, estimate_likelihood_curves,
    fit_load_stats,
};
use lrdetect::GridCase;

use crate::artifacts::{atomic_write, out_path, Metadata};
use crate::config::{AttackKindConfig, HistorySource, RunConfig};
use crate::error::CliError;

pub struct Ctx {
    pub cfg: RunConfig,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn meta(&self, command: &str) -> Result<Metadata, CliError> {
        let mut meta = Metadata::new(command);
        if let Some(path) = &self.config_path {
            meta.input(path)?;
        }
        Ok(meta)
    }

    fn case_path(&self) -> PathBuf {
        PathBuf::from(&self.cfg.case_path)
    }

    fn history_path(&self) -> PathBuf {
        match &self.cfg.history {
            HistorySource::Csv { path } => PathBuf::from(path),
            HistorySource::Synthetic { .. } => out_path(&self.out_dir, "history.csv"),
        }
    }

    fn load_case(&self) -> Result<GridCase, CliError> {
        load_case(&self.case_path())
    }

    fn load_history(&self, case: &GridCase) -> Result<LoadHistory, CliError> {
        let path = self.history_path();
        if !path.exists() {
            if matches!(self.cfg.history, HistorySource::Synthetic { .. }) {
                return Err(CliError::Data(format!(
                    "{} not found; run synthesize-history first",
                    path.display()
                )));
            }
            return Err(CliError::Data(format!("history file {} not found", path.display())));
        }
        let history = load_csv_history(&path, case)?;
        Ok(history)
    }

    fn load_groups(&self) -> Result<GroupSet, CliError> {
        let path = out_path(&self.out_dir, "groups.json");
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::Data(format!("{} not found ({e}); run make-groups first", path.display()))
        })?;
        Ok(GroupSet::from_json(&text)?)
    }

    fn load_attacks(&self) -> Result<Vec<AttackRecord>, CliError> {
        let path = out_path(&self.out_dir, "attacks.jsonl");
        if !path.exists() {
            return Err(CliError::Data(format!(
                "{} not found; run gen-attacks first",
                path.display()
            )));
        }
        Ok(read_records(&path)?)
    }
}

pub fn load_case(path: &Path) -> Result<GridCase, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let case = if path.extension().is_some_and(|e| e == "json") {
        GridCase::from_json(&text)?
    } else {
        parse_matpower(&text)?
    };
    Ok(case)
}

fn warn(message: &str) {
    eprintln!("{}", json!({"warning": message}));
}

pub fn cmd_case_info(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let total_mw: f64 = case.loads.iter().map(|l| l.base_mw).sum();
    let summary = json!({
        "case": ctx.cfg.case_path,
        "base_mva": case.base_mva,
        "buses": case.buses.len(),
        "branches": case.branches.len(),
        "in_service_branches": case.branches.iter().filter(|b| b.in_service).count(),
        "generators": case.generators.len(),
        "loads": case.loads.len(),
        "slack_bus": case.slack_bus,
        "total_base_load_mw": total_mw,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

pub fn cmd_synthesize_history(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let HistorySource::Synthetic { hours, seed, params } = &ctx.cfg.history else {
        return Err(CliError::Config(
            "history source is a CSV file; nothing to synthesize".into(),
        ));
    };
    let history = lrdetect::history::gen_synthetic_history(&case, *hours, *seed, params)?;
    let path = out_path(&ctx.out_dir, "history.csv");
    atomic_write(&path, history.to_csv().as_bytes())?;
    let mut meta = ctx.meta("synthesize-history")?;
    meta.input(&ctx.case_path())?;
    meta.seed("history", *seed);
    meta.output(&path);
    meta.write(&ctx.out_dir)?;
    println!(
        "{}",
        json!({"written": path.display().to_string(), "hours": hours, "loads": history.n_loads()})
    );
    Ok(())
}

pub fn cmd_make_groups(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let history = ctx.load_history(&case)?;
    let g = &ctx.cfg.grouping;
    let ranking = rank_loads(&case, &history, g.basis)?;
    let groups = build_groups(&case, &ranking, g.r_g, g.n_g)?;
    if groups.truncated {
        warn(&format!(
            "ranking exhausted after {} of {} requested groups",
            groups.groups.len(),
            g.n_g
        ));
    }
    let coverage = coverage_stats(&groups, &case)?;
    let path = out_path(&ctx.out_dir, "groups.json");
    atomic_write(&path, groups.to_json()?.as_bytes())?;
    let mut meta = ctx.meta("make-groups")?;
    meta.input(&ctx.case_path())?;
    meta.input(&ctx.history_path())?;
    meta.output(&path);
    meta.write(&ctx.out_dir)?;
    println!(
        "{}",
        json!({
            "written": path.display().to_string(),
            "groups": groups.groups.len(),
            "truncated": groups.truncated,
            "covered_fraction": coverage.covered_fraction,
            "uncovered_with_covered_neighbor_fraction":
                coverage.uncovered_with_covered_neighbor_fraction,
        })
    );
    Ok(())
}

pub fn cmd_calibrate(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let history = ctx.load_history(&case)?;
    let groups = ctx.load_groups()?;
    let plan = make_folds(history.n_hours(), ctx.cfg.folds.k, ctx.cfg.folds.seed)?;
    let roles = plan.roles(0);
    let alpha = if ctx.cfg.alphas.len() == 1 { ctx.cfg.alphas[0] } else { 1.0 };
    let model = calibrate(&groups, &history, &roles.hist, &roles.train, alpha)?;
    let plan_path = out_path(&ctx.out_dir, "fold_plan.json");
    atomic_write(&plan_path, plan.to_json().as_bytes())?;
    let model_path = out_path(&ctx.out_dir, "detector_model.json");
    atomic_write(&model_path, model.to_json()?.as_bytes())?;
    let mut meta = ctx.meta("calibrate")?;
    meta.input(&ctx.case_path())?;
    meta.input(&ctx.history_path())?;
    meta.input(&out_path(&ctx.out_dir, "groups.json"))?;
    meta.seed("folds", ctx.cfg.folds.seed);
    meta.output(&plan_path);
    meta.output(&model_path);
    meta.write(&ctx.out_dir)?;
    println!(
        "{}",
        json!({
            "written": model_path.display().to_string(),
            "alpha": alpha,
            "hist_hours": roles.hist.len(),
            "train_hours": roles.train.len(),
        })
    );
    Ok(())
}

/// Parse a single-vector CSV: optional `hour` column, a `load_*` header
/// row, exactly one data row.
fn parse_vector(text: &str, n_loads: usize) -> Result<Vec<f64>, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data("vector file is empty".into()))?;
    let skip_first = header.split(',').next().map(str::trim) == Some("hour");
    let row = lines
        .next()
        .ok_or_else(|| CliError::Data("vector file has no data row".into()))?;
    if lines.next().is_some() {
        return Err(CliError::Data("vector file must contain exactly one data row".into()));
    }
    let fields: Vec<&str> = row.split(',').collect();
    let values = if skip_first { &fields[1..] } else { &fields[..] };
    if values.len() != n_loads {
        return Err(CliError::Data(format!(
            "vector has {} values, case has {n_loads} loads",
            values.len()
        )));
    }
    values
        .iter()
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Data(format!("cannot parse vector value {v:?}")))
        })
        .collect()
}

pub fn cmd_detect(
    ctx: &Ctx,
    model_path: Option<PathBuf>,
    vector_path: &Path,
) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let history = ctx.load_history(&case)?;
    let model_path = model_path.unwrap_or_else(|| out_path(&ctx.out_dir, "detector_model.json"));
    let text = std::fs::read_to_string(&model_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", model_path.display())))?;
    let model = DetectorModel::from_json(&text)?;
    model.check_fingerprint(&history)?;
    let vector_text = std::fs::read_to_string(vector_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", vector_path.display())))?;
    let vector = parse_vector(&vector_text, history.n_loads())?;
    let alpha = if ctx.cfg.alphas.len() == 1 { Some(ctx.cfg.alphas[0]) } else { None };
    let verdict = model.classify(&history, &vector, alpha)?;
    println!("{}", serde_json::to_string_pretty(&verdict).expect("verdict serializes"));
    Ok(())
}

pub fn cmd_gen_attacks(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let history = ctx.load_history(&case)?;
    let a = &ctx.cfg.attacks;
    let n_hours = history.n_hours();
    let stride = (n_hours / a.max_hours.max(1)).max(1);
    let mut records = Vec::new();
    let mut skipped = 0usize;
    match a.kind {
        AttackKindConfig::Random => {
            let mut counter = 0u64;
            for hour in (0..n_hours).step_by(stride) {
                for &footprint in &a.footprints {
                    for &shift in &a.shifts {
                        counter += 1;
                        match random_attack(
                            history.hour(hour),
                            hour,
                            footprint,
                            shift,
                            a.seed.wrapping_add(counter),
                            a.balanced,
                        ) {
                            Ok(r) => records.push(r),
                            Err(AttackError::EmptyFootprint) => skipped += 1,
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
        }
        AttackKindConfig::Targeted => {
            let solver = DcopfSolver::new(&case)?;
            let census = congestion_census(&case, &history, a.congestion_threshold)?;
            if census.hours.is_empty() {
                return Err(CliError::Infeasible(format!(
                    "dispatch infeasible for all {} hours",
                    census.infeasible_hours.len()
                )));
            }
            let mut attacked_hours = 0usize;
            for hc in &census.hours {
                if hc.congested.is_empty() {
                    continue;
                }
                if attacked_hours == a.max_hours {
                    break;
                }
                attacked_hours += 1;
                for &target in &hc.congested {
                    for &shift in &a.shifts {
                        match targeted_attack_with(
                            &solver,
                            history.hour(hc.hour),
                            hc.hour,
                            target,
                            shift,
                            a.r_a,
                        ) {
                            Ok(mut r) => {
                                let c = evaluate_consequence_with(
                                    &solver,
                                    history.hour(hc.hour),
                                    &r,
                                )?;
                                r.overload_pct = Some(c.overload_pct);
                                records.push(r);
                            }
                            Err(AttackError::Infeasible(_)) => skipped += 1,
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
        }
    }
    if records.is_empty() {
        return Err(CliError::Infeasible(format!(
            "no attacks could be generated ({skipped} infeasible)"
        )));
    }
    let path = out_path(&ctx.out_dir, "attacks.jsonl");
    let mut jsonl = String::new();
    for r in &records {
        jsonl.push_str(
            &serde_json::to_string(r)
                .map_err(|e| CliError::Data(format!("record serialization: {e}")))?,
        );
        jsonl.push('\n');
    }
    atomic_write(&path, jsonl.as_bytes())?;
    let mut meta = ctx.meta("gen-attacks")?;
    meta.input(&ctx.case_path())?;
    meta.input(&ctx.history_path())?;
    meta.seed("attacks", a.seed);
    meta.count("records", records.len());
    meta.count("skipped_infeasible", skipped);
    meta.output(&path);
    meta.write(&ctx.out_dir)?;
    println!(
        "{}",
        json!({
            "written": path.display().to_string(),
            "records": records.len(),
            "skipped_infeasible": skipped,
        })
    );
    Ok(())
}

pub fn cmd_evaluate(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let history = ctx.load_history(&case)?;
    let groups = ctx.load_groups()?;
    let records = ctx.load_attacks()?;
    let cfg = EvalConfig {
        k: ctx.cfg.folds.k,
        fold_seed: ctx.cfg.folds.seed,
        alphas: ctx.cfg.alphas.clone(),
    };
    let outcome = run_kfold(&history, &groups, &records, &cfg)?;
    let grid_alpha = if ctx.cfg.alphas.contains(&1.0) { 1.0 } else { ctx.cfg.alphas[0] };
    let files = [
        ("roc.csv", roc_csv(&outcome)),
        ("grid_shift_footprint.csv", grid_shift_footprint_csv(&outcome, grid_alpha)),
        ("grid_overload_fa.csv", grid_overload_fa_csv(&outcome)),
        (
            "metrics.json",
            serde_json::to_string_pretty(&metrics_table(&outcome))
                .map_err(|e| CliError::Data(format!("metrics serialization: {e}")))?,
        ),
    ];
    let mut meta = ctx.meta("evaluate")?;
    meta.input(&ctx.case_path())?;
    meta.input(&ctx.history_path())?;
    meta.input(&out_path(&ctx.out_dir, "groups.json"))?;
    meta.input(&out_path(&ctx.out_dir, "attacks.jsonl"))?;
    meta.seed("folds", ctx.cfg.folds.seed);
    meta.count("attacks", records.len());
    meta.count("normative_hours", outcome.normative.len());
    meta.count("alphas", outcome.alphas.len());
    for (name, contents) in &files {
        let path = out_path(&ctx.out_dir, name);
        atomic_write(&path, contents.as_bytes())?;
        meta.output(&path);
    }
    meta.write(&ctx.out_dir)?;
    let table = metrics_table(&outcome);
    let at_one = table.row(grid_alpha, lrdetect::eval::Stratum::All);
    println!(
        "{}",
        json!({
            "attacks": records.len(),
            "normative_hours": outcome.normative.len(),
            "alpha": grid_alpha,
            "detection_probability": at_one.and_then(|r| r.detection_probability()),
            "false_alarm_rate": at_one.and_then(|r| r.false_alarm_rate()),
        })
    );
    Ok(())
}

pub fn cmd_localize(ctx: &Ctx) -> Result<(), CliError> {
    let case = ctx.load_case()?;
    let history = ctx.load_history(&case)?;
    let groups = ctx.load_groups()?;
    let records = ctx.load_attacks()?;
    let loc = &ctx.cfg.localization;
    let damaging = damaging_records(&records, loc.params.overload_threshold_pct);
    if damaging.is_empty() {
        return Err(CliError::Data(format!(
            "no attacks with overload >= {}%; localization needs damaging attacks",
            loc.params.overload_threshold_pct
        )));
    }
    let mut order: Vec<usize> = (0..damaging.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(loc.split_seed);
    order.shuffle(&mut rng);
    let n_train = ((loc.params.train_fraction * damaging.len() as f64).round() as usize)
        .clamp(1, damaging.len().saturating_sub(1).max(1));
    let train: Vec<&AttackRecord> = order[..n_train].iter().map(|&i| damaging[i]).collect();
    let test: Vec<&AttackRecord> = order[n_train..].iter().map(|&i| damaging[i]).collect();
    if test.is_empty() {
        return Err(CliError::Data("attack split left no held-out records".into()));
    }

    let plan = make_folds(history.n_hours(), ctx.cfg.folds.k, ctx.cfg.folds.seed)?;
    let roles = plan.roles(0);
    let detector = calibrate(&groups, &history, &roles.hist, &roles.train, loc.alpha)?;
    let stats =
        fit_load_stats(&groups, &history, &roles.hist, &roles.train, loc.params.delta_cap)?;
    let model = estimate_likelihood_curves(&detector, &history, stats, &train, &loc.params)?;
    let comparison = compare_schemes(&model, &detector, &history, &test)?;

    // Per-load CSV over the held-out records.
    let mut csv = String::from("record,load,violated,z,q,attacked\n");
    for (ri, record) in test.iter().enumerate() {
        let verdict = detector.classify(&history, &record.false_loads, None)?;
        let assessments =
            assign_probabilities(&model, &detector, &history, &verdict, &record.false_loads)?;
        for a in assessments {
            let violated = a.violated.map_or("NA".to_string(), |v| u8::from(v).to_string());
            let z = a.z.map_or("NA".to_string(), |z| format!("{z:.6}"));
            csv.push_str(&format!(
                "{ri},{},{violated},{z},{:.6},{}\n",
                a.load,
                a.q,
                u8::from(record.attacked_mask[a.load]),
            ));
        }
    }

    let model_path = out_path(&ctx.out_dir, "localization_model.json");
    atomic_write(&model_path, model.to_json()?.as_bytes())?;
    let csv_path = out_path(&ctx.out_dir, "localization.csv");
    atomic_write(&csv_path, csv.as_bytes())?;
    let cmp_path = out_path(&ctx.out_dir, "scheme_comparison.json");
    let cmp_json = serde_json::to_string_pretty(&comparison)
        .map_err(|e| CliError::Data(format!("comparison serialization: {e}")))?;
    atomic_write(&cmp_path, cmp_json.as_bytes())?;
    let mut meta = ctx.meta("localize")?;
    meta.input(&ctx.case_path())?;
    meta.input(&ctx.history_path())?;
    meta.input(&out_path(&ctx.out_dir, "groups.json"))?;
    meta.input(&out_path(&ctx.out_dir, "attacks.jsonl"))?;
    meta.seed("split", loc.split_seed);
    meta.seed("folds", ctx.cfg.folds.seed);
    meta.count("damaging_attacks", damaging.len());
    meta.count("train_attacks", train.len());
    meta.count("test_attacks", test.len());
    meta.output(&model_path);
    meta.output(&csv_path);
    meta.output(&cmp_path);
    meta.write(&ctx.out_dir)?;
    println!("{cmp_json}");
    Ok(())
}
