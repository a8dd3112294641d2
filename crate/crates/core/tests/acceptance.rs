//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers (run with `--nocapture` to see them).

mod common;

use std::time::Instant;

use common::{balanced_injections, clustered_case, meshed_case, ClusterSpec};
use lrdetect::attacks::{
    congestion_census, evaluate_consequence_with, random_attack, targeted_attack_with,
    AttackRecord, DcopfSolver,
};
use lrdetect::curvefit::fit_exp_decay;
use lrdetect::detector::{calibrate, nn_distance};
use lrdetect::eval::{
    grid_overload_fa_csv, grid_shift_footprint_csv, metrics_table, roc_csv, run_kfold,
    to_basis_points, EvalConfig, EvalOutcome, Stratum,
};
use lrdetect::grid::{dc_power_flow, ptdf};
use lrdetect::grouping::{build_groups, rank_loads, RankingBasis};
use lrdetect::history::{gen_synthetic_history, make_folds, SynthParams};
use lrdetect::localize::{
    assign_probabilities, compare_schemes, damaging_records, estimate_likelihood_curves,
    fit_load_stats, log_loss, LocalizeParams,
};
use lrdetect::{GroupSet, LoadHistory};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn report(id: &str, detail: &str) {
    println!("{id} PASS — {detail}");
}

/// A1: grouped NN distances match an exhaustive brute-force scan exactly
/// on 200 random instances.
#[test]
fn a1_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let n_loads = rng.random_range(5..=50);
        let n_hours = rng.random_range(10..=200);
        let mut values = Vec::with_capacity(n_loads * n_hours);
        for _ in 0..n_loads * n_hours {
            values.push(rng.random_range(0.0..150.0));
        }
        let labels = (0..n_hours).map(|t| t.to_string()).collect();
        let history = LoadHistory::new(n_loads, n_hours, values, labels).unwrap();
        let hours: Vec<usize> = (0..n_hours).collect();
        let mut members: Vec<usize> =
            (0..n_loads).filter(|_| rng.random::<bool>()).collect();
        if members.is_empty() {
            members.push(rng.random_range(0..n_loads));
        }
        let vector: Vec<f64> = (0..n_loads).map(|_| rng.random_range(0.0..150.0)).collect();
        let (d, arg) = nn_distance(&vector, &history, &hours, &members).unwrap();
        // independent exhaustive scan
        let mut best = f64::INFINITY;
        let mut best_r = 0;
        for r in 0..n_hours {
            let dist = members
                .iter()
                .map(|&l| {
                    let diff = vector[l] - history.value(l, r);
                    diff * diff
                })
                .sum::<f64>()
                .sqrt();
            if dist < best {
                best = dist;
                best_r = r;
            }
        }
        let diff = (d - best).abs();
        assert!(diff < 1e-12, "instance {instance}: |{d} - {best}| = {diff}");
        assert_eq!(arg, best_r, "instance {instance}: argmin mismatch");
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "A1 took {elapsed:.1} s, budget 10 s");
    report(
        "A1",
        &format!("200 instances, worst |d - oracle| = {worst:.2e}, {elapsed:.2} s"),
    );
}

/// A2: PTDF route and direct DC solve agree on 100 random balanced
/// injections of a 30-bus case; nodal balance holds everywhere.
#[test]
fn a2_dc_kernel() {
    let start = Instant::now();
    let case = meshed_case(30, 202);
    let m = ptdf(&case).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    let mut worst_flow = 0.0f64;
    let mut worst_balance = 0.0f64;
    for _ in 0..100 {
        let inj = balanced_injections(case.buses.len(), &mut rng);
        let direct = dc_power_flow(&case, &inj).unwrap();
        let via_ptdf = m.apply(&inj);
        for (a, b) in via_ptdf.iter().zip(&direct.branch_mw) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            worst_flow = worst_flow.max(rel);
            assert!(rel < 1e-8, "ptdf {a} vs flow {b}");
        }
        // nodal balance at every bus
        let scale = inj.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
        for (pos, bus) in case.buses.iter().enumerate() {
            let mut net = inj[pos];
            if bus.id == case.slack_bus {
                net += direct.imbalance_mw;
            }
            for (t, br) in case.branches.iter().enumerate() {
                if br.from_bus == bus.id {
                    net -= direct.branch_mw[t];
                }
                if br.to_bus == bus.id {
                    net += direct.branch_mw[t];
                }
            }
            let rel = net.abs() / scale;
            worst_balance = worst_balance.max(rel);
            assert!(rel < 1e-8, "bus {} residual {net}", bus.id);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "A2 took {elapsed:.1} s, budget 5 s");
    report(
        "A2",
        &format!(
            "worst flow rel diff {worst_flow:.2e}, worst nodal residual {worst_balance:.2e}, {elapsed:.2} s"
        ),
    );
}

/// Fixture for A3: 500-load clustered system with spatially correlated
/// hour-to-hour volatility, targeted attacks touching at most 10% of the
/// loads at 15% shift.
fn a3_fixture() -> (Vec<AttackRecord>, LoadHistory, GroupSet, usize) {
    let case = clustered_case(&ClusterSpec {
        n_clusters: 25,
        cluster_size: 20,
        ring_rate: 1e5,
        tie_rate: 1e5,
        load_seed: 41,
        generators: vec![
            (1, 0.0, 60_000.0, 1.0),
            (241, 0.0, 20_000.0, 2.5),
            (490, 0.0, 20_000.0, 4.0),
        ],
    });
    let params = SynthParams {
        regional_volatility: 0.10,
        region_size: 20,
        ..SynthParams::default()
    };
    let history = gen_synthetic_history(&case, 1600, 42, &params).unwrap();
    let ranking = rank_loads(&case, &history, RankingBasis::HistoryMax).unwrap();
    let groups = build_groups(&case, &ranking, 7, 35).unwrap();
    let solver = DcopfSolver::new(&case).unwrap();
    // Mid-arc ring edges split each cluster's loads into opposite-sign
    // sides of the target, which a balanced attack needs; the inter-cluster
    // ties are cut edges and cannot host one.
    let targets: Vec<usize> = (0..25)
        .map(|c| {
            let from = c * 20 + 10;
            case.branches
                .iter()
                .position(|br| br.from_bus == from && br.to_bus == from + 1)
                .unwrap()
        })
        .collect();
    assert_eq!(targets.len(), 25);
    let mut records = Vec::new();
    for (i, hour) in (0..1600).step_by(10).enumerate() {
        let target = targets[i % targets.len()];
        match targeted_attack_with(&solver, history.hour(hour), hour, target, 0.15, 7) {
            Ok(r) => {
                let touched = r.attacked_mask.iter().filter(|&&m| m).count();
                assert!(
                    touched <= 50,
                    "attack touches {touched} loads, above the 10% cap"
                );
                records.push(r);
            }
            Err(_) => continue,
        }
    }
    assert!(records.len() >= 80, "only {} usable attacks", records.len());
    let n_loads = case.n_loads();
    (records, history, groups, n_loads)
}

fn best_dp_within_fa(outcome: &EvalOutcome, fa_budget: f64) -> (f64, f64, f64) {
    let table = metrics_table(outcome);
    let mut best = (0.0, 0.0, f64::NAN); // (dp, fa, alpha)
    for &alpha in &outcome.alphas {
        let row = table.row(alpha, Stratum::All).unwrap();
        let fa = row.false_alarm_rate().unwrap_or(1.0);
        let dp = row.detection_probability().unwrap_or(0.0);
        if fa <= fa_budget && dp > best.0 {
            best = (dp, fa, alpha);
        }
    }
    best
}

/// A3: on the 500-load system the grouped detector reaches DP >= 0.9 at
/// FA <= 5% while the ungrouped baseline stays at DP <= 0.3 on the same
/// attacks and budget.
#[test]
fn a3_dimensionality_failure_reproduction() {
    let start = Instant::now();
    let (records, history, groups, n_loads) = a3_fixture();
    let alphas: Vec<f64> = (50..=250).map(|i| i as f64 / 100.0).collect();
    let cfg = EvalConfig { k: 10, fold_seed: 7, alphas: alphas.clone() };
    let grouped = run_kfold(&history, &groups, &records, &cfg).unwrap();
    let ungrouped_groups = GroupSet::single(n_loads);
    let ungrouped = run_kfold(&history, &ungrouped_groups, &records, &cfg).unwrap();
    let (dp_g, fa_g, alpha_g) = best_dp_within_fa(&grouped, 0.05);
    let (dp_u, fa_u, alpha_u) = best_dp_within_fa(&ungrouped, 0.05);
    assert!(
        dp_g >= 0.9,
        "grouped detector DP {dp_g:.3} at FA {fa_g:.3} (alpha {alpha_g}) below 0.9"
    );
    assert!(
        dp_u <= 0.3,
        "ungrouped detector DP {dp_u:.3} at FA {fa_u:.3} (alpha {alpha_u}) above 0.3"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "A3 took {elapsed:.0} s, budget 300 s");
    report(
        "A3",
        &format!(
            "grouped DP {dp_g:.3} @ FA {fa_g:.3}; ungrouped DP {dp_u:.3} @ FA {fa_u:.3}; {} attacks, {elapsed:.1} s",
            records.len()
        ),
    );
}

/// A4: detection probability is monotone in load shift at fixed footprint
/// and alpha, and saturates at 1.0 for the full-footprint 15% attack.
#[test]
fn a4_sensitivity_trends() {
    let case = clustered_case(&ClusterSpec {
        n_clusters: 10,
        cluster_size: 20,
        ring_rate: 1e5,
        tie_rate: 1e5,
        load_seed: 43,
        generators: vec![(1, 0.0, 40_000.0, 1.0)],
    });
    let history = gen_synthetic_history(&case, 600, 44, &SynthParams::default()).unwrap();
    let shifts = [0.05, 0.10, 0.15];
    let footprints = [0.1, 0.5, 1.0];
    let mut records = Vec::new();
    for (hi, hour) in (0..600).step_by(6).enumerate() {
        for (fi, &fp) in footprints.iter().enumerate() {
            // One seed per (hour, footprint): the same loads and signs are
            // reused across the shift grid, coupling the comparisons.
            let seed = (hi * 31 + fi) as u64;
            for &shift in &shifts {
                records.push(
                    random_attack(history.hour(hour), hour, fp, shift, seed, false).unwrap(),
                );
            }
        }
    }
    let cfg = EvalConfig { k: 10, fold_seed: 9, alphas: vec![1.0] };
    let outcome = run_kfold(&history, &groups_for(&case, &history), &records, &cfg).unwrap();
    let table = metrics_table(&outcome);
    let mut detail = String::new();
    for &fp in &footprints {
        let mut prev = -1.0f64;
        for &shift in &shifts {
            let dp = table
                .row(1.0, Stratum::ShiftFootprint(to_basis_points(shift), to_basis_points(fp)))
                .and_then(|r| r.detection_probability())
                .expect("populated stratum");
            assert!(
                dp >= prev - 0.02,
                "footprint {fp}: DP({shift}) = {dp:.3} dropped more than 0.02 below {prev:.3}"
            );
            prev = prev.max(dp);
            detail.push_str(&format!("fp{:.0}%/s{:.0}%={:.2} ", fp * 100.0, shift * 100.0, dp));
        }
    }
    let saturated = table
        .row(1.0, Stratum::ShiftFootprint(1500, 10_000))
        .and_then(|r| r.detection_probability())
        .unwrap();
    assert_eq!(saturated, 1.0, "full-footprint 15% attacks must all be caught");
    report("A4", detail.trim());
}

fn groups_for(case: &lrdetect::GridCase, history: &LoadHistory) -> GroupSet {
    let ranking = rank_loads(case, history, RankingBasis::HistoryMax).unwrap();
    build_groups(case, &ranking, 7, 35).unwrap()
}

/// Fixture for A5/A6: congested 80-load system, targeted attacks over a
/// shift grid, consequences evaluated, folds fixed.
struct LocalizationRun {
    comparison: lrdetect::localize::SchemeComparison,
    shuffled_loss: f64,
    n_damaging: usize,
}

fn a5_fixture() -> LocalizationRun {
    let mut case = clustered_case(&ClusterSpec {
        n_clusters: 8,
        cluster_size: 10,
        ring_rate: 8_000.0,
        tie_rate: 8_000.0,
        load_seed: 51,
        generators: vec![(1, 0.0, 10_000.0, 1.0), (71, 0.0, 6_000.0, 6.0)],
    });
    // Congest a mid-arc ring edge of cluster 3 (bus 35 -> 36): it carries
    // part of the through-flow toward the downstream clusters, and the
    // cluster's loads sit on both sides of it, so a balanced targeted
    // attack on it exists.
    let target = case
        .branches
        .iter()
        .position(|br| br.from_bus == 35 && br.to_bus == 36)
        .unwrap();
    let params = SynthParams {
        regional_volatility: 0.06,
        region_size: 10,
        ..SynthParams::default()
    };
    let history = gen_synthetic_history(&case, 700, 52, &params).unwrap();
    // Rate it at 88% of the peak unconstrained flow so the base dispatch
    // congests it on a sizable share of hours.
    let solver = DcopfSolver::new(&case).unwrap();
    let mut peak = 0.0f64;
    for t in 0..100 {
        let d = solver.solve(history.hour(t), false).unwrap();
        let f = solver.flows(&d.p_gen, history.hour(t)).unwrap().branch_mw[target];
        peak = peak.max(f.abs());
    }
    case.branches[target].rate_a = 0.88 * peak;
    let case = case.validated().unwrap();

    let solver = DcopfSolver::new(&case).unwrap();
    let census = congestion_census(&case, &history, 0.9).unwrap();
    let mut records = Vec::new();
    for hc in &census.hours {
        if !hc.congested.contains(&target) {
            continue;
        }
        for &shift in &[0.05, 0.10, 0.15] {
            let Ok(mut r) =
                targeted_attack_with(&solver, history.hour(hc.hour), hc.hour, target, shift, 4)
            else {
                continue;
            };
            if let Ok(c) = evaluate_consequence_with(&solver, history.hour(hc.hour), &r) {
                r.overload_pct = Some(c.overload_pct);
                records.push(r);
            }
        }
    }
    let params_loc = LocalizeParams::default();
    let damaging: Vec<&AttackRecord> = damaging_records(&records, params_loc.overload_threshold_pct);
    let n_damaging = damaging.len();
    assert!(n_damaging >= 60, "only {n_damaging} damaging attacks");

    // 70/30 split of the damaging attacks, seeded.
    let mut order: Vec<usize> = (0..n_damaging).collect();
    use rand::seq::SliceRandom;
    let mut rng = ChaCha12Rng::seed_from_u64(53);
    order.shuffle(&mut rng);
    let n_train = (params_loc.train_fraction * n_damaging as f64).round() as usize;
    let train: Vec<&AttackRecord> = order[..n_train].iter().map(|&i| damaging[i]).collect();
    let test: Vec<&AttackRecord> = order[n_train..].iter().map(|&i| damaging[i]).collect();

    // Detector calibrated on fold 0 of the rotation.
    let groups = groups_for(&case, &history);
    let plan = make_folds(history.n_hours(), 10, 54).unwrap();
    let roles = plan.roles(0);
    let detector = calibrate(&groups, &history, &roles.hist, &roles.train, 1.0).unwrap();
    let stats =
        fit_load_stats(&groups, &history, &roles.hist, &roles.train, params_loc.delta_cap)
            .unwrap();
    let model =
        estimate_likelihood_curves(&detector, &history, stats, &train, &params_loc).unwrap();
    let comparison = compare_schemes(&model, &detector, &history, &test).unwrap();

    // Shuffled-z ablation: z-scores permuted within each violation class.
    let mut by_class: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
    let mut flat: Vec<(bool, Option<bool>, Option<f64>)> = Vec::new();
    for record in &test {
        let verdict = detector.classify(&history, &record.false_loads, None).unwrap();
        let asses =
            assign_probabilities(&model, &detector, &history, &verdict, &record.false_loads)
                .unwrap();
        for a in asses {
            if let (Some(v), Some(z)) = (a.violated, a.z) {
                by_class[usize::from(v)].push((flat.len(), z));
            }
            flat.push((record.attacked_mask[a.load], a.violated, a.z));
        }
    }
    let mut shuffled_q: Vec<f64> = flat
        .iter()
        .map(|&(_, v, _)| match v {
            Some(true) => model.baseline_violated,
            Some(false) => model.baseline_clean,
            None => model.baseline_q,
        })
        .collect();
    let eps = model.params.epsilon;
    for (class, curve) in [
        (&by_class[1], &model.curve_violation),
        (&by_class[0], &model.curve_no_violation),
    ] {
        let mut zs: Vec<f64> = class.iter().map(|&(_, z)| z).collect();
        zs.shuffle(&mut rng);
        for (&(idx, _), &z) in class.iter().zip(&zs) {
            shuffled_q[idx] = curve.eval(z, eps);
        }
    }
    for q in shuffled_q.iter_mut() {
        *q = q.clamp(eps, 1.0 - eps);
    }
    let labels: Vec<bool> = flat.iter().map(|&(y, _, _)| y).collect();
    let shuffled_loss = log_loss(&shuffled_q, &labels).unwrap();
    LocalizationRun { comparison, shuffled_loss, n_damaging }
}

/// A5: strict log-loss ordering q(a|v,z) < q(a|v) < q(a) on held-out
/// attacks, every loss inside (0, 1.5) bits; the shuffled-z ablation
/// erases the Z-score advantage.
#[test]
fn a5_localization_ordering() {
    let run = a5_fixture();
    let c = run.comparison;
    assert!(
        c.zscore_loss < c.group_loss && c.group_loss < c.constant_loss,
        "ordering violated: {:.3} / {:.3} / {:.3}",
        c.zscore_loss,
        c.group_loss,
        c.constant_loss
    );
    for (name, loss) in [
        ("zscore", c.zscore_loss),
        ("group", c.group_loss),
        ("constant", c.constant_loss),
    ] {
        assert!(
            loss > 0.0 && loss < 1.5,
            "{name} loss {loss} outside (0, 1.5)"
        );
    }
    // Shuffling the Z-scores within each violation class destroys the
    // curve's entire advantage: the loss falls back to at least the
    // violation-only level (confident-but-mispaired predictions usually
    // push it beyond).
    assert!(
        run.shuffled_loss >= c.zscore_loss,
        "shuffled z must not beat the informed curve: {} vs {}",
        run.shuffled_loss,
        c.zscore_loss
    );
    assert!(
        run.shuffled_loss >= c.group_loss - 0.05,
        "shuffled-z loss {} must not undercut the violation-only loss {}",
        run.shuffled_loss,
        c.group_loss
    );
    report(
        "A5",
        &format!(
            "losses {:.3} < {:.3} < {:.3} bits over {} samples ({} damaging attacks); shuffled z {:.3}",
            c.zscore_loss, c.group_loss, c.constant_loss, c.n_samples, run.n_damaging, run.shuffled_loss
        ),
    );
}

/// A6: the log-loss-minimizing constant equals the empirical attacked
/// fraction, found by grid search over labeled populations.
#[test]
fn a6_constant_prior_optimality() {
    let mut rng = ChaCha12Rng::seed_from_u64(601);
    for &p in &[0.05, 0.13, 0.25, 0.5] {
        let labels: Vec<bool> = (0..5000).map(|_| rng.random::<f64>() < p).collect();
        let fraction = labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64;
        let mut best_q = f64::NAN;
        let mut best_loss = f64::INFINITY;
        let mut q = 0.0001;
        while q < 0.9999 {
            let loss = log_loss(&vec![q; labels.len()], &labels).unwrap();
            if loss < best_loss {
                best_loss = loss;
                best_q = q;
            }
            q += 0.0001;
        }
        assert!(
            (best_q - fraction).abs() <= 1e-3,
            "grid argmin {best_q:.4} vs empirical fraction {fraction:.4}"
        );
    }
    report("A6", "grid argmin matched the empirical fraction within 1e-3 on 4 populations");
}

/// A7: planted exponential-curve parameters recovered from noiseless
/// ratio points to 1e-6.
#[test]
fn a7_curve_fit_recovery() {
    let (a, b, c) = (-0.5, 1.0, 0.9);
    let points: Vec<(f64, f64, f64)> = (0..21)
        .map(|i| {
            let z = i as f64 * 0.25;
            (z, a * (-b * z).exp() + c, 1.0)
        })
        .collect();
    let fit = fit_exp_decay(&points).unwrap();
    assert!((fit.a - a).abs() < 1e-6, "a = {}", fit.a);
    assert!((fit.b - b).abs() < 1e-6, "b = {}", fit.b);
    assert!((fit.c - c).abs() < 1e-6, "c = {}", fit.c);
    report(
        "A7",
        &format!(
            "recovered ({:.8}, {:.8}, {:.8}) vs planted ({a}, {b}, {c})",
            fit.a, fit.b, fit.c
        ),
    );
}

/// A8: classification at full scale (2000 loads, 8784 hours, 35 groups)
/// stays under one second per vector.
#[test]
fn a8_performance_envelope() {
    let case = clustered_case(&ClusterSpec {
        n_clusters: 100,
        cluster_size: 20,
        ring_rate: 1e5,
        tie_rate: 1e5,
        load_seed: 81,
        generators: vec![(1, 0.0, 400_000.0, 1.0)],
    });
    let history = gen_synthetic_history(&case, 8784, 82, &SynthParams::default()).unwrap();
    let groups = groups_for(&case, &history);
    assert_eq!(groups.groups.len(), 35);
    let hist_hours: Vec<usize> = (0..8584).collect();
    let train_hours: Vec<usize> = (8584..8784).collect();
    let model = calibrate(&groups, &history, &hist_hours, &train_hours, 1.0).unwrap();
    let vectors: Vec<Vec<f64>> = (0..10)
        .map(|i| {
            let mut v = history.hour(i * 800).to_vec();
            v[i] *= 1.2;
            v
        })
        .collect();
    let start = Instant::now();
    let mut alarms = 0;
    for v in &vectors {
        let verdict = model.classify(&history, v, None).unwrap();
        alarms += usize::from(verdict.alarm);
    }
    let per_vector = start.elapsed().as_secs_f64() / vectors.len() as f64;
    assert!(
        per_vector < 1.0,
        "classify took {per_vector:.3} s per vector, budget 1 s"
    );
    report(
        "A8",
        &format!(
            "{:.1} ms per vector over {} vectors ({alarms} alarms), n=2000, n_h=8784, n_g=35",
            per_vector * 1e3,
            vectors.len()
        ),
    );
}

/// A9: identical seeds give bit-identical CSV and JSON artifacts.
#[test]
fn a9_determinism() {
    fn pipeline() -> (String, String, String, String) {
        let case = clustered_case(&ClusterSpec {
            n_clusters: 4,
            cluster_size: 8,
            ring_rate: 1e4,
            tie_rate: 1e4,
            load_seed: 91,
            generators: vec![(1, 0.0, 8_000.0, 1.0), (25, 0.0, 4_000.0, 5.0)],
        });
        let history =
            gen_synthetic_history(&case, 300, 92, &SynthParams::default()).unwrap();
        let groups = groups_for(&case, &history);
        let mut records = Vec::new();
        for hour in (0..300).step_by(5) {
            records
                .push(random_attack(history.hour(hour), hour, 0.3, 0.1, hour as u64, true).unwrap());
        }
        let cfg = EvalConfig { k: 10, fold_seed: 93, alphas: lrdetect::eval::default_alphas() };
        let outcome = run_kfold(&history, &groups, &records, &cfg).unwrap();
        let roc = roc_csv(&outcome);
        let grid = grid_shift_footprint_csv(&outcome, 1.0);
        let overload = grid_overload_fa_csv(&outcome);
        let groups_json = groups.to_json().unwrap();
        (roc, grid, overload, groups_json)
    }
    let first = pipeline();
    let second = pipeline();
    assert_eq!(first.0, second.0, "roc.csv differs between runs");
    assert_eq!(first.1, second.1, "grid_shift_footprint.csv differs");
    assert_eq!(first.2, second.2, "grid_overload_fa.csv differs");
    assert_eq!(first.3, second.3, "groups.json differs");
    report("A9", "two seeded pipeline runs produced byte-identical artifacts");
}

/// A10: 1000 fuzzed attack generations all honor the per-load shift bound
/// and (balanced / targeted) net-load invariance.
#[test]
fn a10_attack_invariants() {
    let mut rng = ChaCha12Rng::seed_from_u64(1000);
    let mut checked = 0usize;

    // 800 random attacks over random load vectors, half balanced.
    for i in 0..800u64 {
        let n = rng.random_range(5..200);
        let loads: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..300.0)).collect();
        let footprint = rng.random_range(0.05..1.0);
        let shift = rng.random_range(0.01..0.5);
        let balanced = i % 2 == 0;
        let Ok(r) = random_attack(&loads, 0, footprint, shift, i, balanced) else {
            continue;
        };
        check_record(&loads, &r, shift, balanced);
        checked += 1;
    }

    // 200 targeted attacks on a congested clustered case.
    let case = clustered_case(&ClusterSpec {
        n_clusters: 6,
        cluster_size: 8,
        ring_rate: 1e4,
        tie_rate: 1e4,
        load_seed: 99,
        generators: vec![(1, 0.0, 10_000.0, 1.0), (41, 0.0, 5_000.0, 4.0)],
    });
    let history = gen_synthetic_history(&case, 220, 98, &SynthParams::default()).unwrap();
    let solver = DcopfSolver::new(&case).unwrap();
    let rated: Vec<usize> = (0..case.branches.len()).collect();
    for i in 0..200 {
        let hour = i % 220;
        let target = rated[i % rated.len()];
        let shift = 0.02 + 0.13 * ((i % 10) as f64 / 10.0);
        let Ok(r) = targeted_attack_with(&solver, history.hour(hour), hour, target, shift, 3)
        else {
            continue;
        };
        check_record(history.hour(hour), &r, shift, true);
        checked += 1;
    }
    assert!(checked >= 900, "only {checked} of 1000 generations produced records");
    report("A10", &format!("{checked} fuzzed records honored bounds and invariance"));
}

fn check_record(true_loads: &[f64], r: &AttackRecord, shift: f64, net_invariant: bool) {
    for (l, (f, t)) in r.false_loads.iter().zip(true_loads).enumerate() {
        assert!(
            (f - t).abs() <= shift * t + 1e-9,
            "load {l}: |{f} - {t}| above bound {}",
            shift * t
        );
        assert_eq!(r.attacked_mask[l], f != t, "mask mismatch at {l}");
    }
    if net_invariant {
        let net_true: f64 = true_loads.iter().sum();
        let net_false: f64 = r.false_loads.iter().sum();
        assert!(
            (net_false - net_true).abs() <= 1e-6 * net_true.max(1.0),
            "net load drifted: {net_false} vs {net_true}"
        );
    }
}
