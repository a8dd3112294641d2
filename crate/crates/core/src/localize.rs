//! Per-load attack likelihoods.
//!
//! For every load in a group, the normalized difference between its value
//! and the group's nearest historical neighbor is standardized into a
//! Z-score against training statistics. Empirical likelihood curves over
//! (violation status, Z-score) then turn each load's evidence into a
//! probability of having been attacked, scored by average log-loss.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::AttackRecord;
use crate::curvefit::{fit_exp_decay, ExpCurve, FitError};
use crate::detector::{DetectorError, DetectorModel, Verdict};
use crate::grouping::GroupSet;
use crate::history::LoadHistory;

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error("no statistics for load {load} in group {group}")]
    MissingEntry { load: usize, group: usize },
    #[error("class (attacked={attacked}, violated={violated}) has only {count} samples, need {need}")]
    TooFewSamples { attacked: bool, violated: bool, count: usize, need: usize },
    #[error("class violated={violated} yields {points} histogram points, need 3 to fit")]
    TooFewBins { violated: bool, points: usize },
    #[error("probability {0} outside (0, 1)")]
    BadProbability(f64),
    #[error("empty sample set")]
    Empty,
    #[error("q/y length mismatch: {q} vs {y}")]
    LengthMismatch { q: usize, y: usize },
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("curve fit: {0}")]
    Fit(#[from] FitError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Tunables of the localization stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizeParams {
    /// Probability clip: outputs live in [epsilon, 1 - epsilon].
    pub epsilon: f64,
    /// Lower bound substituted for tiny standard deviations.
    pub sigma_floor: f64,
    /// Normalized difference assigned when the reference value is zero but
    /// the observed one is not.
    pub delta_cap: f64,
    /// Z-score histogram bin width.
    pub bin_width: f64,
    /// Bins with fewer samples are merged into their neighbor.
    pub min_bin_count: usize,
    /// Minimum labeled loads per (attacked, violated) class.
    pub min_class_samples: usize,
    /// Only attacks with at least this evaluated overload train the curves.
    pub overload_threshold_pct: f64,
    /// Fraction of attacks used for curve fitting; the rest are held out.
    pub train_fraction: f64,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            sigma_floor: 1e-6,
            delta_cap: 10.0,
            bin_width: 0.5,
            min_bin_count: 10,
            min_class_samples: 50,
            overload_threshold_pct: 3.0,
            train_fraction: 0.7,
        }
    }
}

/// Normalized difference of one member load against the nearest-neighbor
/// reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEntry {
    pub load: usize,
    pub delta: f64,
    /// Set when the reference value was zero and the cap rule applied.
    pub capped: bool,
}

/// `delta_l = |p_l - h_l| / h_l` over the member loads. A zero reference
/// yields 0 when the observation is also zero, else `delta_cap` (flagged).
pub fn normalized_diff(
    vector: &[f64],
    reference: &[f64],
    members: &[usize],
    delta_cap: f64,
) -> Vec<DeltaEntry> {
    members
        .iter()
        .map(|&l| {
            let h = reference[l];
            let p = vector[l];
            if h == 0.0 {
                if p == 0.0 {
                    DeltaEntry { load: l, delta: 0.0, capped: false }
                } else {
                    DeltaEntry { load: l, delta: delta_cap, capped: true }
                }
            } else {
                DeltaEntry { load: l, delta: ((p - h) / h).abs(), capped: false }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub mu: f64,
    pub sigma: f64,
}

/// Per-(load, group) first and second moments of the normalized
/// difference over the training hours. Entries exist exactly for the
/// member loads of each group, aligned with the group's member order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadStats {
    pub entries: Vec<Vec<StatEntry>>,
}

impl LoadStats {
    pub fn entry(&self, groups: &GroupSet, load: usize, group: usize) -> Option<&StatEntry> {
        let g = groups.groups.get(group)?;
        let pos = g.members.binary_search(&load).ok()?;
        self.entries.get(group)?.get(pos)
    }
}

/// Train the per-(load, group) statistics: for every training hour, find
/// each group's nearest historical neighbor and accumulate the member
/// deltas; mu and sigma are the population mean and standard deviation.
pub fn fit_load_stats(
    groups: &GroupSet,
    history: &LoadHistory,
    hist_hours: &[usize],
    train_hours: &[usize],
    delta_cap: f64,
) -> Result<LoadStats, LocalizeError> {
    if train_hours.is_empty() {
        return Err(DetectorError::EmptyHours("training").into());
    }
    let mut entries = Vec::with_capacity(groups.groups.len());
    for g in &groups.groups {
        let k = g.members.len();
        let mut sum = vec![0.0f64; k];
        let mut sumsq = vec![0.0f64; k];
        for &i in train_hours {
            let vector = history.hour(i);
            let (_, nearest) = crate::detector::nn_distance(vector, history, hist_hours, &g.members)?;
            let reference = history.hour(nearest);
            for (pos, entry) in normalized_diff(vector, reference, &g.members, delta_cap)
                .iter()
                .enumerate()
            {
                sum[pos] += entry.delta;
                sumsq[pos] += entry.delta * entry.delta;
            }
        }
        let n = train_hours.len() as f64;
        let stats = (0..k)
            .map(|pos| {
                let mu = sum[pos] / n;
                let var = (sumsq[pos] / n - mu * mu).max(0.0);
                StatEntry { mu, sigma: var.sqrt() }
            })
            .collect();
        entries.push(stats);
    }
    Ok(LoadStats { entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zscore {
    pub z: f64,
    /// Set when sigma was below the floor and the floor was used instead.
    pub floored: bool,
}

/// Standardize a delta against the (load, group) training statistics.
pub fn zscore(
    delta: f64,
    stats: &LoadStats,
    groups: &GroupSet,
    load: usize,
    group: usize,
    sigma_floor: f64,
) -> Result<Zscore, LocalizeError> {
    let entry = stats
        .entry(groups, load, group)
        .ok_or(LocalizeError::MissingEntry { load, group })?;
    let floored = entry.sigma < sigma_floor;
    let sigma = if floored { sigma_floor } else { entry.sigma };
    Ok(Zscore { z: (delta - entry.mu) / sigma, floored })
}

/// Likelihood curve `a * exp(-b z) + c`, clipped to (0, 1), with the
/// Z-score range it was fitted on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LikelihoodCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl LikelihoodCurve {
    fn from_fit(fit: ExpCurve, z_min: f64, z_max: f64) -> Self {
        Self { a: fit.a, b: fit.b, c: fit.c, z_min, z_max }
    }

    pub fn eval(&self, z: f64, epsilon: f64) -> f64 {
        (self.a * (-self.b * z).exp() + self.c).clamp(epsilon, 1.0 - epsilon)
    }
}

/// Fitted localization model: statistics, the two likelihood curves, and
/// the baseline probabilities of the simpler schemes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationModel {
    pub stats: LoadStats,
    pub curve_violation: LikelihoodCurve,
    pub curve_no_violation: LikelihoodCurve,
    /// Empirical attacked fraction in violated groups.
    pub baseline_violated: f64,
    /// Empirical attacked fraction in non-violated groups.
    pub baseline_clean: f64,
    /// Overall attacked fraction: the log-loss-optimal constant, also used
    /// for loads outside every group.
    pub baseline_q: f64,
    pub params: LocalizeParams,
}

impl LocalizationModel {
    pub fn to_json(&self) -> Result<String, LocalizeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, LocalizeError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One labeled load observation used for curve fitting.
#[derive(Debug, Clone, Copy)]
pub struct LoadSample {
    pub attacked: bool,
    pub violated: bool,
    pub z: f64,
}

/// Attacks whose evaluated overload reaches the threshold.
pub fn damaging_records(
    records: &[AttackRecord],
    overload_threshold_pct: f64,
) -> Vec<&AttackRecord> {
    records
        .iter()
        .filter(|r| r.overload_pct.is_some_and(|o| o >= overload_threshold_pct))
        .collect()
}

/// Label every grouped load of every record: attacked from the record's
/// mask, violated from the containing groups' verdicts, z the maximum
/// Z-score across containing groups. Ungrouped loads yield no sample.
pub fn label_records(
    detector: &DetectorModel,
    history: &LoadHistory,
    stats: &LoadStats,
    records: &[&AttackRecord],
    params: &LocalizeParams,
) -> Result<Vec<LoadSample>, LocalizeError> {
    let membership = detector.groups.membership();
    let mut samples = Vec::new();
    for record in records {
        let verdict = detector.classify(history, &record.false_loads, None)?;
        let per_load = assess_loads(detector, history, stats, &verdict, &record.false_loads, params, &membership)?;
        for a in per_load {
            if let (Some(v), Some(z)) = (a.violated, a.z) {
                samples.push(LoadSample {
                    attacked: record.attacked_mask[a.load],
                    violated: v,
                    z,
                });
            }
        }
    }
    Ok(samples)
}

/// Per-load localization output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoadAssessment {
    pub load: usize,
    /// None when the load belongs to no group.
    pub violated: Option<bool>,
    pub z: Option<f64>,
    pub q: f64,
}

fn assess_loads(
    detector: &DetectorModel,
    history: &LoadHistory,
    stats: &LoadStats,
    verdict: &Verdict,
    vector: &[f64],
    params: &LocalizeParams,
    membership: &[Vec<usize>],
) -> Result<Vec<RawAssessment>, LocalizeError> {
    // Deltas per group against each group's own nearest neighbor.
    let groups = &detector.groups;
    let mut deltas: Vec<Vec<DeltaEntry>> = Vec::with_capacity(groups.groups.len());
    for (g, check) in groups.groups.iter().zip(&verdict.per_group) {
        let reference = history.hour(check.nearest_hour);
        deltas.push(normalized_diff(vector, reference, &g.members, params.delta_cap));
    }
    let mut out = Vec::with_capacity(vector.len());
    for (load, containing) in membership.iter().enumerate() {
        if containing.is_empty() {
            out.push(RawAssessment { load, violated: None, z: None });
            continue;
        }
        let mut violated = false;
        let mut z_max = f64::NEG_INFINITY;
        for &gid in containing {
            let check = &verdict.per_group[gid];
            violated |= check.violated;
            let pos = groups.groups[gid]
                .members
                .binary_search(&load)
                .expect("membership is consistent with groups");
            let delta = deltas[gid][pos].delta;
            let zs = zscore(delta, stats, groups, load, gid, params.sigma_floor)?;
            if zs.z > z_max {
                z_max = zs.z;
            }
        }
        out.push(RawAssessment { load, violated: Some(violated), z: Some(z_max) });
    }
    Ok(out)
}

struct RawAssessment {
    load: usize,
    violated: Option<bool>,
    z: Option<f64>,
}

/// Histogram point: (mean z, attacked ratio, total count).
fn ratio_points(
    samples: &[LoadSample],
    violated: bool,
    params: &LocalizeParams,
) -> Vec<(f64, f64, f64)> {
    let class: Vec<&LoadSample> = samples.iter().filter(|s| s.violated == violated).collect();
    if class.is_empty() {
        return Vec::new();
    }
    let z_min = class.iter().map(|s| s.z).fold(f64::INFINITY, f64::min);
    let z_max = class.iter().map(|s| s.z).fold(f64::NEG_INFINITY, f64::max);
    let width = params.bin_width;
    let n_bins = (((z_max - z_min) / width).floor() as usize + 1).max(1);
    let mut attacked = vec![0usize; n_bins];
    let mut total = vec![0usize; n_bins];
    let mut z_sum = vec![0.0f64; n_bins];
    for s in &class {
        let b = (((s.z - z_min) / width).floor() as usize).min(n_bins - 1);
        total[b] += 1;
        z_sum[b] += s.z;
        if s.attacked {
            attacked[b] += 1;
        }
    }
    // Merge thin bins into the next occupied one so every emitted point
    // rests on at least min_bin_count samples.
    let mut points = Vec::new();
    let mut acc_attacked = 0usize;
    let mut acc_total = 0usize;
    let mut acc_z = 0.0f64;
    for b in 0..n_bins {
        acc_attacked += attacked[b];
        acc_total += total[b];
        acc_z += z_sum[b];
        if acc_total >= params.min_bin_count {
            points.push((
                acc_z / acc_total as f64,
                acc_attacked as f64 / acc_total as f64,
                acc_total as f64,
            ));
            acc_attacked = 0;
            acc_total = 0;
            acc_z = 0.0;
        }
    }
    if acc_total > 0 {
        if let Some(last) = points.last_mut() {
            let count = last.2 + acc_total as f64;
            let z = (last.0 * last.2 + acc_z) / count;
            let ratio = (last.1 * last.2 + acc_attacked as f64) / count;
            *last = (z, ratio, count);
        } else {
            points.push((
                acc_z / acc_total as f64,
                acc_attacked as f64 / acc_total as f64,
                acc_total as f64,
            ));
        }
    }
    points
}

/// Fit the likelihood curves and baselines from labeled training attacks.
///
/// `train_records` should already be restricted to damaging attacks (see
/// [`damaging_records`]). `all_train_masks` additionally feeds the constant
/// baseline, which is defined over every load, grouped or not.
pub fn estimate_likelihood_curves(
    detector: &DetectorModel,
    history: &LoadHistory,
    stats: LoadStats,
    train_records: &[&AttackRecord],
    params: &LocalizeParams,
) -> Result<LocalizationModel, LocalizeError> {
    let samples = label_records(detector, history, &stats, train_records, params)?;
    if samples.is_empty() {
        return Err(LocalizeError::Empty);
    }
    for attacked in [false, true] {
        for violated in [false, true] {
            let count = samples
                .iter()
                .filter(|s| s.attacked == attacked && s.violated == violated)
                .count();
            if count < params.min_class_samples {
                return Err(LocalizeError::TooFewSamples {
                    attacked,
                    violated,
                    count,
                    need: params.min_class_samples,
                });
            }
        }
    }
    let mut curves = Vec::with_capacity(2);
    for violated in [true, false] {
        let points = ratio_points(&samples, violated, params);
        if points.len() < 3 {
            return Err(LocalizeError::TooFewBins { violated, points: points.len() });
        }
        let fit = fit_exp_decay(&points)?;
        let z_min = points.first().unwrap().0;
        let z_max = points.last().unwrap().0;
        curves.push(LikelihoodCurve::from_fit(fit, z_min, z_max));
    }
    let frac = |pred: &dyn Fn(&&LoadSample) -> bool| -> f64 {
        let subset: Vec<&LoadSample> = samples.iter().filter(pred).collect();
        if subset.is_empty() {
            return 0.0;
        }
        subset.iter().filter(|s| s.attacked).count() as f64 / subset.len() as f64
    };
    let baseline_violated = frac(&|s| s.violated);
    let baseline_clean = frac(&|s| !s.violated);
    // The constant scheme covers every load of every record, including
    // ungrouped loads the samples exclude.
    let mut attacked_total = 0usize;
    let mut loads_total = 0usize;
    for r in train_records {
        attacked_total += r.attacked_mask.iter().filter(|&&m| m).count();
        loads_total += r.attacked_mask.len();
    }
    let baseline_q = attacked_total as f64 / loads_total as f64;
    Ok(LocalizationModel {
        stats,
        curve_violation: curves[0],
        curve_no_violation: curves[1],
        baseline_violated,
        baseline_clean,
        baseline_q,
        params: params.clone(),
    })
}

/// Score every load of a classified vector: curve lookup for grouped
/// loads, the constant baseline for ungrouped ones.
pub fn assign_probabilities(
    model: &LocalizationModel,
    detector: &DetectorModel,
    history: &LoadHistory,
    verdict: &Verdict,
    vector: &[f64],
) -> Result<Vec<LoadAssessment>, LocalizeError> {
    let membership = detector.groups.membership();
    let raw = assess_loads(
        detector,
        history,
        &model.stats,
        verdict,
        vector,
        &model.params,
        &membership,
    )?;
    let eps = model.params.epsilon;
    Ok(raw
        .into_iter()
        .map(|r| {
            let q = match (r.violated, r.z) {
                (Some(true), Some(z)) => model.curve_violation.eval(z, eps),
                (Some(false), Some(z)) => model.curve_no_violation.eval(z, eps),
                _ => model.baseline_q.clamp(eps, 1.0 - eps),
            };
            LoadAssessment { load: r.load, violated: r.violated, z: r.z, q }
        })
        .collect())
}

/// Average base-2 log-loss of probabilities `q` against labels `y`.
pub fn log_loss(q: &[f64], y: &[bool]) -> Result<f64, LocalizeError> {
    if q.len() != y.len() {
        return Err(LocalizeError::LengthMismatch { q: q.len(), y: y.len() });
    }
    if q.is_empty() {
        return Err(LocalizeError::Empty);
    }
    let mut total = 0.0;
    for (&qi, &yi) in q.iter().zip(y) {
        if !(qi > 0.0 && qi < 1.0) {
            return Err(LocalizeError::BadProbability(qi));
        }
        total -= if yi { qi.log2() } else { (1.0 - qi).log2() };
    }
    Ok(total / q.len() as f64)
}

/// Average log-loss of the three schemes over held-out attacks:
/// the Z-score curves, the violation-only baselines, and the constant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub zscore_loss: f64,
    pub group_loss: f64,
    pub constant_loss: f64,
    pub n_samples: usize,
}

pub fn compare_schemes(
    model: &LocalizationModel,
    detector: &DetectorModel,
    history: &LoadHistory,
    test_records: &[&AttackRecord],
) -> Result<SchemeComparison, LocalizeError> {
    let eps = model.params.epsilon;
    let mut q_curve = Vec::new();
    let mut q_group = Vec::new();
    let mut q_const = Vec::new();
    let mut labels = Vec::new();
    let constant = model.baseline_q.clamp(eps, 1.0 - eps);
    for record in test_records {
        let verdict = detector.classify(history, &record.false_loads, None)?;
        let assessments =
            assign_probabilities(model, detector, history, &verdict, &record.false_loads)?;
        for a in assessments {
            q_curve.push(a.q);
            q_group.push(match a.violated {
                Some(true) => model.baseline_violated.clamp(eps, 1.0 - eps),
                Some(false) => model.baseline_clean.clamp(eps, 1.0 - eps),
                None => constant,
            });
            q_const.push(constant);
            labels.push(record.attacked_mask[a.load]);
        }
    }
    Ok(SchemeComparison {
        zscore_loss: log_loss(&q_curve, &labels)?,
        group_loss: log_loss(&q_group, &labels)?,
        constant_loss: log_loss(&q_const, &labels)?,
        n_samples: labels.len(),
    })
}
