//! K-fold evaluation harness: detection probability, false alarm rate, ROC
//! sweeps, and sensitivity grids.
//!
//! Hours rotate through test/train/hist roles fold by fold; every hour is
//! tested exactly once. An attack is evaluated in the fold whose test
//! partition contains its base hour, so a detector never holds an attack's
//! own base hour in its history.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::AttackRecord;
use crate::detector::{calibrate, DetectorError};
use crate::grouping::GroupSet;
use crate::history::{make_folds, FoldPlan, HistoryError, LoadHistory};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("attack base hour {hour} outside the {n_hours}-hour history")]
    AttackHourOutOfRange { hour: usize, n_hours: usize },
    #[error("alpha list is empty")]
    NoAlphas,
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub fold_seed: u64,
    pub alphas: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { k: 10, fold_seed: 0, alphas: default_alphas() }
    }
}

/// The 0.90..=1.10 threshold sweep in steps of 0.01.
pub fn default_alphas() -> Vec<f64> {
    (90..=110).map(|i| i as f64 / 100.0).collect()
}

/// Alarm pattern of one normative test hour across the alpha sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormativeOutcome {
    pub hour: usize,
    pub alarms: Vec<bool>,
}

/// Alarm pattern of one attack across the alpha sweep, with the stratum
/// keys its record carries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub record: usize,
    pub base_hour: usize,
    pub shift_pct: f64,
    pub footprint_pct: Option<f64>,
    pub overload_pct: Option<f64>,
    pub alarms: Vec<bool>,
}

/// Raw per-vector outcomes of one k-fold run; metric tables and CSV grids
/// are assembled from this without re-running the detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub alphas: Vec<f64>,
    pub normative: Vec<NormativeOutcome>,
    pub attacks: Vec<AttackOutcome>,
    pub plan: FoldPlan,
}

fn alarms_for(
    distances: &[(f64, usize)],
    d_max: &[f64],
    alphas: &[f64],
) -> Vec<bool> {
    alphas
        .iter()
        .map(|&alpha| {
            distances
                .iter()
                .zip(d_max)
                .any(|(&(d, _), &dm)| d > alpha * dm)
        })
        .collect()
}

/// Run the rotating k-fold experiment: calibrate per fold, classify that
/// fold's normative test hours and the attacks based there, for every
/// alpha in the sweep.
pub fn run_kfold(
    history: &LoadHistory,
    groups: &GroupSet,
    records: &[AttackRecord],
    cfg: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    if cfg.alphas.is_empty() {
        return Err(EvalError::NoAlphas);
    }
    let plan = make_folds(history.n_hours(), cfg.k, cfg.fold_seed)?;
    let mut fold_records: Vec<Vec<usize>> = vec![Vec::new(); cfg.k];
    for (i, r) in records.iter().enumerate() {
        let fold = plan
            .fold_of_hour(r.base_hour)
            .ok_or(EvalError::AttackHourOutOfRange {
                hour: r.base_hour,
                n_hours: history.n_hours(),
            })?;
        fold_records[fold].push(i);
    }
    let mut normative = Vec::with_capacity(history.n_hours());
    let mut attacks = Vec::with_capacity(records.len());
    for (fold, fold_record) in fold_records.iter().enumerate() {
        let roles = plan.roles(fold);
        let model = calibrate(groups, history, &roles.hist, &roles.train, 1.0)?;
        for &hour in &roles.test {
            let d = model.distances(history, history.hour(hour))?;
            normative.push(NormativeOutcome {
                hour,
                alarms: alarms_for(&d, &model.d_max, &cfg.alphas),
            });
        }
        for &ri in fold_record {
            let r = &records[ri];
            let d = model.distances(history, &r.false_loads)?;
            attacks.push(AttackOutcome {
                record: ri,
                base_hour: r.base_hour,
                shift_pct: r.shift_pct,
                footprint_pct: r.footprint_pct(),
                overload_pct: r.overload_pct,
                alarms: alarms_for(&d, &model.d_max, &cfg.alphas),
            });
        }
    }
    normative.sort_by_key(|o| o.hour);
    attacks.sort_by_key(|o| o.record);
    Ok(EvalOutcome { alphas: cfg.alphas.clone(), normative, attacks, plan })
}

/// Stratum key of a metrics row. Shift and footprint are stored in basis
/// points so rows key and sort exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stratum {
    All,
    /// shift_pct in basis points (15% -> 1500)
    Shift(u32),
    /// (shift, footprint) in basis points
    ShiftFootprint(u32, u32),
    /// 1%-wide overload bucket: bucket b covers [b, b+1) percent
    Overload(u32),
}

pub fn to_basis_points(fraction: f64) -> u32 {
    (fraction * 10_000.0).round() as u32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub alpha: f64,
    pub stratum: Stratum,
    pub detected: usize,
    pub total_attacks: usize,
    pub false_alarms: usize,
    pub total_normative: usize,
}

impl MetricsRow {
    pub fn detection_probability(&self) -> Option<f64> {
        (self.total_attacks > 0).then(|| self.detected as f64 / self.total_attacks as f64)
    }

    pub fn false_alarm_rate(&self) -> Option<f64> {
        (self.total_normative > 0).then(|| self.false_alarms as f64 / self.total_normative as f64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, alpha: f64, stratum: Stratum) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| (r.alpha - alpha).abs() < 1e-12 && r.stratum == stratum)
    }
}

/// Aggregate outcomes into rows keyed by (alpha, stratum). Every alpha gets
/// an `All` row plus one row per observed shift, (shift, footprint) pair,
/// and overload bucket.
pub fn metrics_table(outcome: &EvalOutcome) -> MetricsTable {
    use std::collections::BTreeMap;
    let mut rows = Vec::new();
    for (ai, &alpha) in outcome.alphas.iter().enumerate() {
        let false_alarms = outcome.normative.iter().filter(|o| o.alarms[ai]).count();
        let total_normative = outcome.normative.len();
        let mut strata: BTreeMap<Stratum, (usize, usize)> = BTreeMap::new();
        strata.insert(Stratum::All, (0, 0));
        for a in &outcome.attacks {
            let mut keys = vec![Stratum::All, Stratum::Shift(to_basis_points(a.shift_pct))];
            if let Some(fp) = a.footprint_pct {
                keys.push(Stratum::ShiftFootprint(
                    to_basis_points(a.shift_pct),
                    to_basis_points(fp),
                ));
            }
            if let Some(ol) = a.overload_pct {
                keys.push(Stratum::Overload(ol.floor() as u32));
            }
            for key in keys {
                let cell = strata.entry(key).or_insert((0, 0));
                cell.1 += 1;
                if a.alarms[ai] {
                    cell.0 += 1;
                }
            }
        }
        for (stratum, (detected, total_attacks)) in strata {
            rows.push(MetricsRow {
                alpha,
                stratum,
                detected,
                total_attacks,
                false_alarms,
                total_normative,
            });
        }
    }
    MetricsTable { rows }
}

fn fmt_ratio(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

/// `alpha,fa,dp` rows over the sweep, aggregated over all attacks.
pub fn roc_csv(outcome: &EvalOutcome) -> String {
    let table = metrics_table(outcome);
    let mut csv = String::from("alpha,fa,dp\n");
    for (ai, &alpha) in outcome.alphas.iter().enumerate() {
        let _ = ai;
        let row = table
            .row(alpha, Stratum::All)
            .expect("All stratum exists for every alpha");
        csv.push_str(&format!(
            "{alpha},{},{}\n",
            fmt_ratio(row.false_alarm_rate()),
            fmt_ratio(row.detection_probability())
        ));
    }
    csv
}

/// Detection-probability heatmap over (shift, footprint) at one alpha.
/// Rows are shifts, columns footprints; empty cells print NA.
pub fn grid_shift_footprint_csv(outcome: &EvalOutcome, alpha: f64) -> String {
    use std::collections::BTreeSet;
    let table = metrics_table(outcome);
    let mut shifts: BTreeSet<u32> = BTreeSet::new();
    let mut footprints: BTreeSet<u32> = BTreeSet::new();
    for a in &outcome.attacks {
        if let Some(fp) = a.footprint_pct {
            shifts.insert(to_basis_points(a.shift_pct));
            footprints.insert(to_basis_points(fp));
        }
    }
    let mut csv = String::from("shift");
    for fp in &footprints {
        csv.push_str(&format!(",{}", *fp as f64 / 10_000.0));
    }
    csv.push('\n');
    for &s in &shifts {
        csv.push_str(&format!("{}", s as f64 / 10_000.0));
        for &fp in &footprints {
            let dp = table
                .row(alpha, Stratum::ShiftFootprint(s, fp))
                .and_then(|r| r.detection_probability());
            csv.push_str(&format!(",{}", fmt_ratio(dp)));
        }
        csv.push('\n');
    }
    csv
}

/// Detection probability per overload bucket (1% steps), one row per alpha
/// with its false-alarm rate. Attacks without an evaluated overload do not
/// participate.
pub fn grid_overload_fa_csv(outcome: &EvalOutcome) -> String {
    use std::collections::BTreeSet;
    let table = metrics_table(outcome);
    let buckets: BTreeSet<u32> = outcome
        .attacks
        .iter()
        .filter_map(|a| a.overload_pct)
        .map(|ol| ol.floor() as u32)
        .collect();
    let mut csv = String::from("alpha,fa");
    for b in &buckets {
        csv.push_str(&format!(",ol_{b}"));
    }
    csv.push('\n');
    for &alpha in &outcome.alphas {
        let all = table.row(alpha, Stratum::All).expect("All row");
        csv.push_str(&format!("{alpha},{}", fmt_ratio(all.false_alarm_rate())));
        for &b in &buckets {
            let dp = table
                .row(alpha, Stratum::Overload(b))
                .and_then(|r| r.detection_probability());
            csv.push_str(&format!(",{}", fmt_ratio(dp)));
        }
        csv.push('\n');
    }
    csv
}
