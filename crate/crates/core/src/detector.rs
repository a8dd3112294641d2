//! Grouped nearest-neighbor detection.
//!
//! Each load group is monitored independently: the group's coordinates of
//! the incoming vector are compared against every historical hour, and the
//! minimum Euclidean distance is tested against a per-group threshold
//! calibrated as the worst nearest-neighbor distance seen over the training
//! hours. Any group violation marks the whole vector anomalous.
//!
//! The scan is exhaustive by construction; distances are plain MW-space
//! Euclidean with no normalization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouping::GroupSet;
use crate::history::LoadHistory;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("empty {0} hour set")]
    EmptyHours(&'static str),
    #[error("group {0} has no members")]
    EmptyGroup(usize),
    #[error("vector has {found} loads, expected {expected}")]
    Dimension { found: usize, expected: usize },
    #[error("hour {hour} outside history of {n_hours} hours")]
    HourOutOfRange { hour: usize, n_hours: usize },
    #[error("history fingerprint {found} does not match model {expected}")]
    FingerprintMismatch { found: String, expected: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Nearest-neighbor distance of `vector` (restricted to `members`) against
/// the given history hours. Returns the distance and the first hour
/// achieving it (hours are scanned in the order given, so an ascending
/// slice yields the smallest index among ties).
pub fn nn_distance(
    vector: &[f64],
    history: &LoadHistory,
    hours: &[usize],
    members: &[usize],
) -> Result<(f64, usize), DetectorError> {
    if hours.is_empty() {
        return Err(DetectorError::EmptyHours("history"));
    }
    if members.is_empty() {
        return Err(DetectorError::EmptyGroup(0));
    }
    if vector.len() != history.n_loads() {
        return Err(DetectorError::Dimension {
            found: vector.len(),
            expected: history.n_loads(),
        });
    }
    check_hours(history, hours)?;
    let mut best = f64::INFINITY;
    let mut best_hour = hours[0];
    for &r in hours {
        let row = history.hour(r);
        let mut d2 = 0.0;
        for &l in members {
            let diff = vector[l] - row[l];
            d2 += diff * diff;
        }
        if d2 < best {
            best = d2;
            best_hour = r;
        }
    }
    Ok((best.sqrt(), best_hour))
}

fn check_hours(history: &LoadHistory, hours: &[usize]) -> Result<(), DetectorError> {
    for &h in hours {
        if h >= history.n_hours() {
            return Err(DetectorError::HourOutOfRange {
                hour: h,
                n_hours: history.n_hours(),
            });
        }
    }
    Ok(())
}

/// History columns of one group gathered into contiguous storage so the
/// scan runs cache-friendly. Produces bit-identical results to
/// [`nn_distance`] (same member and hour order, same arithmetic).
pub(crate) struct GroupScanner {
    members: Vec<usize>,
    hours: Vec<usize>,
    /// `k * hours.len()` values, one compacted row per hour.
    rows: Vec<f64>,
}

impl GroupScanner {
    pub fn new(history: &LoadHistory, hours: &[usize], members: &[usize]) -> Self {
        let k = members.len();
        let mut rows = Vec::with_capacity(k * hours.len());
        for &r in hours {
            let row = history.hour(r);
            rows.extend(members.iter().map(|&l| row[l]));
        }
        Self {
            members: members.to_vec(),
            hours: hours.to_vec(),
            rows,
        }
    }

    /// Gather the group's coordinates from a full load vector.
    pub fn project(&self, vector: &[f64]) -> Vec<f64> {
        self.members.iter().map(|&l| vector[l]).collect()
    }

    /// Nearest neighbor of an already-projected point.
    pub fn nn(&self, point: &[f64]) -> (f64, usize) {
        let k = self.members.len();
        let mut best = f64::INFINITY;
        let mut best_hour = self.hours[0];
        for (i, &r) in self.hours.iter().enumerate() {
            let row = &self.rows[i * k..(i + 1) * k];
            let mut d2 = 0.0;
            for (p, h) in point.iter().zip(row) {
                let diff = p - h;
                d2 += diff * diff;
            }
            if d2 < best {
                best = d2;
                best_hour = r;
            }
        }
        (best.sqrt(), best_hour)
    }
}

/// Calibrated grouped detector: per-group thresholds over a fixed
/// historical window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorModel {
    pub groups: GroupSet,
    /// Worst training nearest-neighbor distance per group.
    pub d_max: Vec<f64>,
    /// Threshold multiplier; the effective threshold is `alpha * d_max`.
    pub alpha: f64,
    /// Ascending hour indices forming the historical window.
    pub hist_hours: Vec<usize>,
    /// Fingerprint of the history the model was calibrated on.
    pub history_fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupCheck {
    pub group: usize,
    pub distance: f64,
    pub threshold: f64,
    pub violated: bool,
    /// Historical hour achieving the minimum distance.
    pub nearest_hour: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub per_group: Vec<GroupCheck>,
    pub alarm: bool,
}

/// Calibrate thresholds: for each group, the maximum over training hours of
/// the nearest-neighbor distance against the historical hours.
pub fn calibrate(
    groups: &GroupSet,
    history: &LoadHistory,
    hist_hours: &[usize],
    train_hours: &[usize],
    alpha: f64,
) -> Result<DetectorModel, DetectorError> {
    if hist_hours.is_empty() {
        return Err(DetectorError::EmptyHours("history"));
    }
    if train_hours.is_empty() {
        return Err(DetectorError::EmptyHours("training"));
    }
    check_hours(history, hist_hours)?;
    check_hours(history, train_hours)?;
    let mut d_max = Vec::with_capacity(groups.groups.len());
    for g in &groups.groups {
        if g.members.is_empty() {
            return Err(DetectorError::EmptyGroup(g.id));
        }
        let scanner = GroupScanner::new(history, hist_hours, &g.members);
        let mut worst = 0.0f64;
        for &i in train_hours {
            let point = scanner.project(history.hour(i));
            let (d, _) = scanner.nn(&point);
            if d > worst {
                worst = d;
            }
        }
        d_max.push(worst);
    }
    let mut hist_sorted = hist_hours.to_vec();
    hist_sorted.sort_unstable();
    Ok(DetectorModel {
        groups: groups.clone(),
        d_max,
        alpha,
        hist_hours: hist_sorted,
        history_fingerprint: history.fingerprint(),
    })
}

impl DetectorModel {
    /// Per-group nearest-neighbor distances of one vector: `(distance,
    /// nearest hour)` in group order. The alpha-independent part of
    /// classification, exposed so threshold sweeps can reuse one scan.
    pub fn distances(
        &self,
        history: &LoadHistory,
        vector: &[f64],
    ) -> Result<Vec<(f64, usize)>, DetectorError> {
        if vector.len() != history.n_loads() {
            return Err(DetectorError::Dimension {
                found: vector.len(),
                expected: history.n_loads(),
            });
        }
        self.groups
            .groups
            .iter()
            .map(|g| nn_distance(vector, history, &self.hist_hours, &g.members))
            .collect()
    }

    /// Classify one load vector. A group is violated when its distance
    /// strictly exceeds `alpha * d_max`; one violation raises the alarm.
    pub fn classify(
        &self,
        history: &LoadHistory,
        vector: &[f64],
        alpha_override: Option<f64>,
    ) -> Result<Verdict, DetectorError> {
        let alpha = alpha_override.unwrap_or(self.alpha);
        let distances = self.distances(history, vector)?;
        let per_group = self
            .groups
            .groups
            .iter()
            .zip(&self.d_max)
            .zip(distances)
            .map(|((g, dmax), (distance, nearest_hour))| {
                let threshold = alpha * dmax;
                GroupCheck {
                    group: g.id,
                    distance,
                    threshold,
                    violated: distance > threshold,
                    nearest_hour,
                }
            })
            .collect::<Vec<_>>();
        let alarm = per_group.iter().any(|c| c.violated);
        Ok(Verdict { per_group, alarm })
    }

    /// Check that a history is the one the model was calibrated on.
    pub fn check_fingerprint(&self, history: &LoadHistory) -> Result<(), DetectorError> {
        let found = history.fingerprint();
        if found != self.history_fingerprint {
            return Err(DetectorError::FingerprintMismatch {
                found,
                expected: self.history_fingerprint.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, DetectorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, DetectorError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The single-group baseline detector over all loads at once. Returns
/// (distance, threshold, alarm, nearest hour).
pub fn classify_ungrouped(
    history: &LoadHistory,
    hist_hours: &[usize],
    train_hours: &[usize],
    vector: &[f64],
    alpha: f64,
) -> Result<(f64, f64, bool, usize), DetectorError> {
    let groups = GroupSet::single(history.n_loads());
    let model = calibrate(&groups, history, hist_hours, train_hours, alpha)?;
    let verdict = model.classify(history, vector, None)?;
    let check = &verdict.per_group[0];
    Ok((check.distance, check.threshold, verdict.alarm, check.nearest_hour))
}
