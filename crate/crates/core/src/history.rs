//! Hourly per-load histories and the k-fold partitioning of their hours.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::GridCase;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("csv header must be hour,load_1,...,load_n")]
    BadHeader,
    #[error("row {row} has {found} load columns, expected {expected}")]
    ColumnMismatch { row: usize, found: usize, expected: usize },
    #[error("negative value {value} at row {row}, column {col}")]
    NegativeValue { row: usize, col: usize, value: f64 },
    #[error("cannot parse {text:?} at row {row}, column {col}")]
    BadNumber { row: usize, col: usize, text: String },
    #[error("history has {history} loads, case has {case}")]
    CaseMismatch { history: usize, case: usize },
    #[error("history must contain at least one hour")]
    Empty,
    #[error("fold count {0} must be at least 4 (1 test + 2 train + 1 hist)")]
    TooFewFolds(usize),
    #[error("{n_hours} hours cannot fill {k} partitions")]
    TooFewHours { n_hours: usize, k: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Matrix of MW values, one row of loads per hour. Hour indices
/// `0..n_hours` are the canonical key; the label column from ingested CSV
/// is carried as opaque metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadHistory {
    n_loads: usize,
    n_hours: usize,
    /// Hour-major storage: `values[t * n_loads + l]`.
    values: Vec<f64>,
    labels: Vec<String>,
}

impl LoadHistory {
    pub fn new(
        n_loads: usize,
        n_hours: usize,
        values: Vec<f64>,
        labels: Vec<String>,
    ) -> Result<Self, HistoryError> {
        if n_hours == 0 || n_loads == 0 {
            return Err(HistoryError::Empty);
        }
        assert_eq!(values.len(), n_loads * n_hours, "value buffer size");
        assert_eq!(labels.len(), n_hours, "label count");
        for (i, v) in values.iter().enumerate() {
            if *v < 0.0 {
                return Err(HistoryError::NegativeValue {
                    row: i / n_loads + 1,
                    col: i % n_loads + 1,
                    value: *v,
                });
            }
        }
        Ok(Self { n_loads, n_hours, values, labels })
    }

    pub fn n_loads(&self) -> usize {
        self.n_loads
    }

    pub fn n_hours(&self) -> usize {
        self.n_hours
    }

    /// All load values for one hour.
    pub fn hour(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_loads..(t + 1) * self.n_loads]
    }

    pub fn value(&self, load: usize, t: usize) -> f64 {
        self.values[t * self.n_loads + load]
    }

    pub fn label(&self, t: usize) -> &str {
        &self.labels[t]
    }

    /// Maximum MW each load reaches anywhere in the history.
    pub fn per_load_max(&self) -> Vec<f64> {
        let mut max = vec![0.0f64; self.n_loads];
        for t in 0..self.n_hours {
            for (m, v) in max.iter_mut().zip(self.hour(t)) {
                if *v > *m {
                    *m = *v;
                }
            }
        }
        max
    }

    pub fn check_case(&self, case: &GridCase) -> Result<(), HistoryError> {
        if self.n_loads != case.n_loads() {
            return Err(HistoryError::CaseMismatch {
                history: self.n_loads,
                case: case.n_loads(),
            });
        }
        Ok(())
    }

    /// Content hash over dimensions and values; labels are metadata and do
    /// not participate.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_loads as u64).to_le_bytes());
        h.update((self.n_hours as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("hour");
        for l in 1..=self.n_loads {
            s.push_str(&format!(",load_{l}"));
        }
        s.push('\n');
        for t in 0..self.n_hours {
            s.push_str(&self.labels[t]);
            for v in self.hour(t) {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Parse a `hour,load_1,...,load_n` CSV whose load columns follow the
/// case's load order.
pub fn load_csv_history(path: &Path, case: &GridCase) -> Result<LoadHistory, HistoryError> {
    let mut file = std::fs::File::open(path)?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    parse_csv_history(&text, case)
}

pub fn parse_csv_history(text: &str, case: &GridCase) -> Result<LoadHistory, HistoryError> {
    let n = case.n_loads();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let header = reader.headers()?;
        if header.len() != n + 1 {
            if header.is_empty() || header.get(0) != Some("hour") {
                return Err(HistoryError::BadHeader);
            }
            return Err(HistoryError::ColumnMismatch {
                row: 0,
                found: header.len().saturating_sub(1),
                expected: n,
            });
        }
        if header.get(0) != Some("hour") {
            return Err(HistoryError::BadHeader);
        }
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != n + 1 {
            return Err(HistoryError::ColumnMismatch {
                row,
                found: record.len().saturating_sub(1),
                expected: n,
            });
        }
        labels.push(record.get(0).unwrap_or("").to_string());
        for col in 1..=n {
            let text = record.get(col).unwrap_or("");
            let v: f64 = text.parse().map_err(|_| HistoryError::BadNumber {
                row,
                col,
                text: text.to_string(),
            })?;
            if v < 0.0 {
                return Err(HistoryError::NegativeValue { row, col, value: v });
            }
            values.push(v);
        }
    }
    let n_hours = labels.len();
    if n_hours == 0 {
        return Err(HistoryError::Empty);
    }
    LoadHistory::new(n, n_hours, values, labels)
}

/// Shape parameters for the synthetic history generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    /// Constant floor, as a fraction of each load's base MW.
    pub base_level: f64,
    /// Weight of the daily half-sine.
    pub daily_weight: f64,
    /// Weight of the yearly sinusoid.
    pub seasonal_weight: f64,
    /// Half-width of the uniform per-sample noise.
    pub noise: f64,
    /// Hour of day at which the daily shape peaks.
    pub peak_hour: f64,
    /// Optional spatially correlated volatility: at every hour each block
    /// of `region_size` consecutive loads shares one uniform disturbance of
    /// this half-width. Off (0.0) by default, which reproduces the plain
    /// diurnal/seasonal/noise shape.
    pub regional_volatility: f64,
    pub region_size: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            base_level: 0.7,
            daily_weight: 0.2,
            seasonal_weight: 0.1,
            noise: 0.03,
            peak_hour: 17.0,
            regional_volatility: 0.0,
            region_size: 0,
        }
    }
}

impl SynthParams {
    /// Daily half-sine in [0, 1], peaking at `peak_hour`.
    pub fn diurnal(&self, t: usize) -> f64 {
        let h = (t as f64 - (self.peak_hour - 12.0)).rem_euclid(24.0);
        (std::f64::consts::PI * h / 24.0).sin()
    }

    /// Yearly sinusoid in [-1, 1] with an 8760-hour period.
    pub fn seasonal(&self, t: usize) -> f64 {
        (2.0 * std::f64::consts::PI * t as f64 / 8760.0).sin()
    }
}

/// Generate a deterministic synthetic history for the case's loads:
/// `base_mw * [base_level + daily + seasonal + noise]`, clamped at zero.
pub fn gen_synthetic_history(
    case: &GridCase,
    n_hours: usize,
    seed: u64,
    params: &SynthParams,
) -> Result<LoadHistory, HistoryError> {
    use rand::Rng;
    if n_hours == 0 {
        return Err(HistoryError::Empty);
    }
    let n = case.n_loads();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * n_hours);
    let mut labels = Vec::with_capacity(n_hours);
    let regions = if params.regional_volatility > 0.0 && params.region_size > 0 {
        n.div_ceil(params.region_size)
    } else {
        0
    };
    let mut region_dev = vec![0.0f64; regions.max(1)];
    for t in 0..n_hours {
        labels.push(t.to_string());
        let shape = params.base_level
            + params.daily_weight * params.diurnal(t)
            + params.seasonal_weight * params.seasonal(t);
        for dev in region_dev.iter_mut().take(regions) {
            *dev = rng.random_range(-params.regional_volatility..=params.regional_volatility);
        }
        for (l, load) in case.loads.iter().enumerate() {
            let eps = rng.random_range(-params.noise..=params.noise);
            let regional = if regions > 0 { region_dev[l / params.region_size] } else { 0.0 };
            values.push((load.base_mw * (shape + regional + eps)).max(0.0));
        }
    }
    LoadHistory::new(n, n_hours, values, labels)
}

/// `k` near-equal random partitions of the hours, with the rotating
/// test/train/hist role assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub n_hours: usize,
    /// Disjoint, ascending-sorted hour sets covering all hours.
    pub partitions: Vec<Vec<usize>>,
}

/// Role assignment of one fold; hour lists are ascending.
#[derive(Debug, Clone)]
pub struct FoldRoles {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub hist: Vec<usize>,
}

impl FoldPlan {
    /// Roles for fold `f`: test = partition f, train = partitions f+1 and
    /// f+2 (mod k), hist = the rest.
    pub fn roles(&self, fold: usize) -> FoldRoles {
        assert!(fold < self.k, "fold {fold} out of range");
        let mut test = Vec::new();
        let mut train = Vec::new();
        let mut hist = Vec::new();
        for (p, hours) in self.partitions.iter().enumerate() {
            let target = if p == fold {
                &mut test
            } else if p == (fold + 1) % self.k || p == (fold + 2) % self.k {
                &mut train
            } else {
                &mut hist
            };
            target.extend_from_slice(hours);
        }
        test.sort_unstable();
        train.sort_unstable();
        hist.sort_unstable();
        FoldRoles { test, train, hist }
    }

    /// The fold in whose test partition this hour sits.
    pub fn fold_of_hour(&self, hour: usize) -> Option<usize> {
        self.partitions
            .iter()
            .position(|p| p.binary_search(&hour).is_ok())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes")
    }
}

pub fn make_folds(n_hours: usize, k: usize, seed: u64) -> Result<FoldPlan, HistoryError> {
    if k < 4 {
        return Err(HistoryError::TooFewFolds(k));
    }
    if n_hours < k {
        return Err(HistoryError::TooFewHours { n_hours, k });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hours: Vec<usize> = (0..n_hours).collect();
    hours.shuffle(&mut rng);
    let base = n_hours / k;
    let extra = n_hours % k;
    let mut partitions = Vec::with_capacity(k);
    let mut cursor = 0;
    for p in 0..k {
        let size = base + usize::from(p < extra);
        let mut part: Vec<usize> = hours[cursor..cursor + size].to_vec();
        part.sort_unstable();
        partitions.push(part);
        cursor += size;
    }
    Ok(FoldPlan { k, seed, n_hours, partitions })
}
