//! Run configuration: one JSON file drives the whole pipeline.
//!
//! Every field except `case_path` has a default; command-line flags
//! override individual entries. The schema is documented in the README.

use serde::{Deserialize, Serialize};

use lrdetect::grouping::RankingBasis;
use lrdetect::history::SynthParams;
use lrdetect::localize::LocalizeParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// MATPOWER `.m` file or the toolkit's `.json` case form.
    pub case_path: String,
    #[serde(default)]
    pub history: HistorySource,
    #[serde(default)]
    pub grouping: GroupingConfig,
    #[serde(default)]
    pub folds: FoldConfig,
    /// Threshold multipliers swept by `evaluate`.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub attacks: AttackConfig,
    #[serde(default)]
    pub localization: LocalizationConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

fn default_alphas() -> Vec<f64> {
    lrdetect::eval::default_alphas()
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistorySource {
    /// CSV with header `hour,load_1,...,load_n`.
    Csv { path: String },
    Synthetic {
        hours: usize,
        seed: u64,
        #[serde(default)]
        params: SynthParams,
    },
}

impl Default for HistorySource {
    fn default() -> Self {
        HistorySource::Synthetic { hours: 2000, seed: 1, params: SynthParams::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingConfig {
    pub r_g: usize,
    pub n_g: usize,
    pub basis: RankingBasis,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self { r_g: 7, n_g: 35, basis: RankingBasis::HistoryMax }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKindConfig {
    Random,
    Targeted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKindConfig,
    pub shifts: Vec<f64>,
    /// Random attacks only.
    pub footprints: Vec<f64>,
    pub balanced: bool,
    /// Targeted attacks only: hop radius of the candidate set.
    pub r_a: usize,
    /// Base-case loading at or above which a branch counts as congested.
    pub congestion_threshold: f64,
    pub seed: u64,
    /// Cap on the number of base hours attacked (a seeded subset).
    pub max_hours: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKindConfig::Random,
            shifts: vec![0.05, 0.10, 0.15],
            footprints: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            balanced: true,
            r_a: 7,
            congestion_threshold: 0.9,
            seed: 7,
            max_hours: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationConfig {
    #[serde(flatten)]
    pub params: LocalizeParams,
    /// Seed of the 70/30 attack split.
    pub split_seed: u64,
    pub alpha: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self { params: LocalizeParams::default(), split_seed: 11, alpha: 1.0 }
    }
}

impl RunConfig {
    /// Apply the global flag overrides.
    pub fn apply_overrides(&mut self, out: Option<String>, seed: Option<u64>, alpha: Option<f64>) {
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(seed) = seed {
            if let HistorySource::Synthetic { seed: s, .. } = &mut self.history {
                *s = seed;
            }
            self.folds.seed = seed;
            self.attacks.seed = seed;
            self.localization.split_seed = seed;
        }
        if let Some(alpha) = alpha {
            self.alphas = vec![alpha];
            self.localization.alpha = alpha;
        }
    }
}
