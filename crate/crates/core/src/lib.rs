//! Detection and localization of load-redistribution attacks on power-grid
//! load estimates.
//!
//! The toolkit monitors the load vector produced by state estimation with a
//! grouped nearest-neighbor detector: loads are clustered into small graph
//! neighborhoods, each neighborhood is compared against attack-free history,
//! and a per-group threshold decides whether the current hour looks
//! normative. On top of the detector, a statistical localization stage
//! assigns every load a probability of having been tampered with.
//!
//! The crate also contains everything needed to exercise the detector at
//! desk scale: a MATPOWER case parser, a DC power-flow/PTDF kernel, a small
//! dense LP solver driving a DC optimal power flow, generators for random and
//! targeted load-redistribution attacks, and a k-fold evaluation harness that
//! produces ROC and sensitivity tables.
//!
//! Entry points by stage:
//! - [`grid`]: case parsing, validation, DC power flow, PTDF, loadings.
//! - [`history`]: hourly load histories (CSV or synthetic) and fold plans.
//! - [`grouping`]: the radius-based load grouping strategy.
//! - [`detector`]: per-group nearest-neighbor distances, calibration,
//!   classification.
//! - [`attacks`]: random/targeted attack generation, DC-OPF redispatch,
//!   consequence evaluation.
//! - [`eval`]: k-fold detection-probability / false-alarm harness.
//! - [`localize`]: Z-score statistics, likelihood curves, log-loss scoring.

pub mod attacks;
pub mod curvefit;
pub mod detector;
pub mod eval;
pub mod grid;
pub mod grouping;
pub mod history;
pub mod localize;
pub mod lp;

pub use detector::{DetectorModel, Verdict};
pub use grid::GridCase;
pub use grouping::GroupSet;
pub use history::{FoldPlan, LoadHistory};
