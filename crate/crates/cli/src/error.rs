//! Error-to-exit-code mapping. Every failure prints one JSON line on
//! stderr: `{"kind":"...","message":"..."}`.

use lrdetect::attacks::{AttackError, DcopfError};
use lrdetect::detector::DetectorError;
use lrdetect::eval::EvalError;
use lrdetect::grid::GridError;
use lrdetect::grouping::GroupingError;
use lrdetect::history::HistoryError;
use lrdetect::localize::LocalizeError;

#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problems: exit 1.
    Config(String),
    /// Data and validation problems: exit 2.
    Data(String),
    /// Dispatch or attack infeasibility: exit 3.
    Infeasible(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Infeasible(_) => "infeasible",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Infeasible(m) => m,
        }
    }

    /// The single-line JSON form written to stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({"kind": self.kind(), "message": self.message()}).to_string()
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<HistoryError> for CliError {
    fn from(e: HistoryError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GroupingError> for CliError {
    fn from(e: GroupingError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LocalizeError> for CliError {
    fn from(e: LocalizeError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DcopfError> for CliError {
    fn from(e: DcopfError) -> Self {
        match e {
            DcopfError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            AttackError::Dcopf(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
