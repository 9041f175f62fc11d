//! Exit codes and single-line error messages.

use std::fmt;

use xfvar::fit::FitError;
use xfvar::pickfreeze::EstimateError;
use xfvar::scm::ScmError;

pub const INTERNAL: u8 = 1;
/// Bad arguments, unreadable or malformed input.
pub const INPUT: u8 = 2;
pub const CYCLE: u8 = 3;
pub const ZERO_VARIANCE: u8 = 4;
pub const FIT: u8 = 5;
pub const NOT_REDUCIBLE: u8 = 6;
pub const VENN: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(INPUT, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(INTERNAL, message)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    /// `error[EXX]: message` on one line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat: Vec<&str> = self
            .message
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        write!(f, "error[E{:02}]: {}", self.code, flat.join("; "))
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        let code = match e {
            EstimateError::ZeroVariance => ZERO_VARIANCE,
            EstimateError::TooManyVars { .. }
            | EstimateError::Config(_)
            | EstimateError::Subset(_) => INPUT,
            EstimateError::NonFinite { .. } | EstimateError::Evaluation(_) => INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

impl From<ScmError> for CliError {
    fn from(e: ScmError) -> Self {
        match e {
            ScmError::Estimate(inner) => inner.into(),
            ScmError::Cycle(_) => Self::new(CYCLE, e.to_string()),
            ScmError::UnseenCell { .. }
            | ScmError::NonFinite { .. }
            | ScmError::NegativeScale { .. } => Self::internal(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Model(inner) => inner.into(),
            FitError::CellTooSmall { .. } | FitError::CategoricalNode(_) => {
                Self::new(FIT, e.to_string())
            }
            FitError::MissingColumn(_)
            | FitError::Data(_)
            | FitError::Csv(_)
            | FitError::Config(_) => Self::input(e.to_string()),
        }
    }
}
