//! Command-line front end for counterfactual explainability measures.

pub mod commands;
pub mod error;
pub mod report;
pub mod venn;

pub use commands::run;
pub use error::CliError;
pub use report::{RunReport, Table};
