//! The explanation algebra and the explainability measure on it.
//!
//! Clauses are sets of atoms; a measure stores one mass per atom in a dense
//! array indexed by subset bitmask, so any clause is answered by summing the
//! masses of its atoms.

mod clause;
mod measure;
mod parse;
mod shapley;
mod validate;

use thiserror::Error;

pub use clause::{clause_combine, Clause, Connective};
pub use measure::{
    atoms_from_interactions, interactions_from_totals, measure_coarsen, measure_from_totals,
    measure_interaction, measure_query, ExplanationMeasure, Provenance, TotalsTable,
};
pub(crate) use measure::{subset_zeta, superset_zeta};
pub use parse::parse_clause;
pub use shapley::{shapley_from_measure, ShapleyValues};
pub use validate::{measure_validate, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("variable count {0} outside [1, 16]")]
    VarCount(usize),
    #[error("variable index {index} out of range for {var_count} variables")]
    IndexOutOfRange { index: usize, var_count: usize },
    #[error("dimension mismatch: {left} vs {right} variables")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{0}")]
    Operand(String),
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownName { name: String, offset: usize },
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("empty clause expression")]
    EmptyInput,
    #[error("totals table incomplete: expected {expected} nonempty subsets, got {got}")]
    IncompleteTotals { expected: usize, got: usize },
    #[error("expected {expected} atoms, got {got}")]
    AtomCount { expected: usize, got: usize },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
}
