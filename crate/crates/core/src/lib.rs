//! Counterfactual explainability for black-box functions and causal DAG models.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod anova;
pub mod scalar;
pub mod subset;

pub use scalar::Scalar;
pub mod distribution;
pub mod fit;
pub mod pickfreeze;
pub mod rng;
pub mod scm;
pub mod sensitivity;
