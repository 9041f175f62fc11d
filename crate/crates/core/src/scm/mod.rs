//! Causal DAG models with one uniform noise coordinate per node and
//! counterfactual explainability under the comonotone coupling.
//!
//! Node `k` owns noise coordinate `k` (declaration order), including
//! deterministic nodes, which ignore theirs. A hybrid noise vector for a node
//! set `S` takes `E'` on `S` and `E` elsewhere; pushing it through the
//! mechanisms in topological order yields the counterfactual outcome.

mod dag;
mod file;
mod formula;
mod mechanism;

pub use dag::Dag;
pub use file::{model_from_json, model_to_json, MechanismSpec, ModelFile, NodeSpec, ParentFnSpec};
pub use formula::{parse_formula, BinOp, Expr, Formula, FormulaError, Func};
pub use mechanism::{
    render_key, CellIndex, CellTable, Interpolation, Mechanism, ParentFn, QuantileGrid, SampleFault,
};

use thiserror::Error;

use crate::algebra::{measure_from_totals, AlgebraError, ExplanationMeasure, Provenance};
use crate::pickfreeze::{Estimate, EstimateError, EstimatorConfig, PickFreeze};
use crate::rng::NoiseStream;
use crate::sensitivity::totals_table;
use crate::subset::{self, Mask, MAX_VARS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScmError {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph has a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("node `{node}`: {message}")]
    Mechanism { node: String, message: String },
    #[error("node `{node}`: {source}")]
    Formula { node: String, source: FormulaError },
    #[error("node `{node}`: no mechanism entry for parent cell ({key})")]
    UnseenCell { node: String, key: String },
    #[error("node `{node}`: negative scale {value}")]
    NegativeScale { node: String, value: f64 },
    #[error("node `{node}` evaluated to non-finite value {value}")]
    NonFinite { node: String, value: f64 },
    #[error("noise vector has length {got}, model has {expected} nodes")]
    NoiseLength { expected: usize, got: usize },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("malformed model file: {0}")]
    Format(String),
}

/// A DAG with a mechanism per node and a designated outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmModel {
    dag: Dag,
    mechanisms: Vec<Mechanism>,
    outcome: usize,
    order: Vec<usize>,
    labels: Vec<Option<Vec<String>>>,
}

impl ScmModel {
    pub fn new(dag: Dag, mechanisms: Vec<Mechanism>, outcome: &str) -> Result<Self, ScmError> {
        if mechanisms.len() != dag.len() {
            return Err(ScmError::Graph(format!(
                "{} mechanisms for {} nodes",
                mechanisms.len(),
                dag.len()
            )));
        }
        let order = dag.topo_order()?;
        let outcome = dag.index_of(outcome)?;
        for (k, mech) in mechanisms.iter().enumerate() {
            let node = dag.name(k).to_string();
            let parents = dag.parents(k).len();
            if let Some(arity) = mech.parent_arity() {
                if arity != parents {
                    return Err(ScmError::Mechanism {
                        node,
                        message: format!(
                            "{} reads {arity} parents, graph lists {parents}",
                            mech.kind()
                        ),
                    });
                }
            }
            let formulas: Vec<&Formula> = match mech {
                Mechanism::Deterministic(f) => vec![f],
                Mechanism::AdditiveNoise { mean, .. } => formula_of(mean).into_iter().collect(),
                Mechanism::HeteroGaussian { mean, sd } => {
                    formula_of(mean).into_iter().chain(formula_of(sd)).collect()
                }
                _ => Vec::new(),
            };
            for f in formulas {
                if f.referenced().last().is_some_and(|&i| i >= parents) {
                    return Err(ScmError::Mechanism {
                        node,
                        message: format!("formula `{f}` reads beyond the {parents} parents"),
                    });
                }
            }
        }
        let labels = vec![None; dag.len()];
        Ok(Self {
            dag,
            mechanisms,
            outcome,
            order,
            labels,
        })
    }

    /// Attaches category labels for the integer codes of node `node`.
    pub fn with_labels(mut self, node: &str, labels: Vec<String>) -> Result<Self, ScmError> {
        let k = self.dag.index_of(node)?;
        self.labels[k] = Some(labels);
        Ok(self)
    }

    pub fn labels(&self, k: usize) -> Option<&[String]> {
        self.labels[k].as_deref()
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn names(&self) -> &[String] {
        self.dag.names()
    }

    pub fn var_count(&self) -> usize {
        self.dag.len()
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn outcome_name(&self) -> &str {
        self.dag.name(self.outcome)
    }

    pub fn mechanism(&self, k: usize) -> &Mechanism {
        &self.mechanisms[k]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.order
    }

    /// Node values in declaration order for the noise vector `noise`.
    pub fn forward_sample(&self, noise: &[f64]) -> Result<Vec<f64>, ScmError> {
        let mut values = vec![0.0; self.var_count()];
        self.forward_into(noise, &mut values)?;
        Ok(values)
    }

    fn forward_into(&self, noise: &[f64], values: &mut [f64]) -> Result<(), ScmError> {
        if noise.len() != self.var_count() {
            return Err(ScmError::NoiseLength {
                expected: self.var_count(),
                got: noise.len(),
            });
        }
        let mut pv = [0.0; MAX_VARS];
        for &k in &self.order {
            let parents = self.dag.parents(k);
            for (slot, &p) in pv.iter_mut().zip(parents) {
                *slot = values[p];
            }
            let node = || self.dag.name(k).to_string();
            let v = self.mechanisms[k]
                .sample(noise[k], &pv[..parents.len()])
                .map_err(|fault| match fault {
                    SampleFault::UnseenCell(key) => ScmError::UnseenCell { node: node(), key },
                    SampleFault::NegativeScale(value) => ScmError::NegativeScale {
                        node: node(),
                        value,
                    },
                })?;
            if !v.is_finite() {
                return Err(ScmError::NonFinite {
                    node: node(),
                    value: v,
                });
            }
            values[k] = v;
        }
        Ok(())
    }

    /// Noise vector `E` of replicate `replicate`; the first copy of the pair
    /// used by the Monte Carlo estimators.
    pub fn sample_noise(&self, seed: u64, replicate: u64) -> Vec<f64> {
        NoiseStream::new(seed).single(replicate, self.var_count())
    }

    /// Outcome under the hybrid noise `(E'_S, E_{-S})`.
    pub fn counterfactual_outcome(&self, e: &[f64], e2: &[f64], s: Mask) -> Result<f64, ScmError> {
        if e2.len() != e.len() {
            return Err(ScmError::NoiseLength {
                expected: e.len(),
                got: e2.len(),
            });
        }
        self.check_mask(s)?;
        let hybrid: Vec<f64> = (0..e.len())
            .map(|k| if subset::contains(s, k) { e2[k] } else { e[k] })
            .collect();
        Ok(self.forward_sample(&hybrid)?[self.outcome])
    }

    fn check_mask(&self, s: Mask) -> Result<(), ScmError> {
        if s & !subset::full_mask(self.var_count()) != 0 {
            return Err(ScmError::Graph(format!(
                "subset {s:#b} exceeds {} nodes",
                self.var_count()
            )));
        }
        Ok(())
    }

    fn with_engine<R>(&self, cfg: &EstimatorConfig, body: impl FnOnce(&PickFreeze<'_>) -> R) -> R {
        let outcome = self.outcome;
        let eval = move |u: &[f64]| -> Result<f64, EstimateError> {
            let mut values = [0.0; MAX_VARS];
            self.forward_into(u, &mut values[..u.len()])
                .map_err(|e| EstimateError::Evaluation(e.to_string()))?;
            Ok(values[outcome])
        };
        let pf = PickFreeze {
            dim: self.var_count(),
            eval: &eval,
            cfg,
        };
        body(&pf)
    }

    /// `ξ_G(∨_{k∈S} V_k ⇒ Y) = E(f(E) - f(E'_S, E_{-S}))² / 2 Var f(E)`.
    pub fn counterfactual_total(
        &self,
        s: Mask,
        cfg: &EstimatorConfig,
    ) -> Result<Estimate, ScmError> {
        if s == 0 {
            return Err(ScmError::Graph("subset must be nonempty".into()));
        }
        self.check_mask(s)?;
        Ok(self.with_engine(cfg, |pf| pf.upper_totals(&[s]))?.remove(0))
    }

    /// Node indices of the measure's variables: every node, or every node
    /// but the outcome.
    pub fn measure_players(&self, include_outcome: bool) -> Vec<usize> {
        (0..self.var_count())
            .filter(|&k| include_outcome || k != self.outcome)
            .collect()
    }

    /// Full counterfactual measure from totals over every nonempty subset of
    /// the players, all sharing the same noise pairs.
    pub fn estimate_counterfactual_measure(
        &self,
        cfg: &EstimatorConfig,
        include_outcome: bool,
    ) -> Result<ExplanationMeasure<f64>, ScmError> {
        let players = self.measure_players(include_outcome);
        let k = players.len();
        if k == 0 {
            return Err(ScmError::Graph("no explanatory nodes".into()));
        }
        if k > cfg.max_vars {
            return Err(EstimateError::TooManyVars {
                count: k,
                cap: cfg.max_vars,
            }
            .into());
        }
        let node_masks: Vec<Mask> = (1..=subset::full_mask(k))
            .map(|c| subset::from_indices(subset::indices(c).map(|i| players[i])))
            .collect();
        let est = self.with_engine(cfg, |pf| pf.upper_totals(&node_masks))?;
        let totals = totals_table(k, &est)?;
        let names = players
            .iter()
            .map(|&p| self.dag.name(p).to_string())
            .collect();
        let provenance = Provenance::MonteCarlo {
            samples: cfg.samples as u64,
            seed: cfg.seed,
        };
        let outcome_slot = players.iter().position(|&p| p == self.outcome);
        Ok(measure_from_totals(&totals, names, provenance)?.with_outcome(outcome_slot)?)
    }
}

fn formula_of(p: &ParentFn) -> Option<&Formula> {
    match p {
        ParentFn::Formula(f) => Some(f),
        ParentFn::Table(_) => None,
    }
}
