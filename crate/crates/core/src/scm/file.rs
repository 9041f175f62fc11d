//! JSON model files.
//!
//! Nodes are listed under `nodes`; `variables` fixes the node order, which is
//! also the noise-coordinate order. Formulas name parents directly; table
//! keys list one coordinate per parent, the value for discrete parents and
//! the bin number for parents with cut points under `bins`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::formula::parse_formula;
use super::mechanism::{CellIndex, CellTable, Interpolation, Mechanism, ParentFn, QuantileGrid};
use super::{Dag, ScmError, ScmModel};
use crate::distribution::Marginal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub variables: Vec<String>,
    pub outcome: String,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub mechanism: MechanismSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationSpec {
    #[default]
    Linear,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub key: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueCell {
    pub key: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParentFnSpec {
    Expr { expr: String },
    Table { cells: Vec<ValueCell> },
}

type Bins = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    RootGaussian {
        mean: f64,
        sd: f64,
    },
    RootUniform {
        low: f64,
        high: f64,
    },
    RootRademacher {},
    RootCategorical {
        values: Vec<f64>,
        probs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    RootEmpirical {
        sample: Vec<f64>,
    },
    QuantileTable {
        levels: Vec<f64>,
        #[serde(default)]
        interpolation: InterpolationSpec,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        bins: Bins,
        cells: Vec<GridCell>,
    },
    AdditiveNoise {
        mean: ParentFnSpec,
        residuals: Vec<f64>,
        #[serde(default)]
        out_of_fold: bool,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        bins: Bins,
    },
    HeteroGaussian {
        mean: ParentFnSpec,
        sd: ParentFnSpec,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        bins: Bins,
    },
    Deterministic {
        expr: String,
    },
}

struct NodeCtx<'a> {
    node: &'a str,
    parents: &'a [String],
}

impl NodeCtx<'_> {
    fn err(&self, message: impl Into<String>) -> ScmError {
        ScmError::Mechanism {
            node: self.node.to_string(),
            message: message.into(),
        }
    }

    fn index(&self, bins: &Bins) -> Result<CellIndex, ScmError> {
        if let Some(name) = bins.keys().find(|b| !self.parents.contains(b)) {
            return Err(self.err(format!("bins given for `{name}`, which is not a parent")));
        }
        CellIndex::new(self.parents.iter().map(|p| bins.get(p).cloned()).collect())
            .map_err(|m| self.err(m))
    }

    fn parent_fn(&self, spec: &ParentFnSpec, bins: &Bins) -> Result<ParentFn, ScmError> {
        match spec {
            ParentFnSpec::Expr { expr } => {
                let names: Vec<&str> = self.parents.iter().map(String::as_str).collect();
                parse_formula(expr, &names)
                    .map(ParentFn::Formula)
                    .map_err(|source| ScmError::Formula {
                        node: self.node.to_string(),
                        source,
                    })
            }
            ParentFnSpec::Table { cells } => {
                let cells = cells.iter().map(|c| (c.key.clone(), c.value)).collect();
                CellTable::new(self.index(bins)?, cells)
                    .map(ParentFn::Table)
                    .map_err(|m| self.err(m))
            }
        }
    }

    fn mechanism(&self, spec: &MechanismSpec) -> Result<Mechanism, ScmError> {
        let root = |m: Result<Marginal, _>| {
            if !self.parents.is_empty() {
                return Err(self.err("root mechanisms take no parents"));
            }
            m.map(Mechanism::Root)
                .map_err(|e: crate::distribution::DistributionError| self.err(e.0))
        };
        match spec {
            MechanismSpec::RootGaussian { mean, sd } => root(Marginal::gaussian(*mean, *sd)),
            MechanismSpec::RootUniform { low, high } => root(Marginal::uniform(*low, *high)),
            MechanismSpec::RootRademacher {} => root(Ok(Marginal::Rademacher)),
            MechanismSpec::RootCategorical {
                values,
                probs,
                labels,
            } => {
                if let Some(l) = labels {
                    if l.len() != values.len() {
                        return Err(self.err("labels and values differ in length"));
                    }
                }
                root(Marginal::categorical(values.clone(), probs.clone()))
            }
            MechanismSpec::RootEmpirical { sample } => root(Marginal::empirical(sample.clone())),
            MechanismSpec::QuantileTable {
                levels,
                interpolation,
                bins,
                cells,
            } => {
                let interp = match interpolation {
                    InterpolationSpec::Linear => Interpolation::Linear,
                    InterpolationSpec::Step => Interpolation::Step,
                };
                let cells = cells
                    .iter()
                    .map(|c| {
                        QuantileGrid::new(levels.clone(), c.values.clone(), interp)
                            .map(|g| (c.key.clone(), g))
                            .map_err(|m| self.err(format!("cell {:?}: {m}", c.key)))
                    })
                    .collect::<Result<_, _>>()?;
                CellTable::new(self.index(bins)?, cells)
                    .map(Mechanism::QuantileTable)
                    .map_err(|m| self.err(m))
            }
            MechanismSpec::AdditiveNoise {
                mean,
                residuals,
                out_of_fold,
                bins,
            } => Mechanism::additive(self.parent_fn(mean, bins)?, residuals.clone(), *out_of_fold)
                .map_err(|m| self.err(m)),
            MechanismSpec::HeteroGaussian { mean, sd, bins } => Ok(Mechanism::HeteroGaussian {
                mean: self.parent_fn(mean, bins)?,
                sd: self.parent_fn(sd, bins)?,
            }),
            MechanismSpec::Deterministic { expr } => {
                match self.parent_fn(&ParentFnSpec::Expr { expr: expr.clone() }, &Bins::new())? {
                    ParentFn::Formula(f) => Ok(Mechanism::Deterministic(f)),
                    ParentFn::Table(_) => unreachable!("expression spec"),
                }
            }
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<ScmModel, ScmError> {
        let mut specs = Vec::with_capacity(self.variables.len());
        for v in &self.variables {
            let mut found = self.nodes.iter().filter(|n| &n.name == v);
            let node = found
                .next()
                .ok_or_else(|| ScmError::Format(format!("variable `{v}` has no node entry")))?;
            if found.next().is_some() {
                return Err(ScmError::Format(format!(
                    "variable `{v}` has two node entries"
                )));
            }
            specs.push(node);
        }
        if let Some(extra) = self
            .nodes
            .iter()
            .find(|n| !self.variables.contains(&n.name))
        {
            return Err(ScmError::Format(format!(
                "node `{}` is not listed in variables",
                extra.name
            )));
        }
        let graph: Vec<(&str, Vec<&str>)> = specs
            .iter()
            .map(|n| {
                (
                    n.name.as_str(),
                    n.parents.iter().map(String::as_str).collect(),
                )
            })
            .collect();
        let dag = Dag::new(&graph)?;
        let mechanisms = specs
            .iter()
            .map(|n| {
                NodeCtx {
                    node: &n.name,
                    parents: &n.parents,
                }
                .mechanism(&n.mechanism)
            })
            .collect::<Result<_, _>>()?;
        let mut model = ScmModel::new(dag, mechanisms, &self.outcome)?;
        for n in &specs {
            if let MechanismSpec::RootCategorical {
                labels: Some(l), ..
            } = &n.mechanism
            {
                model = model.with_labels(&n.name, l.clone())?;
            }
        }
        Ok(model)
    }

    pub fn from_model(model: &ScmModel) -> Self {
        let dag = model.dag();
        let nodes = (0..dag.len())
            .map(|k| {
                let parents: Vec<String> = dag
                    .parents(k)
                    .iter()
                    .map(|&p| dag.name(p).to_string())
                    .collect();
                let mechanism = spec_of(model.mechanism(k), &parents, model.labels(k));
                NodeSpec {
                    name: dag.name(k).to_string(),
                    parents,
                    mechanism,
                }
            })
            .collect();
        Self {
            variables: dag.names().to_vec(),
            outcome: model.outcome_name().to_string(),
            nodes,
        }
    }
}

fn bins_of(index: &CellIndex, parents: &[String]) -> Bins {
    parents
        .iter()
        .zip(index.bins())
        .filter_map(|(p, b)| b.clone().map(|cuts| (p.clone(), cuts)))
        .collect()
}

fn fn_spec(f: &ParentFn, parents: &[String], bins: &mut Bins) -> ParentFnSpec {
    match f {
        ParentFn::Formula(f) => ParentFnSpec::Expr {
            expr: f.text().to_string(),
        },
        ParentFn::Table(t) => {
            bins.extend(bins_of(t.index(), parents));
            ParentFnSpec::Table {
                cells: t
                    .cells()
                    .iter()
                    .map(|(key, value)| ValueCell {
                        key: key.clone(),
                        value: *value,
                    })
                    .collect(),
            }
        }
    }
}

fn spec_of(m: &Mechanism, parents: &[String], labels: Option<&[String]>) -> MechanismSpec {
    match m {
        Mechanism::Root(Marginal::Gaussian { mean, sd }) => MechanismSpec::RootGaussian {
            mean: *mean,
            sd: *sd,
        },
        Mechanism::Root(Marginal::Uniform { low, high }) => MechanismSpec::RootUniform {
            low: *low,
            high: *high,
        },
        Mechanism::Root(Marginal::Rademacher) => MechanismSpec::RootRademacher {},
        Mechanism::Root(Marginal::Categorical { values, probs }) => {
            MechanismSpec::RootCategorical {
                values: values.clone(),
                probs: probs.clone(),
                labels: labels.map(<[String]>::to_vec),
            }
        }
        Mechanism::Root(Marginal::Empirical { sorted }) => MechanismSpec::RootEmpirical {
            sample: sorted.clone(),
        },
        Mechanism::QuantileTable(t) => {
            let first = &t.cells()[0].1;
            MechanismSpec::QuantileTable {
                levels: first.levels().to_vec(),
                interpolation: match first.interpolation() {
                    Interpolation::Linear => InterpolationSpec::Linear,
                    Interpolation::Step => InterpolationSpec::Step,
                },
                bins: bins_of(t.index(), parents),
                cells: t
                    .cells()
                    .iter()
                    .map(|(key, g)| GridCell {
                        key: key.clone(),
                        values: g.values().to_vec(),
                    })
                    .collect(),
            }
        }
        Mechanism::AdditiveNoise {
            mean,
            residuals,
            out_of_fold,
        } => {
            let mut bins = Bins::new();
            let mean = fn_spec(mean, parents, &mut bins);
            MechanismSpec::AdditiveNoise {
                mean,
                residuals: residuals.clone(),
                out_of_fold: *out_of_fold,
                bins,
            }
        }
        Mechanism::HeteroGaussian { mean, sd } => {
            let mut bins = Bins::new();
            let mean = fn_spec(mean, parents, &mut bins);
            let sd = fn_spec(sd, parents, &mut bins);
            MechanismSpec::HeteroGaussian { mean, sd, bins }
        }
        Mechanism::Deterministic(f) => MechanismSpec::Deterministic {
            expr: f.text().to_string(),
        },
    }
}

pub fn model_from_json(text: &str) -> Result<ScmModel, ScmError> {
    serde_json::from_str::<ModelFile>(text)
        .map_err(|e| ScmError::Format(e.to_string()))?
        .into_model()
}

pub fn model_to_json(model: &ScmModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("model file serializes")
}
