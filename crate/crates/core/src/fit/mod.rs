//! Fitting node mechanisms from data under the comonotone coupling.
//!
//! Parents with few distinct values (or categorical ones) index cells
//! directly; other numeric parents are cut into equal-frequency bins. Every
//! estimator is a per-cell statistic, so cells must hold at least
//! `min_cell` rows.

mod data;

pub use data::{Column, Dataset};

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{empirical_quantile, Marginal};
use crate::scm::{
    render_key, CellIndex, CellTable, Dag, Interpolation, Mechanism, ParentFn, QuantileGrid,
    ScmError, ScmModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("node `{0}` is categorical; only roots may be categorical")]
    CategoricalNode(String),
    #[error("node `{node}`: cell {cell} has {rows} rows, fewer than min_cell = {min}")]
    CellTooSmall {
        node: String,
        cell: String,
        rows: usize,
        min: usize,
    },
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ScmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Cell-mean regression plus a pooled empirical residual law.
    AdditiveEmpirical,
    /// Cell means and cell variances of a Gaussian residual.
    HeteroGaussian,
    /// Per-cell empirical quantiles on a level grid.
    #[default]
    QuantileGrid,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::AdditiveEmpirical => "additive_empirical",
            FitMethod::HeteroGaussian => "hetero_gaussian",
            FitMethod::QuantileGrid => "quantile_grid",
        }
    }
}

/// Smallest variance a fitted Gaussian cell may have.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub method: FitMethod,
    pub levels: Vec<f64>,
    pub min_cell: usize,
    /// 2 for cross-fitted residuals, 1 for in-sample.
    pub folds: usize,
    pub bins: usize,
    pub seed: u64,
    /// Numeric parents with at most this many distinct values are discrete.
    pub max_discrete: usize,
}

/// Levels `0.01, 0.03, …, 0.99`.
pub fn default_levels() -> Vec<f64> {
    (0..50).map(|i| (2 * i + 1) as f64 / 100.0).collect()
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            method: FitMethod::QuantileGrid,
            levels: default_levels(),
            min_cell: 20,
            folds: 2,
            bins: 10,
            seed: 0,
            max_discrete: 20,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::Config(m.to_string()));
        if self.levels.is_empty()
            || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0))
            || self.levels.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("levels must be strictly increasing in (0, 1)");
        }
        if !(1..=2).contains(&self.folds) {
            return bad("folds must be 1 or 2");
        }
        if self.min_cell < 2 {
            return bad("min_cell must be at least 2");
        }
        if self.bins < 1 {
            return bad("bins must be at least 1");
        }
        Ok(())
    }
}

/// Node list, outcome and categorical columns of a graph description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagConfig {
    pub nodes: Vec<DagNode>,
    pub outcome: String,
    #[serde(default)]
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagNode {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<String>,
}

impl DagConfig {
    pub fn dag(&self) -> Result<Dag, ScmError> {
        let nodes: Vec<(&str, Vec<&str>)> = self
            .nodes
            .iter()
            .map(|n| {
                (
                    n.name.as_str(),
                    n.parents.iter().map(String::as_str).collect(),
                )
            })
            .collect();
        Dag::new(&nodes)
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }
}

/// Root law: category frequencies, or the sorted sample.
pub fn fit_root(column: &Column) -> Result<Mechanism, FitError> {
    if column.is_empty() {
        return Err(FitError::Data("empty column".into()));
    }
    match column {
        Column::Categorical { codes, labels } => {
            let mut counts = vec![0usize; labels.len()];
            for &c in codes {
                counts[c as usize] += 1;
            }
            let n = codes.len() as f64;
            let values = (0..labels.len()).map(|i| i as f64).collect();
            let probs = counts.iter().map(|&c| c as f64 / n).collect();
            let law = Marginal::categorical(values, probs).map_err(|e| FitError::Data(e.0))?;
            Ok(Mechanism::Root(law))
        }
        Column::Numeric(v) => Ok(Mechanism::Root(
            Marginal::empirical(v.clone()).map_err(|e| FitError::Data(e.0))?,
        )),
    }
}

/// Rows grouped by parent cell, in increasing key order.
struct Cells {
    index: CellIndex,
    keys: Vec<Vec<f64>>,
    rows: Vec<Vec<usize>>,
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Interior cut points of `bins` equal-frequency bins.
fn equal_frequency_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..bins)
        .map(|j| empirical_quantile(&sorted, j as f64 / bins as f64))
        .collect();
    cuts.dedup();
    // A cut equal to the maximum would leave an empty last bin.
    if cuts.last() == sorted.last() {
        cuts.pop();
    }
    cuts
}

fn numeric_target<'a>(data: &'a Dataset, node: &str) -> Result<&'a [f64], FitError> {
    match data.column(node)? {
        Column::Numeric(v) => Ok(v),
        Column::Categorical { .. } => Err(FitError::CategoricalNode(node.to_string())),
    }
}

fn cells<S: AsRef<str>>(
    data: &Dataset,
    node: &str,
    parents: &[S],
    cfg: &FitConfig,
) -> Result<Cells, FitError> {
    let cols: Vec<&Column> = parents
        .iter()
        .map(|p| data.column(p.as_ref()))
        .collect::<Result<_, _>>()?;
    let bins = cols
        .iter()
        .map(|c| match c {
            Column::Numeric(v) if distinct(v).len() > cfg.max_discrete => {
                Some(equal_frequency_cuts(v, cfg.bins))
            }
            _ => None,
        })
        .collect();
    let index = CellIndex::new(bins).map_err(FitError::Data)?;
    let mut groups: HashMap<String, (Vec<f64>, Vec<usize>)> = HashMap::new();
    let mut pv = vec![0.0; cols.len()];
    for r in 0..data.rows() {
        for (slot, c) in pv.iter_mut().zip(&cols) {
            *slot = c.values()[r];
        }
        let coords = index.coords(&pv);
        groups
            .entry(render_key(&coords))
            .or_insert_with(|| (coords, Vec::new()))
            .1
            .push(r);
    }
    let mut entries: Vec<(Vec<f64>, Vec<usize>)> = groups.into_values().collect();
    entries.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for (key, rows) in &entries {
        if rows.len() < cfg.min_cell {
            let cell = if key.is_empty() {
                "(all rows)".to_string()
            } else {
                parents
                    .iter()
                    .zip(&cols)
                    .zip(key.iter().zip(index.bins()))
                    .map(|((p, c), (&k, b))| match b {
                        Some(_) => format!("{}=bin{}", p.as_ref(), k),
                        None => format!("{}={}", p.as_ref(), c.render(k)),
                    })
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            return Err(FitError::CellTooSmall {
                node: node.to_string(),
                cell,
                rows: rows.len(),
                min: cfg.min_cell,
            });
        }
    }
    let (keys, rows) = entries.into_iter().unzip();
    Ok(Cells { index, keys, rows })
}

fn mean_of(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64
}

/// Cell means and residuals. With two folds each cell is split in half at
/// random and every residual is taken against the other half's mean.
fn mean_and_residuals(
    y: &[f64],
    cells: &Cells,
    cfg: &FitConfig,
    stream: u64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let means: Vec<f64> = cells.rows.iter().map(|rows| mean_of(y, rows)).collect();
    let residuals = if cfg.folds == 1 {
        cells
            .rows
            .iter()
            .zip(&means)
            .map(|(rows, m)| rows.iter().map(|&r| y[r] - m).collect())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        cells
            .rows
            .iter()
            .map(|rows| {
                let mut shuffled = rows.clone();
                shuffled.shuffle(&mut rng);
                let (a, b) = shuffled.split_at(shuffled.len() / 2);
                let (ma, mb) = (mean_of(y, a), mean_of(y, b));
                a.iter()
                    .map(|&r| y[r] - mb)
                    .chain(b.iter().map(|&r| y[r] - ma))
                    .collect()
            })
            .collect()
    };
    (means, residuals)
}

fn value_table(cells: &Cells, values: Vec<f64>) -> Result<ParentFn, FitError> {
    let entries = cells.keys.iter().cloned().zip(values).collect();
    CellTable::new(cells.index.clone(), entries)
        .map(ParentFn::Table)
        .map_err(FitError::Data)
}

fn stream_of(data: &Dataset, node: &str) -> u64 {
    data.names().iter().position(|n| n == node).unwrap_or(0) as u64
}

/// `V = ĝ(pa) + R`, with `R` drawn from the pooled residuals.
pub fn fit_additive<S: AsRef<str>>(
    data: &Dataset,
    node: &str,
    parents: &[S],
    cfg: &FitConfig,
) -> Result<Mechanism, FitError> {
    cfg.validate()?;
    let y = numeric_target(data, node)?;
    let cells = cells(data, node, parents, cfg)?;
    let (means, residuals) = mean_and_residuals(y, &cells, cfg, stream_of(data, node));
    let pool = residuals.into_iter().flatten().collect();
    Mechanism::additive(value_table(&cells, means)?, pool, cfg.folds == 2).map_err(FitError::Data)
}

/// `V = ĝ(pa) + σ̂(pa) Z` with `σ̂²` the cell mean of squared residuals.
pub fn fit_hetero_gaussian<S: AsRef<str>>(
    data: &Dataset,
    node: &str,
    parents: &[S],
    cfg: &FitConfig,
) -> Result<Mechanism, FitError> {
    cfg.validate()?;
    let y = numeric_target(data, node)?;
    let cells = cells(data, node, parents, cfg)?;
    let (means, residuals) = mean_and_residuals(y, &cells, cfg, stream_of(data, node));
    let sds = residuals
        .iter()
        .map(|r| {
            (r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64)
                .max(VARIANCE_FLOOR)
                .sqrt()
        })
        .collect();
    Ok(Mechanism::HeteroGaussian {
        mean: value_table(&cells, means)?,
        sd: value_table(&cells, sds)?,
    })
}

/// Pool-adjacent-violators: the non-decreasing sequence closest to `v` in
/// least squares.
pub fn pava(v: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().expect("two blocks") =
                ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Per-cell empirical quantiles at `cfg.levels`, rearranged to be monotone.
///
/// Nodes with at most `cfg.max_discrete` distinct values use step lookup so
/// samples stay in the observed support; others interpolate linearly.
pub fn fit_quantile_grid<S: AsRef<str>>(
    data: &Dataset,
    node: &str,
    parents: &[S],
    cfg: &FitConfig,
) -> Result<Mechanism, FitError> {
    cfg.validate()?;
    let y = numeric_target(data, node)?;
    let cells = cells(data, node, parents, cfg)?;
    let interpolation = if distinct(y).len() <= cfg.max_discrete {
        Interpolation::Step
    } else {
        Interpolation::Linear
    };
    let mut entries = Vec::with_capacity(cells.keys.len());
    for (key, rows) in cells.keys.iter().zip(&cells.rows) {
        let mut sorted: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        sorted.sort_by(f64::total_cmp);
        let raw: Vec<f64> = cfg
            .levels
            .iter()
            .map(|&l| empirical_quantile(&sorted, l))
            .collect();
        let values = pava(&raw);
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let grid =
            QuantileGrid::new(cfg.levels.clone(), values, interpolation).map_err(FitError::Data)?;
        entries.push((key.clone(), grid));
    }
    CellTable::new(cells.index, entries)
        .map(Mechanism::QuantileTable)
        .map_err(FitError::Data)
}

/// Fits every node: roots by [`fit_root`], the rest by `cfg.method`.
pub fn fit_model(data: &Dataset, dag: &DagConfig, cfg: &FitConfig) -> Result<ScmModel, FitError> {
    cfg.validate()?;
    let graph = dag.dag()?;
    graph.topo_order()?;
    for n in &dag.nodes {
        data.column(&n.name)?;
    }
    if data.column(&dag.outcome)?.is_categorical() {
        return Err(FitError::CategoricalNode(dag.outcome.clone()));
    }
    let mechanisms = dag
        .nodes
        .par_iter()
        .map(|n| {
            if n.parents.is_empty() {
                fit_root(data.column(&n.name)?)
            } else {
                match cfg.method {
                    FitMethod::AdditiveEmpirical => fit_additive(data, &n.name, &n.parents, cfg),
                    FitMethod::HeteroGaussian => {
                        fit_hetero_gaussian(data, &n.name, &n.parents, cfg)
                    }
                    FitMethod::QuantileGrid => fit_quantile_grid(data, &n.name, &n.parents, cfg),
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut model = ScmModel::new(graph, mechanisms, &dag.outcome)?;
    for n in &dag.nodes {
        if let Column::Categorical { labels, .. } = data.column(&n.name)? {
            model = model.with_labels(&n.name, labels.clone())?;
        }
    }
    Ok(model)
}
