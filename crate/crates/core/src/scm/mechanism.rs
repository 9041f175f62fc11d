//! Conditional quantile mechanisms `V_k = Q_k(E_k | V_pa(k))`.

use std::collections::HashMap;

use super::formula::Formula;
use crate::distribution::{empirical_quantile, normal_quantile, Marginal};

/// Why a mechanism could not produce a value.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleFault {
    UnseenCell(String),
    NegativeScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Piecewise linear between levels, flat outside.
    #[default]
    Linear,
    /// Value at the smallest level `≥ e`, last value above the grid.
    Step,
}

/// Quantiles at strictly increasing levels in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    levels: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl QuantileGrid {
    pub fn new(
        levels: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
    ) -> Result<Self, String> {
        if levels.is_empty() || levels.len() != values.len() {
            return Err(format!(
                "grid has {} levels and {} values",
                levels.len(),
                values.len()
            ));
        }
        if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err("levels must lie in (0, 1)".into());
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err("levels must be strictly increasing".into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err("grid values must be finite".into());
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err("grid values must be non-decreasing".into());
        }
        Ok(Self {
            levels,
            values,
            interpolation,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn eval(&self, e: f64) -> f64 {
        let n = self.levels.len();
        // Index of the first level ≥ e.
        let i = self.levels.partition_point(|&l| l < e);
        if i == n {
            return self.values[n - 1];
        }
        match self.interpolation {
            Interpolation::Step => self.values[i],
            Interpolation::Linear => {
                if i == 0 {
                    return self.values[0];
                }
                let (l0, l1) = (self.levels[i - 1], self.levels[i]);
                let (v0, v1) = (self.values[i - 1], self.values[i]);
                v0 + (v1 - v0) * (e - l0) / (l1 - l0)
            }
        }
    }
}

/// Maps parent values to a cell key. A parent is either discrete, keyed by
/// its value, or binned by interior cut points, keyed by its bin number.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellIndex {
    bins: Vec<Option<Vec<f64>>>,
}

/// Fixed-precision rendering of one key coordinate.
pub fn key_part(v: f64) -> String {
    format!("{:.6}", v + 0.0)
}

pub fn render_key(coords: &[f64]) -> String {
    coords
        .iter()
        .map(|&v| key_part(v))
        .collect::<Vec<_>>()
        .join(",")
}

impl CellIndex {
    pub fn discrete(parents: usize) -> Self {
        Self {
            bins: vec![None; parents],
        }
    }

    pub fn new(bins: Vec<Option<Vec<f64>>>) -> Result<Self, String> {
        for cuts in bins.iter().flatten() {
            if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err("bin cut points must be finite and strictly increasing".into());
            }
        }
        Ok(Self { bins })
    }

    pub fn parent_count(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[Option<Vec<f64>>] {
        &self.bins
    }

    /// Bin number of `v`: the count of cut points strictly below it, so
    /// values outside the cut range fall in the nearest end bin.
    pub fn bin_of(cuts: &[f64], v: f64) -> usize {
        cuts.partition_point(|&c| c < v)
    }

    /// Key coordinates of a parent-value tuple.
    pub fn coords(&self, parent_values: &[f64]) -> Vec<f64> {
        self.bins
            .iter()
            .zip(parent_values)
            .map(|(b, &v)| match b {
                Some(cuts) => Self::bin_of(cuts, v) as f64,
                None => v,
            })
            .collect()
    }

    pub fn key(&self, parent_values: &[f64]) -> String {
        render_key(&self.coords(parent_values))
    }
}

/// Per-cell payloads keyed by [`CellIndex`] coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable<T> {
    index: CellIndex,
    cells: Vec<(Vec<f64>, T)>,
    lookup: HashMap<String, usize>,
}

impl<T> CellTable<T> {
    pub fn new(index: CellIndex, cells: Vec<(Vec<f64>, T)>) -> Result<Self, String> {
        if cells.is_empty() {
            return Err("table has no cells".into());
        }
        let mut lookup = HashMap::with_capacity(cells.len());
        for (i, (key, _)) in cells.iter().enumerate() {
            if key.len() != index.parent_count() {
                return Err(format!(
                    "cell key has {} coordinates for {} parents",
                    key.len(),
                    index.parent_count()
                ));
            }
            if lookup.insert(render_key(key), i).is_some() {
                return Err(format!("duplicate cell ({})", render_key(key)));
            }
        }
        Ok(Self {
            index,
            cells,
            lookup,
        })
    }

    pub fn index(&self) -> &CellIndex {
        &self.index
    }

    pub fn cells(&self) -> &[(Vec<f64>, T)] {
        &self.cells
    }

    pub fn get(&self, parent_values: &[f64]) -> Result<&T, SampleFault> {
        let key = self.index.key(parent_values);
        match self.lookup.get(&key) {
            Some(&i) => Ok(&self.cells[i].1),
            None => Err(SampleFault::UnseenCell(key)),
        }
    }
}

/// A function of the parents given by a formula or a cell table.
#[derive(Debug, Clone, PartialEq)]
pub enum ParentFn {
    Formula(Formula),
    Table(CellTable<f64>),
}

impl ParentFn {
    pub fn eval(&self, parent_values: &[f64]) -> Result<f64, SampleFault> {
        match self {
            ParentFn::Formula(f) => Ok(f.eval(parent_values)),
            ParentFn::Table(t) => t.get(parent_values).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Root(Marginal),
    QuantileTable(CellTable<QuantileGrid>),
    /// `g(pa) + R(e)` with `R` the empirical quantile of a residual pool.
    AdditiveNoise {
        mean: ParentFn,
        residuals: Vec<f64>,
        /// Residuals came from out-of-fold predictions.
        out_of_fold: bool,
    },
    /// `g(pa) + s(pa) Φ⁻¹(e)`.
    HeteroGaussian {
        mean: ParentFn,
        sd: ParentFn,
    },
    /// Ignores its noise coordinate.
    Deterministic(Formula),
}

impl Mechanism {
    /// Additive noise with the residual pool sorted.
    pub fn additive(
        mean: ParentFn,
        mut residuals: Vec<f64>,
        out_of_fold: bool,
    ) -> Result<Self, String> {
        if residuals.is_empty() || residuals.iter().any(|r| !r.is_finite()) {
            return Err("residual pool must be non-empty and finite".into());
        }
        residuals.sort_by(f64::total_cmp);
        Ok(Mechanism::AdditiveNoise {
            mean,
            residuals,
            out_of_fold,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Mechanism::Root(Marginal::Gaussian { .. }) => "root_gaussian",
            Mechanism::Root(Marginal::Uniform { .. }) => "root_uniform",
            Mechanism::Root(Marginal::Rademacher) => "root_rademacher",
            Mechanism::Root(Marginal::Categorical { .. }) => "root_categorical",
            Mechanism::Root(Marginal::Empirical { .. }) => "root_empirical",
            Mechanism::QuantileTable(_) => "quantile_table",
            Mechanism::AdditiveNoise { .. } => "additive_noise",
            Mechanism::HeteroGaussian { .. } => "hetero_gaussian",
            Mechanism::Deterministic(_) => "deterministic",
        }
    }

    /// Number of parent values the mechanism reads, when it fixes one.
    pub(crate) fn parent_arity(&self) -> Option<usize> {
        fn of(p: &ParentFn) -> Option<usize> {
            match p {
                ParentFn::Formula(_) => None,
                ParentFn::Table(t) => Some(t.index().parent_count()),
            }
        }
        match self {
            Mechanism::Root(_) => Some(0),
            Mechanism::QuantileTable(t) => Some(t.index().parent_count()),
            Mechanism::AdditiveNoise { mean, .. } => of(mean),
            Mechanism::HeteroGaussian { mean, sd } => of(mean).or(of(sd)),
            Mechanism::Deterministic(_) => None,
        }
    }

    pub fn sample(&self, e: f64, parent_values: &[f64]) -> Result<f64, SampleFault> {
        match self {
            Mechanism::Root(m) => Ok(m.quantile(e)),
            Mechanism::QuantileTable(t) => Ok(t.get(parent_values)?.eval(e)),
            Mechanism::AdditiveNoise {
                mean, residuals, ..
            } => Ok(mean.eval(parent_values)? + empirical_quantile(residuals, e)),
            Mechanism::HeteroGaussian { mean, sd } => {
                let s = sd.eval(parent_values)?;
                if s < 0.0 {
                    return Err(SampleFault::NegativeScale(s));
                }
                let m = mean.eval(parent_values)?;
                Ok(if s == 0.0 {
                    m
                } else {
                    m + s * normal_quantile(e)
                })
            }
            Mechanism::Deterministic(f) => Ok(f.eval(parent_values)),
        }
    }
}
