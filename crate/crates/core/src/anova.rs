//! Exact functional ANOVA on finite, independent, discrete domains.
//!
//! Everything here is computed by enumerating the product support, so the
//! results serve as the oracle for the Monte Carlo estimators. Points are
//! visited in row-major order of variable index (the last variable varies
//! fastest) and all sums are accumulated in that fixed order.

use thiserror::Error;

use crate::algebra::{AlgebraError, ExplanationMeasure, Provenance};
use crate::scalar::Scalar;
use crate::subset::{self, Mask, MAX_VARS};

/// Maximum number of points in the product support.
pub const MAX_POINTS: usize = 10_000_000;
/// Maximum total size of all conditional-expectation tables, `Π (n_k + 1)`.
pub const MAX_TABLE_ENTRIES: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnovaError {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("domain too large: {0} points")]
    TooLarge(usize),
    #[error("function value is not finite at point {0:?}")]
    NonFinite(Vec<f64>),
    #[error("function has zero variance")]
    ZeroVariance,
    #[error("subsets overlap: {0:#b} and {1:#b}")]
    Overlapping(Mask, Mask),
    #[error("subset {0:#b} out of range")]
    SubsetRange(Mask),
    #[error("internal consistency: {0}")]
    Internal(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Law of `K` independent discrete variables: per variable a list of
/// `(value, probability)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain<T> {
    supports: Vec<Vec<(T, T)>>,
}

impl<T: Scalar> DiscreteDomain<T> {
    pub fn new(supports: Vec<Vec<(T, T)>>) -> Result<Self, AnovaError> {
        if supports.is_empty() || supports.len() > MAX_VARS {
            return Err(AnovaError::Domain(format!(
                "{} variables, expected 1..={MAX_VARS}",
                supports.len()
            )));
        }
        let mut points: usize = 1;
        for (k, s) in supports.iter().enumerate() {
            if s.is_empty() {
                return Err(AnovaError::Domain(format!(
                    "variable {k} has empty support"
                )));
            }
            if s.iter().any(|&(v, p)| !v.is_finite() || !(p >= T::zero())) {
                return Err(AnovaError::Domain(format!(
                    "variable {k} has a non-finite value or negative probability"
                )));
            }
            let total: T = s.iter().map(|&(_, p)| p).sum();
            if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(4.0)) {
                return Err(AnovaError::Domain(format!(
                    "variable {k} probabilities sum to {total}"
                )));
            }
            points = points.saturating_mul(s.len());
        }
        if points > MAX_POINTS {
            return Err(AnovaError::TooLarge(points));
        }
        Ok(Self { supports })
    }

    /// `K` independent Rademacher (±1 with probability ½) variables.
    pub fn rademacher(k: usize) -> Result<Self, AnovaError> {
        let half = T::lit(0.5);
        Self::new(vec![vec![(-T::one(), half), (T::one(), half)]; k])
    }

    pub fn var_count(&self) -> usize {
        self.supports.len()
    }

    pub fn support(&self, k: usize) -> &[(T, T)] {
        &self.supports[k]
    }

    pub fn point_count(&self) -> usize {
        self.supports.iter().map(Vec::len).product()
    }

    fn dims(&self) -> Vec<usize> {
        self.supports.iter().map(Vec::len).collect()
    }
}

/// `f` tabulated on the product support with point probabilities.
struct Grid<T> {
    dims: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    fn build<F: Fn(&[T]) -> T>(f: &F, d: &DiscreteDomain<T>) -> Result<Self, AnovaError> {
        let dims = d.dims();
        let k = dims.len();
        let mut strides = vec![1; k];
        for i in (0..k.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let n = d.point_count();
        let mut values = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        let mut digits = vec![0usize; k];
        let mut point = vec![T::zero(); k];
        for _ in 0..n {
            let mut p = T::one();
            for j in 0..k {
                let (v, pj) = d.supports[j][digits[j]];
                point[j] = v;
                p = p * pj;
            }
            let y = f(&point);
            if !y.is_finite() {
                return Err(AnovaError::NonFinite(
                    point.iter().map(|v| v.to_f64_lossy()).collect(),
                ));
            }
            values.push(y);
            probs.push(p);
            for j in (0..k).rev() {
                digits[j] += 1;
                if digits[j] < dims[j] {
                    break;
                }
                digits[j] = 0;
            }
        }
        Ok(Self {
            dims,
            strides,
            values,
            probs,
        })
    }

    fn digit(&self, index: usize, k: usize) -> usize {
        index / self.strides[k] % self.dims[k]
    }

    /// Index of the point taking coordinates in `s` from `b` and the rest from `a`.
    fn hybrid(&self, a: usize, b: usize, s: Mask) -> usize {
        (0..self.dims.len())
            .map(|k| {
                let src = if subset::contains(s, k) { b } else { a };
                self.digit(src, k) * self.strides[k]
            })
            .sum()
    }

    fn mean(&self) -> T {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&v, &p)| v * p)
            .sum()
    }

    /// `E[g(W, W')]` over independent copies `W, W'`.
    fn pair_expectation(&self, g: impl Fn(usize, usize) -> T) -> T {
        let n = self.values.len();
        let mut acc = T::zero();
        for a in 0..n {
            let mut row = T::zero();
            for b in 0..n {
                row = row + self.probs[b] * g(a, b);
            }
            acc = acc + self.probs[a] * row;
        }
        acc
    }

    /// `I_S(w, w')`: inclusion-exclusion over hybrids of `w` and `w'`.
    fn contrast(&self, a: usize, b: usize, s: Mask) -> T {
        let k = subset::size(s);
        subset::subsets_of(s)
            .map(|t| {
                let v = self.values[self.hybrid(a, b, t)];
                if subset::sign(k - subset::size(t)) > 0 {
                    v
                } else {
                    -v
                }
            })
            .sum()
    }
}

/// Variance components `σ²_S` of the Hoeffding decomposition, by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaDecomposition<T> {
    pub var_count: usize,
    pub mean: T,
    pub total_variance: T,
    pub sigma2: Vec<T>,
}

/// Component functions `f_S` tabulated over the support of `W_S`
/// (row-major over the members of `S`).
#[derive(Debug, Clone)]
pub struct HoeffdingComponents<T> {
    pub tables: Vec<Vec<T>>,
}

/// Table layout helpers for a subset of variables.
fn table_dims(dims: &[usize], s: Mask) -> Vec<usize> {
    subset::indices(s)
        .filter(|&k| k < dims.len())
        .map(|k| dims[k])
        .collect()
}

/// Sums variable `k` out of the table of `s | k` with the weights of `k`.
fn marginalize<T: Scalar>(
    table: &[T],
    dims: &[usize],
    s_with_k: Mask,
    k: usize,
    w: &[T],
) -> Vec<T> {
    let members: Vec<usize> = subset::indices(s_with_k)
        .filter(|&j| j < dims.len())
        .collect();
    let pos = members.iter().position(|&j| j == k).expect("k in subset");
    let inner: usize = members[pos + 1..].iter().map(|&j| dims[j]).product();
    let nk = dims[k];
    let outer = table.len() / (nk * inner);
    let mut out = vec![T::zero(); outer * inner];
    for o in 0..outer {
        for i in 0..inner {
            let mut acc = T::zero();
            for j in 0..nk {
                acc = acc + w[j] * table[o * nk * inner + j * inner + i];
            }
            out[o * inner + i] = acc;
        }
    }
    out
}

/// Applies `I - E_k` in place to a table over `s` (which contains `k`).
fn center<T: Scalar>(table: &mut [T], dims: &[usize], s: Mask, k: usize, w: &[T]) {
    let members: Vec<usize> = subset::indices(s).filter(|&j| j < dims.len()).collect();
    let pos = members.iter().position(|&j| j == k).expect("k in subset");
    let inner: usize = members[pos + 1..].iter().map(|&j| dims[j]).product();
    let nk = dims[k];
    let outer = table.len() / (nk * inner);
    for o in 0..outer {
        for i in 0..inner {
            let mut mean = T::zero();
            for j in 0..nk {
                mean = mean + w[j] * table[o * nk * inner + j * inner + i];
            }
            for j in 0..nk {
                let idx = o * nk * inner + j * inner + i;
                table[idx] = table[idx] - mean;
            }
        }
    }
}

/// Probabilities of the cells of the table over `s`.
fn cell_probs<T: Scalar>(d: &DiscreteDomain<T>, s: Mask) -> Vec<T> {
    let mut probs = vec![T::one()];
    for k in subset::indices(s).filter(|&k| k < d.var_count()) {
        let w: Vec<T> = d.support(k).iter().map(|&(_, p)| p).collect();
        probs = probs
            .iter()
            .flat_map(|&p| w.iter().map(move |&q| p * q))
            .collect();
    }
    probs
}

/// Tabulates every component `f_S(w_S) = E[f - Σ_{S'⊊S} f_{S'} | W_S = w_S]`.
///
/// The conditional expectations `E[f | W_S]` are obtained by summing out one
/// variable at a time; the recursion is then applied as the product of
/// centering operators `Π_{k∈S} (I - E_k)`, which expands to the same sum.
pub fn hoeffding_components<T: Scalar, F: Fn(&[T]) -> T>(
    f: &F,
    d: &DiscreteDomain<T>,
) -> Result<HoeffdingComponents<T>, AnovaError> {
    let grid = Grid::build(f, d)?;
    components_from_grid(&grid, d)
}

fn components_from_grid<T: Scalar>(
    grid: &Grid<T>,
    d: &DiscreteDomain<T>,
) -> Result<HoeffdingComponents<T>, AnovaError> {
    let k = d.var_count();
    let entries: usize = grid
        .dims
        .iter()
        .fold(1usize, |acc, &n| acc.saturating_mul(n + 1));
    if entries > MAX_TABLE_ENTRIES {
        return Err(AnovaError::TooLarge(entries));
    }
    let weights: Vec<Vec<T>> = (0..k)
        .map(|j| d.support(j).iter().map(|&(_, p)| p).collect())
        .collect();
    let full = subset::full_mask(k);
    let n = 1usize << k;
    let mut tables: Vec<Vec<T>> = vec![Vec::new(); n];
    tables[full as usize] = grid.values.clone();
    for s in (0..full).rev() {
        let j = (0..k)
            .find(|&j| !subset::contains(s, j))
            .expect("proper subset");
        let parent = s | 1 << j;
        tables[s as usize] =
            marginalize(&tables[parent as usize], &grid.dims, parent, j, &weights[j]);
    }
    for (s, table) in tables.iter_mut().enumerate() {
        for j in subset::indices(s as Mask) {
            center(table, &grid.dims, s as Mask, j, &weights[j]);
        }
    }
    Ok(HoeffdingComponents { tables })
}

impl<T: Scalar> HoeffdingComponents<T> {
    /// Largest `|E[f_S f_S']|` over pairs `S ≠ S'`, evaluated on the full grid.
    pub fn max_cross_moment(&self, d: &DiscreteDomain<T>) -> T {
        let k = d.var_count();
        let dims = d.dims();
        let n: usize = dims.iter().product();
        let full_probs = cell_probs(d, subset::full_mask(k));
        let expand = |s: Mask| -> Vec<T> {
            let sub_dims = table_dims(&dims, s);
            let members: Vec<usize> = subset::indices(s).collect();
            (0..n)
                .map(|idx| {
                    let mut rem = idx;
                    let mut digits = vec![0; k];
                    for j in (0..k).rev() {
                        digits[j] = rem % dims[j];
                        rem /= dims[j];
                    }
                    let mut t = 0;
                    for (m, &j) in members.iter().enumerate() {
                        t = t * sub_dims[m] + digits[j];
                    }
                    self.tables[s as usize][t]
                })
                .collect()
        };
        let expanded: Vec<Vec<T>> = (0..1u32 << k).map(expand).collect();
        let mut worst = T::zero();
        for a in 0..expanded.len() {
            for b in a + 1..expanded.len() {
                let m: T = (0..n)
                    .map(|i| full_probs[i] * expanded[a][i] * expanded[b][i])
                    .sum();
                worst = worst.max(m.abs());
            }
        }
        worst
    }
}

/// Exact Hoeffding decomposition of `f` under the law `d`.
pub fn hoeffding_decompose<T: Scalar, F: Fn(&[T]) -> T>(
    f: &F,
    d: &DiscreteDomain<T>,
) -> Result<AnovaDecomposition<T>, AnovaError> {
    let grid = Grid::build(f, d)?;
    let comps = components_from_grid(&grid, d)?;
    let mean = grid.mean();
    let total_variance: T = grid
        .values
        .iter()
        .zip(&grid.probs)
        .map(|(&v, &p)| p * (v - mean) * (v - mean))
        .sum();
    let mut sigma2: Vec<T> = comps
        .tables
        .iter()
        .enumerate()
        .map(|(s, table)| {
            let probs = cell_probs(d, s as Mask);
            table.iter().zip(&probs).map(|(&v, &p)| p * v * v).sum()
        })
        .collect();
    sigma2[0] = T::zero();
    let scale = total_variance.max(mean * mean).max(T::one());
    let tiny = T::lit(1e-12) * total_variance;
    for v in sigma2.iter_mut() {
        if *v < T::zero() {
            if -*v < tiny {
                *v = T::zero();
            } else {
                return Err(AnovaError::Internal(format!(
                    "negative variance component {v}"
                )));
            }
        }
    }
    let sum: T = sigma2.iter().copied().sum();
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e3)) * scale;
    if (sum - total_variance).abs() > tol {
        return Err(AnovaError::Internal(format!(
            "components sum to {sum}, variance is {total_variance}"
        )));
    }
    Ok(AnovaDecomposition {
        var_count: d.var_count(),
        mean,
        total_variance,
        sigma2,
    })
}

/// Sobol lower, upper and superset indices for every subset (variance units).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityIndices<T> {
    pub total_variance: T,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub superset: Vec<T>,
}

impl<T: Scalar> SensitivityIndices<T> {
    fn scaled(v: &[T], by: T) -> Vec<T> {
        v.iter().map(|&x| x / by).collect()
    }

    pub fn lower_normalized(&self) -> Vec<T> {
        Self::scaled(&self.lower, self.total_variance)
    }

    pub fn upper_normalized(&self) -> Vec<T> {
        Self::scaled(&self.upper, self.total_variance)
    }

    pub fn superset_normalized(&self) -> Vec<T> {
        Self::scaled(&self.superset, self.total_variance)
    }
}

/// Sums of components: lower over subsets of `S`, upper over sets meeting
/// `S`, superset importance over supersets of `S`.
pub fn indices_from_decomposition<T: Scalar>(dec: &AnovaDecomposition<T>) -> SensitivityIndices<T> {
    let n = dec.sigma2.len();
    let mut lower = dec.sigma2.clone();
    crate::algebra::subset_zeta(&mut lower);
    let mut superset = dec.sigma2.clone();
    crate::algebra::superset_zeta(&mut superset);
    let full = n - 1;
    let upper = (0..n)
        .map(|s| dec.total_variance - lower[full & !s])
        .collect();
    SensitivityIndices {
        total_variance: dec.total_variance,
        lower,
        upper,
        superset,
    }
}

/// The measure with atom masses `σ²_S / Var(f)`.
pub fn exact_measure<T: Scalar>(
    dec: &AnovaDecomposition<T>,
    names: Vec<String>,
) -> Result<ExplanationMeasure<T>, AnovaError> {
    if !(dec.total_variance > T::zero()) {
        return Err(AnovaError::ZeroVariance);
    }
    let atoms = dec.sigma2.iter().map(|&s| s / dec.total_variance).collect();
    Ok(ExplanationMeasure::new(names, atoms, Provenance::Exact)?)
}

/// Exact pick-freeze quantities over pairs of independent copies `(W, W')`.
///
/// These enumerate `N²` pairs and never touch the decomposition, so they
/// check it independently.
pub struct ExactPairs<T> {
    grid: Grid<T>,
}

impl<T: Scalar> ExactPairs<T> {
    pub fn new<F: Fn(&[T]) -> T>(f: &F, d: &DiscreteDomain<T>) -> Result<Self, AnovaError> {
        let n = d.point_count();
        if n.saturating_mul(n) > MAX_POINTS * 10 {
            return Err(AnovaError::TooLarge(n.saturating_mul(n)));
        }
        Ok(Self {
            grid: Grid::build(f, d)?,
        })
    }

    fn check(&self, s: Mask) -> Result<(), AnovaError> {
        if s & !subset::full_mask(self.grid.dims.len()) != 0 {
            return Err(AnovaError::SubsetRange(s));
        }
        Ok(())
    }

    pub fn variance(&self) -> T {
        let m = self.grid.mean();
        self.grid
            .values
            .iter()
            .zip(&self.grid.probs)
            .map(|(&v, &p)| p * (v - m) * (v - m))
            .sum()
    }

    /// `½ E[(f(W) - f(W'_S, W_{-S}))²]`.
    pub fn upper(&self, s: Mask) -> Result<T, AnovaError> {
        self.check(s)?;
        let g = &self.grid;
        Ok(T::lit(0.5)
            * g.pair_expectation(|a, b| {
                let d = g.values[a] - g.values[g.hybrid(a, b, s)];
                d * d
            }))
    }

    /// `Cov(f(W), f(W_S, W'_{-S}))`.
    pub fn lower(&self, s: Mask) -> Result<T, AnovaError> {
        self.check(s)?;
        let g = &self.grid;
        let m = g.mean();
        let rest = subset::full_mask(g.dims.len()) & !s;
        Ok(g.pair_expectation(|a, b| (g.values[a] - m) * (g.values[g.hybrid(a, b, rest)] - m)))
    }

    /// `Var(I_S(W, W'))`; for `S = ∅` this is `Var(f)`.
    pub fn contrast_variance(&self, s: Mask) -> Result<T, AnovaError> {
        self.check(s)?;
        let g = &self.grid;
        let mean = g.pair_expectation(|a, b| g.contrast(a, b, s));
        Ok(g.pair_expectation(|a, b| {
            let c = g.contrast(a, b, s) - mean;
            c * c
        }))
    }

    /// `2^{-|S|} Var(I_S(W, W'))`.
    pub fn superset(&self, s: Mask) -> Result<T, AnovaError> {
        let scale = T::lit((1u64 << subset::size(s)) as f64);
        Ok(self.contrast_variance(s)? / scale)
    }

    /// `Cov(I_S(W, W'), I_{S2}(W, W'))` for disjoint `S`, `S2`.
    pub fn contrast_cov(&self, s: Mask, s2: Mask) -> Result<T, AnovaError> {
        self.check(s)?;
        self.check(s2)?;
        if s & s2 != 0 {
            return Err(AnovaError::Overlapping(s, s2));
        }
        let g = &self.grid;
        let m1 = g.pair_expectation(|a, b| g.contrast(a, b, s));
        let m2 = g.pair_expectation(|a, b| g.contrast(a, b, s2));
        Ok(g.pair_expectation(|a, b| (g.contrast(a, b, s) - m1) * (g.contrast(a, b, s2) - m2)))
    }

    /// `Var(f(W) - f(W'_S, W_{-S}))`.
    pub fn difference_variance(&self, s: Mask) -> Result<T, AnovaError> {
        self.check(s)?;
        let g = &self.grid;
        let diff = |a: usize, b: usize| g.values[a] - g.values[g.hybrid(a, b, s)];
        let mean = g.pair_expectation(diff);
        Ok(g.pair_expectation(|a, b| {
            let d = diff(a, b) - mean;
            d * d
        }))
    }
}

/// Exact `Cov(I_S, I_{S2})` by enumeration of all pairs.
pub fn exact_contrast_cov<T: Scalar, F: Fn(&[T]) -> T>(
    f: &F,
    d: &DiscreteDomain<T>,
    s: Mask,
    s2: Mask,
) -> Result<T, AnovaError> {
    ExactPairs::new(f, d)?.contrast_cov(s, s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("W{i}")).collect()
    }

    #[test]
    fn product_of_rademachers() {
        let d = DiscreteDomain::<f64>::rademacher(2).unwrap();
        let dec = hoeffding_decompose(&|w: &[f64]| w[0] * w[1], &d).unwrap();
        assert_abs_diff_eq!(dec.total_variance, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.sigma2[0b11], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.sigma2[0b01], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.sigma2[0b10], 0.0, epsilon = 1e-15);
        let idx = indices_from_decomposition(&dec);
        assert_abs_diff_eq!(idx.lower[0b01], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(idx.upper[0b01], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(idx.superset[0b01], 1.0, epsilon = 1e-15);
        let m = exact_measure(&dec, names(2)).unwrap();
        assert_abs_diff_eq!(m.atom(0b11), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn additive() {
        let d = DiscreteDomain::<f64>::rademacher(2).unwrap();
        let dec = hoeffding_decompose(&|w: &[f64]| w[0] + w[1], &d).unwrap();
        assert_abs_diff_eq!(dec.sigma2[0b01], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.sigma2[0b10], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dec.sigma2[0b11], 0.0, epsilon = 1e-15);
        let idx = indices_from_decomposition(&dec);
        assert_abs_diff_eq!(idx.lower[0b01], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(idx.upper[0b01], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(idx.upper[0b11], dec.total_variance, epsilon = 1e-15);
        let m = exact_measure(&dec, names(2)).unwrap();
        assert_abs_diff_eq!(m.atom(0b01), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.atom(0b10), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ignored_variable_and_constant() {
        let d = DiscreteDomain::<f64>::rademacher(2).unwrap();
        let dec = hoeffding_decompose(&|w: &[f64]| w[0], &d).unwrap();
        let m = exact_measure(&dec, names(2)).unwrap();
        assert_abs_diff_eq!(m.atom(0b01), 1.0, epsilon = 1e-15);
        assert_eq!(m.atom(0b10), 0.0);
        assert_eq!(m.atom(0b11), 0.0);
        let c = hoeffding_decompose(&|_: &[f64]| 3.0, &d).unwrap();
        assert_eq!(c.total_variance, 0.0);
        assert!(c.sigma2.iter().all(|&s| s == 0.0));
        assert!(matches!(
            exact_measure(&c, names(2)),
            Err(AnovaError::ZeroVariance)
        ));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            DiscreteDomain::new(vec![vec![(0.0, 0.5), (1.0, 0.4)]]),
            Err(AnovaError::Domain(_))
        ));
        assert!(matches!(
            DiscreteDomain::<f64>::new(vec![vec![]]),
            Err(AnovaError::Domain(_))
        ));
        let big = vec![vec![(0.0, 0.1); 10]; 8];
        assert!(matches!(
            DiscreteDomain::new(big),
            Err(AnovaError::TooLarge(_))
        ));
        let d = DiscreteDomain::<f64>::rademacher(2).unwrap();
        assert!(matches!(
            hoeffding_decompose(&|w: &[f64]| 1.0 / (w[0] + 1.0), &d),
            Err(AnovaError::NonFinite(_))
        ));
    }

    #[test]
    fn components_are_orthogonal() {
        let d = DiscreteDomain::new(vec![
            vec![(0.0, 0.2), (1.0, 0.5), (3.0, 0.3)],
            vec![(-1.0, 0.5), (2.0, 0.5)],
            vec![(0.5, 0.7), (1.5, 0.3)],
        ])
        .unwrap();
        let f = |w: &[f64]| w[0] * w[1] + (w[2] * w[0]).exp() - w[1] * w[2] * w[2];
        let comps = hoeffding_components(&f, &d).unwrap();
        assert!(comps.max_cross_moment(&d) < 1e-9);
    }

    #[test]
    fn contrast_cov_examples() {
        let d = DiscreteDomain::<f64>::rademacher(2).unwrap();
        let prod = |w: &[f64]| w[0] * w[1];
        assert_abs_diff_eq!(
            exact_contrast_cov(&prod, &d, 0b01, 0b10).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let add = |w: &[f64]| w[0] + w[1];
        assert_abs_diff_eq!(
            exact_contrast_cov(&add, &d, 0b01, 0b10).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        let pairs = ExactPairs::new(&prod, &d).unwrap();
        let cov = pairs.contrast_cov(0b01, 0).unwrap();
        assert_abs_diff_eq!(
            cov,
            -0.5 * pairs.contrast_variance(0b01).unwrap(),
            epsilon = 1e-14
        );
        assert!(matches!(
            exact_contrast_cov(&prod, &d, 0b01, 0b11),
            Err(AnovaError::Overlapping(..))
        ));
    }

    #[test]
    fn f32_decomposition() {
        let d = DiscreteDomain::<f32>::rademacher(3).unwrap();
        let dec = hoeffding_decompose(&|w: &[f32]| w[0] * w[1] + w[2], &d).unwrap();
        assert!((dec.sigma2[0b011] - 1.0).abs() < 1e-6);
        assert!((dec.sigma2[0b100] - 1.0).abs() < 1e-6);
        assert!((dec.total_variance - 2.0).abs() < 1e-6);
    }
}
