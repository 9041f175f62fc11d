use super::clause::check_var_count;
use super::{AlgebraError, Clause};
use crate::scalar::Scalar;
use crate::subset::{self, Mask};

/// Where a measure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// Total explainabilities `ξ(∨_{k∈S} W_k)` for every subset, indexed by bitmask.
/// Entry 0 is the empty disjunction and is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalsTable<T> {
    var_count: usize,
    total: Vec<T>,
    stderr: Option<Vec<T>>,
}

impl<T: Scalar> TotalsTable<T> {
    /// Builds a table from a dense vector of length `2^V`; `total[0]` is ignored.
    pub fn new(var_count: usize, mut total: Vec<T>) -> Result<Self, AlgebraError> {
        check_var_count(var_count)?;
        let expected = 1usize << var_count;
        if total.len() != expected {
            return Err(AlgebraError::IncompleteTotals {
                expected: expected - 1,
                got: total.len().saturating_sub(1),
            });
        }
        total[0] = T::zero();
        Ok(Self {
            var_count,
            total,
            stderr: None,
        })
    }

    /// Builds a table from `(subset, value)` entries, which must cover every
    /// nonempty subset.
    pub fn from_entries<I: IntoIterator<Item = (Mask, T)>>(
        var_count: usize,
        entries: I,
    ) -> Result<Self, AlgebraError> {
        check_var_count(var_count)?;
        let n = 1usize << var_count;
        let mut total = vec![None; n];
        for (s, v) in entries {
            let s = s as usize;
            if s >= n {
                return Err(AlgebraError::IndexOutOfRange {
                    index: s,
                    var_count,
                });
            }
            total[s] = Some(v);
        }
        let got = total.iter().skip(1).filter(|v| v.is_some()).count();
        if got != n - 1 {
            return Err(AlgebraError::IncompleteTotals {
                expected: n - 1,
                got,
            });
        }
        Self::new(
            var_count,
            total
                .into_iter()
                .map(|v| v.unwrap_or_else(T::zero))
                .collect(),
        )
    }

    pub fn with_stderr(mut self, mut stderr: Vec<T>) -> Result<Self, AlgebraError> {
        if stderr.len() != self.total.len() {
            return Err(AlgebraError::IncompleteTotals {
                expected: self.total.len() - 1,
                got: stderr.len().saturating_sub(1),
            });
        }
        stderr[0] = T::zero();
        self.stderr = Some(stderr);
        Ok(self)
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn get(&self, s: Mask) -> T {
        self.total[s as usize]
    }

    pub fn values(&self) -> &[T] {
        &self.total
    }

    pub fn stderr(&self) -> Option<&[T]> {
        self.stderr.as_deref()
    }
}

/// The explainability measure: a mass for every atom of the algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationMeasure<T> {
    names: Vec<String>,
    atom_mass: Vec<T>,
    atom_stderr: Option<Vec<T>>,
    provenance: Provenance,
    clipped: bool,
    outcome: Option<usize>,
}

fn check_names(names: &[String]) -> Result<(), AlgebraError> {
    check_var_count(names.len())?;
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(AlgebraError::DuplicateName(n.clone()));
        }
    }
    Ok(())
}

impl<T: Scalar> ExplanationMeasure<T> {
    pub fn new(
        names: Vec<String>,
        atom_mass: Vec<T>,
        provenance: Provenance,
    ) -> Result<Self, AlgebraError> {
        check_names(&names)?;
        if atom_mass.len() != 1 << names.len() {
            return Err(AlgebraError::AtomCount {
                expected: 1 << names.len(),
                got: atom_mass.len(),
            });
        }
        Ok(Self {
            names,
            atom_mass,
            atom_stderr: None,
            provenance,
            clipped: false,
            outcome: None,
        })
    }

    pub fn with_atom_stderr(mut self, stderr: Vec<T>) -> Result<Self, AlgebraError> {
        if stderr.len() != self.atom_mass.len() {
            return Err(AlgebraError::AtomCount {
                expected: self.atom_mass.len(),
                got: stderr.len(),
            });
        }
        self.atom_stderr = Some(stderr);
        Ok(self)
    }

    /// Marks variable `index` as the outcome node of a causal model.
    pub fn with_outcome(mut self, index: Option<usize>) -> Result<Self, AlgebraError> {
        if let Some(i) = index {
            if i >= self.names.len() {
                return Err(AlgebraError::IndexOutOfRange {
                    index: i,
                    var_count: self.names.len(),
                });
            }
        }
        self.outcome = index;
        Ok(self)
    }

    /// Sets the flag reported by [`ExplanationMeasure::is_clipped`].
    pub fn with_clipped_flag(mut self, clipped: bool) -> Self {
        self.clipped = clipped;
        self
    }

    pub fn var_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn atom(&self, s: Mask) -> T {
        self.atom_mass[s as usize]
    }

    pub fn atoms(&self) -> &[T] {
        &self.atom_mass
    }

    /// Propagated atom standard errors. These ignore the covariance induced
    /// by common random numbers: treat them as an approximate upper-scale
    /// diagnostic.
    pub fn atom_stderr(&self) -> Option<&[T]> {
        self.atom_stderr.as_deref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    pub fn outcome(&self) -> Option<usize> {
        self.outcome
    }

    pub fn total_mass(&self) -> T {
        self.atom_mass.iter().copied().sum()
    }

    /// `ξ(c)`: the sum of the masses of the atoms in `c`.
    pub fn query(&self, c: &Clause) -> Result<T, AlgebraError> {
        if c.var_count() != self.var_count() {
            return Err(AlgebraError::DimensionMismatch {
                left: self.var_count(),
                right: c.var_count(),
            });
        }
        Ok(c.atoms().map(|s| self.atom(s)).sum())
    }

    /// `ξ(∧_{k∈S} W_k)`, the sum over atoms containing `s`. `s = ∅` gives the
    /// total mass.
    pub fn interaction(&self, s: Mask) -> T {
        (0..self.atom_mass.len() as Mask)
            .filter(|&a| a & s == s)
            .map(|a| self.atom(a))
            .sum()
    }

    /// `ξ(∨_{k∈S} W_k)` for every `S`, by bitmask.
    pub fn totals(&self) -> Vec<T> {
        let n = self.atom_mass.len();
        let mut lower = self.atom_mass.clone();
        subset_zeta(&mut lower);
        let all = self.total_mass();
        let full = n - 1;
        (0..n).map(|s| all - lower[full & !s]).collect()
    }

    /// `ξ(∧_{k∈S} W_k)` for every `S`, by bitmask.
    pub fn interactions(&self) -> Vec<T> {
        let mut sup = self.atom_mass.clone();
        superset_zeta(&mut sup);
        sup
    }

    /// Atoms clipped at zero and rescaled to unit mass. The result is flagged
    /// so reports can tell it apart from the raw estimate.
    pub fn clipped(&self) -> Self {
        let clipped: Vec<T> = self.atom_mass.iter().map(|&a| a.max(T::zero())).collect();
        let sum: T = clipped.iter().copied().sum();
        let atom_mass = if sum > T::zero() {
            clipped.iter().map(|&a| a / sum).collect()
        } else {
            clipped
        };
        Self {
            atom_mass,
            clipped: true,
            ..self.clone()
        }
    }
}

/// `a[S] <- Σ_{S'⊆S} a[S']`.
pub(crate) fn subset_zeta<T: Scalar>(a: &mut [T]) {
    let n = a.len();
    let mut bit = 1;
    while bit < n {
        for s in 0..n {
            if s & bit != 0 {
                a[s] = a[s] + a[s ^ bit];
            }
        }
        bit <<= 1;
    }
}

/// `a[S] <- Σ_{S'⊇S} a[S']`.
pub(crate) fn superset_zeta<T: Scalar>(a: &mut [T]) {
    let n = a.len();
    let mut bit = 1;
    while bit < n {
        for s in 0..n {
            if s & bit == 0 {
                a[s] = a[s] + a[s | bit];
            }
        }
        bit <<= 1;
    }
}

/// `a[S] <- Σ_{S'⊇S} (-1)^{|S'|-|S|} a[S']`, the inverse of [`superset_zeta`].
pub(crate) fn superset_mobius<T: Scalar>(a: &mut [T]) {
    let n = a.len();
    let mut bit = 1;
    while bit < n {
        for s in 0..n {
            if s & bit == 0 {
                a[s] = a[s] - a[s | bit];
            }
        }
        bit <<= 1;
    }
}

/// Interaction explainabilities `ξ(∧_{k∈S} W_k)` from totals by
/// inclusion-exclusion: `Σ_{∅≠S'⊆S} (-1)^{|S'|+1} total[S']`, with the
/// empty conjunction set to 1.
pub fn interactions_from_totals<T: Scalar>(totals: &TotalsTable<T>) -> Vec<T> {
    let mut inter: Vec<T> = totals
        .values()
        .iter()
        .enumerate()
        .map(|(s, &t)| {
            if s == 0 {
                T::zero()
            } else if subset::size(s as Mask) % 2 == 1 {
                t
            } else {
                -t
            }
        })
        .collect();
    subset_zeta(&mut inter);
    inter[0] = T::one();
    inter
}

/// Atoms from interaction explainabilities: each atom is its interaction
/// minus the mass of all strictly larger atoms.
pub fn atoms_from_interactions<T: Scalar>(interactions: &[T]) -> Vec<T> {
    let mut atoms = interactions.to_vec();
    superset_mobius(&mut atoms);
    atoms
}

/// Builds the full measure from total explainabilities by inclusion-exclusion.
///
/// When the table carries standard errors the atoms get a conservative
/// `sqrt(Σ se²)` over the totals that enter them (those `T ⊇ S^c`), which
/// ignores correlation between totals.
pub fn measure_from_totals<T: Scalar>(
    totals: &TotalsTable<T>,
    names: Vec<String>,
    provenance: Provenance,
) -> Result<ExplanationMeasure<T>, AlgebraError> {
    if names.len() != totals.var_count() {
        return Err(AlgebraError::DimensionMismatch {
            left: names.len(),
            right: totals.var_count(),
        });
    }
    let atoms = atoms_from_interactions(&interactions_from_totals(totals));
    let mut m = ExplanationMeasure::new(names, atoms, provenance)?;
    if let Some(se) = totals.stderr() {
        let mut var: Vec<T> = se.iter().map(|&e| e * e).collect();
        superset_zeta(&mut var);
        let full = var.len() - 1;
        let atom_se = (0..var.len()).map(|s| var[full & !s].sqrt()).collect();
        m = m.with_atom_stderr(atom_se)?;
    }
    Ok(m)
}

/// Free-function form of [`ExplanationMeasure::query`].
pub fn measure_query<T: Scalar>(m: &ExplanationMeasure<T>, c: &Clause) -> Result<T, AlgebraError> {
    m.query(c)
}

/// Free-function form of [`ExplanationMeasure::interaction`].
pub fn measure_interaction<T: Scalar>(
    m: &ExplanationMeasure<T>,
    s: Mask,
) -> Result<T, AlgebraError> {
    if s & !subset::full_mask(m.var_count()) != 0 {
        return Err(AlgebraError::IndexOutOfRange {
            index: 31 - s.leading_zeros() as usize,
            var_count: m.var_count(),
        });
    }
    Ok(m.interaction(s))
}

/// Pushforward onto groups of variables: each group becomes one variable
/// that is "on" when any of its members is. Groups must be disjoint and
/// nonempty; variables outside every group are marginalized out. Standard
/// errors, clipping and the outcome flag are dropped.
pub fn measure_coarsen<T: Scalar>(
    m: &ExplanationMeasure<T>,
    groups: &[(String, Mask)],
) -> Result<ExplanationMeasure<T>, AlgebraError> {
    let full = (m.atom_mass.len() - 1) as Mask;
    let mut seen: Mask = 0;
    for (name, g) in groups {
        if *g == 0 || g & !full != 0 || g & seen != 0 {
            return Err(AlgebraError::Operand(format!(
                "group `{name}` is empty, out of range or overlaps another"
            )));
        }
        seen |= g;
    }
    let mut atoms = vec![T::zero(); 1 << groups.len()];
    for (s, &mass) in m.atom_mass.iter().enumerate() {
        let image = groups
            .iter()
            .enumerate()
            .filter(|(_, (_, g))| s as Mask & g != 0)
            .fold(0usize, |acc, (j, _)| acc | (1 << j));
        atoms[image] = atoms[image] + mass;
    }
    let names = groups.iter().map(|(n, _)| n.clone()).collect();
    ExplanationMeasure::new(names, atoms, m.provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn names(v: usize) -> Vec<String> {
        (1..=v).map(|k| format!("W{k}")).collect()
    }

    /// Direct double sums over subsets, independent of the fast transforms.
    fn brute_atoms(total: &[f64], v: usize) -> Vec<f64> {
        let n = 1usize << v;
        let inter: Vec<f64> = (0..n)
            .map(|s| {
                if s == 0 {
                    return 1.0;
                }
                subset::subsets_of(s as Mask)
                    .filter(|&t| t != 0)
                    .map(|t| -(subset::sign(subset::size(t)) as f64) * total[t as usize])
                    .sum()
            })
            .collect();
        let mut atoms = vec![0.0; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&s| std::cmp::Reverse((s as u32).count_ones()));
        for s in order {
            let above: f64 = (0..n)
                .filter(|&t| t != s && t & s == s)
                .map(|t| atoms[t])
                .sum();
            atoms[s] = inter[s] - above;
        }
        atoms
    }

    #[test]
    fn pure_interaction() {
        let t = TotalsTable::from_entries(2, [(0b01, 1.0), (0b10, 1.0), (0b11, 1.0)]).unwrap();
        let m = measure_from_totals(&t, names(2), Provenance::Exact).unwrap();
        assert_abs_diff_eq!(m.atom(0b11), 1.0, epsilon = 1e-15);
        for s in [0b00, 0b01, 0b10] {
            assert_abs_diff_eq!(m.atom(s), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn additive_three() {
        let total: Vec<f64> = (0..8u32).map(|s| s.count_ones() as f64 / 3.0).collect();
        let t = TotalsTable::new(3, total).unwrap();
        let m = measure_from_totals(&t, names(3), Provenance::Exact).unwrap();
        for s in 0..8u32 {
            let expect = if s.count_ones() == 1 { 1.0 / 3.0 } else { 0.0 };
            assert_abs_diff_eq!(m.atom(s), expect, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m.interaction(0b011), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_variable() {
        let t = TotalsTable::from_entries(1, [(1, 1.0)]).unwrap();
        let m = measure_from_totals(&t, names(1), Provenance::Exact).unwrap();
        assert_eq!(m.atoms(), &[0.0, 1.0]);
    }

    #[test]
    fn incomplete_and_oversized() {
        assert!(matches!(
            TotalsTable::from_entries(2, [(0b01, 1.0), (0b11, 1.0)]),
            Err(AlgebraError::IncompleteTotals {
                expected: 3,
                got: 2
            })
        ));
        assert!(matches!(
            TotalsTable::<f64>::new(17, vec![]),
            Err(AlgebraError::VarCount(17))
        ));
    }

    #[test]
    fn queries() {
        let m =
            ExplanationMeasure::new(names(2), vec![0.0, 0.5, 0.5, 0.0], Provenance::Exact).unwrap();
        let w1 = Clause::var(2, 0).unwrap();
        let w2 = Clause::var(2, 1).unwrap();
        let either = w1.or(&w2).unwrap();
        assert_eq!(m.query(&either).unwrap(), 1.0);
        assert_eq!(m.query(&either.not()).unwrap(), 0.0);
        let product =
            ExplanationMeasure::new(names(2), vec![0.0, 0.0, 0.0, 1.0], Provenance::Exact).unwrap();
        assert_eq!(product.query(&w1).unwrap(), 1.0);
        assert_eq!(measure_interaction(&product, 0b11).unwrap(), 1.0);
        assert_eq!(measure_interaction(&product, 0).unwrap(), 1.0);
        assert!(m.query(&Clause::var(3, 0).unwrap()).is_err());
        assert!(measure_interaction(&m, 0b100).is_err());
    }

    #[test]
    fn stderr_propagation_matches_contributing_totals() {
        let total = vec![0.0, 0.6, 0.5, 1.0];
        let se = vec![0.0, 0.01, 0.02, 0.03];
        let t = TotalsTable::new(2, total).unwrap().with_stderr(se).unwrap();
        let m = measure_from_totals(
            &t,
            names(2),
            Provenance::MonteCarlo {
                samples: 10,
                seed: 1,
            },
        )
        .unwrap();
        let ase = m.atom_stderr().unwrap();
        // atom{W1} = total[12] - total[W2]
        assert_abs_diff_eq!(
            ase[0b01],
            (0.02f64.powi(2) + 0.03f64.powi(2)).sqrt(),
            epsilon = 1e-15
        );
        // atom{W1,W2} = total[W1] + total[W2] - total[12]
        assert_abs_diff_eq!(
            ase[0b11],
            (0.01f64.powi(2) + 0.02f64.powi(2) + 0.03f64.powi(2)).sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(ase[0], 0.03, epsilon = 1e-15);
    }

    #[test]
    fn clipping_renormalises() {
        let m = ExplanationMeasure::new(names(2), vec![0.1, 0.6, 0.4, -0.1], Provenance::Exact)
            .unwrap();
        let c = m.clipped();
        assert!(c.is_clipped());
        assert_abs_diff_eq!(c.total_mass(), 1.0, epsilon = 1e-15);
        assert_eq!(c.atom(0b11), 0.0);
        assert_abs_diff_eq!(c.atom(0b01), 0.6 / 1.1, epsilon = 1e-15);
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = ExplanationMeasure::new(
            vec!["A".into(), "A".into()],
            vec![0.0; 4],
            Provenance::Exact,
        );
        assert!(matches!(err, Err(AlgebraError::DuplicateName(_))));
    }

    #[test]
    fn works_in_f32() {
        let t = TotalsTable::new(2, vec![0.0f32, 1.0, 1.0, 1.0]).unwrap();
        let m = measure_from_totals(&t, names(2), Provenance::Exact).unwrap();
        assert_eq!(m.atom(0b11), 1.0f32);
    }

    fn arb_measure() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=5)
            .prop_flat_map(|v| (Just(v), proptest::collection::vec(0.0f64..1.0, 1 << v)))
            .prop_map(|(v, raw)| {
                let s: f64 = raw.iter().sum::<f64>().max(1e-9);
                (v, raw.iter().map(|x| x / s).collect())
            })
    }

    proptest! {
        #[test]
        fn fast_transform_matches_brute((v, atoms) in arb_measure()) {
            let m = ExplanationMeasure::new(names(v), atoms, Provenance::Exact).unwrap();
            let totals = m.totals();
            let brute = brute_atoms(&totals, v);
            let t = TotalsTable::new(v, totals).unwrap();
            let rebuilt = measure_from_totals(&t, names(v), Provenance::Exact).unwrap();
            for (a, b) in rebuilt.atoms().iter().zip(&brute) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn round_trip_totals((v, atoms) in arb_measure()) {
            let m = ExplanationMeasure::new(names(v), atoms, Provenance::Exact).unwrap();
            let t = TotalsTable::new(v, m.totals()).unwrap();
            let rebuilt = measure_from_totals(&t, names(v), Provenance::Exact).unwrap();
            for s in 1..(1u32 << v) {
                let c = Clause::any_of(v, s).unwrap();
                prop_assert!((rebuilt.query(&c).unwrap() - t.get(s)).abs() < 1e-12);
            }
        }

        #[test]
        fn additivity_and_complement((v, atoms) in arb_measure(), a in any::<u64>(), b in any::<u64>()) {
            let m = ExplanationMeasure::new(names(v), atoms, Provenance::Exact).unwrap();
            let n = 1u32 << v;
            let c1 = Clause::from_atoms(v, (0..n).filter(|s| a >> (s % 64) & 1 == 1)).unwrap();
            let c2 = Clause::from_atoms(v, (0..n).filter(|s| b >> (s % 64) & 1 == 1)).unwrap();
            let c2 = c2.and(&c1.not()).unwrap();
            let joined = m.query(&c1.or(&c2).unwrap()).unwrap();
            prop_assert!((joined - (m.query(&c1).unwrap() + m.query(&c2).unwrap())).abs() < 1e-12);
            let comp = m.query(&c1.not()).unwrap();
            prop_assert!((comp - (m.total_mass() - m.query(&c1).unwrap())).abs() < 1e-12);
        }

        #[test]
        fn monotone_totals_antimonotone_interactions((v, atoms) in arb_measure()) {
            let m = ExplanationMeasure::new(names(v), atoms, Provenance::Exact).unwrap();
            let totals = m.totals();
            let inter = m.interactions();
            for s in 0..1usize << v {
                for k in 0..v {
                    let t = s | 1 << k;
                    prop_assert!(totals[s] <= totals[t] + 1e-12);
                    prop_assert!(inter[t] <= inter[s] + 1e-12);
                }
            }
            let singles: f64 = (0..v).map(|k| totals[1 << k]).sum();
            prop_assert!(singles + 1e-12 >= totals[(1 << v) - 1]);
        }
    }

    #[test]
    fn coarsen_groups_atoms() {
        let names: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let atoms: Vec<f64> = vec![0.0, 0.1, 0.2, 0.05, 0.3, 0.15, 0.1, 0.1];
        let m = ExplanationMeasure::new(names, atoms, Provenance::Exact).unwrap();
        let g = measure_coarsen(&m, &[("AB".into(), 0b011), ("C".into(), 0b100)]).unwrap();
        assert_eq!(g.atoms().len(), 4);
        assert!((g.atom(0b01) - 0.35).abs() < 1e-12);
        assert!((g.atom(0b10) - 0.3).abs() < 1e-12);
        assert!((g.atom(0b11) - 0.35).abs() < 1e-12);
        let c = crate::algebra::Clause::any_of(3, 0b011).unwrap();
        assert!((g.totals()[0b01] - m.query(&c).unwrap()).abs() < 1e-12);
        assert!(measure_coarsen(&m, &[("x".into(), 0b011), ("y".into(), 0b010)]).is_err());
    }
}
