use super::ExplanationMeasure;
use crate::scalar::Scalar;
use crate::subset::Mask;

/// Findings of [`measure_validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub tol: T,
    /// `|Σ atoms - 1|`.
    pub mass_deviation: T,
    /// Atoms with mass below `-tol`.
    pub negative_atoms: Vec<(Mask, T)>,
    /// Pairs `(S, S ∪ {k})` whose reconstructed totals drop by more than `tol`,
    /// with the size of the drop.
    pub monotonicity_violations: Vec<(Mask, Mask, T)>,
}

impl<T: Scalar> ValidationReport<T> {
    pub fn passed(&self) -> bool {
        self.mass_deviation <= self.tol
            && self.negative_atoms.is_empty()
            && self.monotonicity_violations.is_empty()
    }
}

/// Checks total mass, atom signs and monotonicity of totals at tolerance `tol`.
pub fn measure_validate<T: Scalar>(m: &ExplanationMeasure<T>, tol: T) -> ValidationReport<T> {
    let mass_deviation = (m.total_mass() - T::one()).abs();
    let negative_atoms = m
        .atoms()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a < -tol)
        .map(|(s, &a)| (s as Mask, a))
        .collect();
    let totals = m.totals();
    let mut monotonicity_violations = Vec::new();
    for s in 0..totals.len() {
        for k in 0..m.var_count() {
            let t = s | 1 << k;
            if t != s && totals[s] > totals[t] + tol {
                monotonicity_violations.push((s as Mask, t as Mask, totals[s] - totals[t]));
            }
        }
    }
    ValidationReport {
        tol,
        mass_deviation,
        negative_atoms,
        monotonicity_violations,
    }
}
