use super::ExplanationMeasure;
use crate::scalar::Scalar;
use crate::subset::{self, Mask};

/// Per-variable Shapley attributions.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues<T> {
    pub names: Vec<String>,
    pub values: Vec<T>,
}

impl<T: Scalar> ShapleyValues<T> {
    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Shapley values of the game `v(S) = Σ_{∅≠S'⊆S} atom[S']`: every atom's mass
/// is split equally among its variables.
///
/// With `include_outcome_atom = false` and an outcome marked on the measure,
/// the outcome is not a player and atoms that contain it are left out.
pub fn shapley_from_measure<T: Scalar>(
    m: &ExplanationMeasure<T>,
    include_outcome_atom: bool,
) -> ShapleyValues<T> {
    let excluded: Mask = match (include_outcome_atom, m.outcome()) {
        (false, Some(y)) => 1 << y,
        _ => 0,
    };
    let players: Vec<usize> = (0..m.var_count())
        .filter(|&k| !subset::contains(excluded, k))
        .collect();
    let mut values = vec![T::zero(); players.len()];
    for (s, &mass) in m.atoms().iter().enumerate() {
        let s = s as Mask;
        if s == 0 || s & excluded != 0 {
            continue;
        }
        let share = mass / T::lit(subset::size(s) as f64);
        for (i, &k) in players.iter().enumerate() {
            if subset::contains(s, k) {
                values[i] = values[i] + share;
            }
        }
    }
    ShapleyValues {
        names: players.iter().map(|&k| m.names()[k].clone()).collect(),
        values,
    }
}
