use std::fmt;

use super::AlgebraError;
use crate::subset::{self, Mask, MAX_VARS};

/// An element of the explanation algebra over `var_count` variables.
///
/// The algebra is isomorphic to the power set of `{0,1}^V`: a clause is a set
/// of atoms, and atom `S` is the binary vector with ones exactly on `S`.
/// `W_k` maps to the set of atoms containing `k`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    var_count: usize,
    bits: Vec<u64>,
}

/// Boolean connective for [`clause_combine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connective {
    And,
    Or,
    Not,
}

pub(crate) fn check_var_count(var_count: usize) -> Result<(), AlgebraError> {
    if var_count == 0 || var_count > MAX_VARS {
        return Err(AlgebraError::VarCount(var_count));
    }
    Ok(())
}

fn word_count(var_count: usize) -> usize {
    (1usize << var_count).div_ceil(64)
}

impl Clause {
    /// The bottom element (no atoms).
    pub fn bottom(var_count: usize) -> Result<Self, AlgebraError> {
        check_var_count(var_count)?;
        Ok(Self {
            var_count,
            bits: vec![0; word_count(var_count)],
        })
    }

    /// The top element (every atom).
    pub fn top(var_count: usize) -> Result<Self, AlgebraError> {
        Ok(Self::bottom(var_count)?.not())
    }

    /// The clause `W_index`: all atoms whose subset contains `index`.
    pub fn var(var_count: usize, index: usize) -> Result<Self, AlgebraError> {
        let mut c = Self::bottom(var_count)?;
        if index >= var_count {
            return Err(AlgebraError::IndexOutOfRange { index, var_count });
        }
        for s in 0..(1 as Mask) << var_count {
            if subset::contains(s, index) {
                c.insert(s);
            }
        }
        Ok(c)
    }

    /// Clause made of the given atoms.
    pub fn from_atoms<I: IntoIterator<Item = Mask>>(
        var_count: usize,
        atoms: I,
    ) -> Result<Self, AlgebraError> {
        let mut c = Self::bottom(var_count)?;
        let full = subset::full_mask(var_count);
        for s in atoms {
            if s & !full != 0 {
                return Err(AlgebraError::IndexOutOfRange {
                    index: (32 - (s.leading_zeros() as usize)).saturating_sub(1),
                    var_count,
                });
            }
            c.insert(s);
        }
        Ok(c)
    }

    /// `∨_{k∈S} W_k`.
    pub fn any_of(var_count: usize, set: Mask) -> Result<Self, AlgebraError> {
        let mut c = Self::bottom(var_count)?;
        for s in 0..(1 as Mask) << var_count {
            if s & set != 0 {
                c.insert(s);
            }
        }
        Ok(c)
    }

    /// `∧_{k∈S} W_k`; the empty conjunction is the top element.
    pub fn all_of(var_count: usize, set: Mask) -> Result<Self, AlgebraError> {
        let mut c = Self::bottom(var_count)?;
        for s in 0..(1 as Mask) << var_count {
            if s & set == set {
                c.insert(s);
            }
        }
        Ok(c)
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    fn insert(&mut self, atom: Mask) {
        let a = atom as usize;
        self.bits[a / 64] |= 1 << (a % 64);
    }

    pub fn contains_atom(&self, atom: Mask) -> bool {
        let a = atom as usize;
        a < 1 << self.var_count && self.bits[a / 64] >> (a % 64) & 1 == 1
    }

    /// Atoms in increasing bitmask order.
    pub fn atoms(&self) -> impl Iterator<Item = Mask> + '_ {
        (0..(1 as Mask) << self.var_count).filter(move |&s| self.contains_atom(s))
    }

    pub fn atom_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_bottom(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    fn check_same(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.var_count != other.var_count {
            return Err(AlgebraError::DimensionMismatch {
                left: self.var_count,
                right: other.var_count,
            });
        }
        Ok(())
    }

    pub fn and(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a & b))
    }

    pub fn or(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a | b))
    }

    pub fn not(&self) -> Self {
        let n = 1usize << self.var_count;
        let mut bits: Vec<u64> = self.bits.iter().map(|w| !w).collect();
        if !n.is_multiple_of(64) {
            let last = bits.len() - 1;
            bits[last] &= (1u64 << (n % 64)) - 1;
        }
        Self {
            var_count: self.var_count,
            bits,
        }
    }

    fn zip(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Self {
        Self {
            var_count: self.var_count,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    /// Renders the clause in the query syntax accepted by
    /// [`parse_clause`](super::parse_clause): a disjunction of atoms, each
    /// a full conjunction of literals.
    pub fn to_expr<S: AsRef<str>>(&self, names: &[S]) -> String {
        let literal = |s: Mask| -> String {
            (0..self.var_count)
                .map(|k| {
                    if subset::contains(s, k) {
                        names[k].as_ref().to_string()
                    } else {
                        format!("~{}", names[k].as_ref())
                    }
                })
                .collect::<Vec<_>>()
                .join(" & ")
        };
        if self.is_bottom() {
            let w = names[0].as_ref();
            return format!("{w} & ~{w}");
        }
        self.atoms()
            .map(|s| format!("({})", literal(s)))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Clause")
            .field("var_count", &self.var_count)
            .field("atoms", &self.atoms().collect::<Vec<_>>())
            .finish()
    }
}

/// Applies a connective. `Not` takes exactly one operand; `And`/`Or` take two.
pub fn clause_combine(
    op: Connective,
    a: &Clause,
    b: Option<&Clause>,
) -> Result<Clause, AlgebraError> {
    match (op, b) {
        (Connective::Not, None) => Ok(a.not()),
        (Connective::Not, Some(_)) => {
            Err(AlgebraError::Operand("`not` takes a single operand".into()))
        }
        (Connective::And, Some(b)) => a.and(b),
        (Connective::Or, Some(b)) => a.or(b),
        (_, None) => Err(AlgebraError::Operand(format!(
            "`{op:?}` needs two operands"
        ))),
    }
}
