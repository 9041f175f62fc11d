//! Subsets of variable indices encoded as bitmasks (bit `k` = variable `k`).

/// Hard cap on the number of variables an algebra can carry.
pub const MAX_VARS: usize = 16;

/// A subset of `{0, .., V-1}` as a bitmask.
pub type Mask = u32;

#[inline]
pub fn full_mask(var_count: usize) -> Mask {
    if var_count >= 32 {
        Mask::MAX
    } else {
        (1 << var_count) - 1
    }
}

#[inline]
pub fn size(mask: Mask) -> usize {
    mask.count_ones() as usize
}

#[inline]
pub fn contains(mask: Mask, k: usize) -> bool {
    mask >> k & 1 == 1
}

pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Mask {
    indices.into_iter().fold(0, |m, k| m | 1 << k)
}

pub fn indices(mask: Mask) -> impl Iterator<Item = usize> {
    (0..32).filter(move |&k| contains(mask, k))
}

/// All subsets of `mask`, including the empty set and `mask` itself,
/// in increasing numeric order.
pub fn subsets_of(mask: Mask) -> impl Iterator<Item = Mask> {
    let mut next = Some(0 as Mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask {
            None
        } else {
            Some((cur.wrapping_sub(mask)) & mask)
        };
        Some(cur)
    })
}

/// `(-1)^n` for small `n`.
#[inline]
pub fn sign(n: usize) -> i32 {
    if n.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Names of the members joined by `+` in index order; `(none)` for the empty set.
pub fn label<S: AsRef<str>>(mask: Mask, names: &[S]) -> String {
    if mask == 0 {
        return "(none)".to_string();
    }
    indices(mask)
        .map(|k| names[k].as_ref())
        .collect::<Vec<_>>()
        .join("+")
}

/// Inverse of [`label`].
pub fn parse_label<S: AsRef<str>>(text: &str, names: &[S]) -> Option<Mask> {
    if text == "(none)" {
        return Some(0);
    }
    let mut mask = 0;
    for part in text.split('+') {
        let k = names.iter().position(|n| n.as_ref() == part)?;
        mask |= 1 << k;
    }
    Some(mask)
}
