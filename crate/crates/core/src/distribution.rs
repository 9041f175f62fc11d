//! One-dimensional laws given by their quantile functions.

use statrs::distribution::{ContinuousCDF, Normal};

/// Left-continuous inverse of the empirical CDF of a sorted sample: the
/// `⌈p·n⌉`-th order statistic, with `p = 0` mapped to the minimum.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil();
    let idx = if rank.is_nan() || rank < 1.0 {
        0
    } else {
        (rank as usize).min(n) - 1
    };
    sorted[idx]
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

/// A marginal law sampled by inverse-CDF.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `-1` for `p ≤ ½`, `+1` otherwise.
    Rademacher,
    /// Finite law; values are kept sorted so the quantile is non-decreasing.
    Categorical {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    /// Sorted sample.
    Empirical {
        sorted: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid distribution: {0}")]
pub struct DistributionError(pub String);

impl Marginal {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self, DistributionError> {
        if !mean.is_finite() || !(sd >= 0.0) || !sd.is_finite() {
            return Err(DistributionError(format!("gaussian({mean}, {sd})")));
        }
        Ok(Self::Gaussian { mean, sd })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, DistributionError> {
        if !low.is_finite() || !high.is_finite() || low > high {
            return Err(DistributionError(format!("uniform({low}, {high})")));
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn categorical(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(DistributionError(
                "categorical needs matching non-empty values and probs".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(DistributionError(
                "categorical values must be finite, probs ≥ 0".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistributionError(format!(
                "categorical probs sum to {total}"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, probs) = pairs.into_iter().unzip();
        Ok(Self::Categorical { values, probs })
    }

    pub fn empirical(mut sample: Vec<f64>) -> Result<Self, DistributionError> {
        if sample.is_empty() || sample.iter().any(|v| !v.is_finite()) {
            return Err(DistributionError(
                "empirical sample must be non-empty and finite".into(),
            ));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self::Empirical { sorted: sample })
    }

    /// `Q(p)` for `p ∈ [0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    *mean
                } else {
                    mean + sd * normal_quantile(p)
                }
            }
            Self::Uniform { low, high } => low + (high - low) * p,
            Self::Rademacher => {
                if p <= 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            Self::Categorical { values, probs } => {
                let mut cum = 0.0;
                for (v, q) in values.iter().zip(probs) {
                    cum += q;
                    if p <= cum {
                        return *v;
                    }
                }
                *values.last().expect("non-empty")
            }
            Self::Empirical { sorted } => empirical_quantile(sorted, p),
        }
    }

    /// Finite support with probabilities, for laws that have one.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Self::Categorical { values, probs } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_cut() {
        assert_eq!(Marginal::Rademacher.quantile(0.7), 1.0);
        assert_eq!(Marginal::Rademacher.quantile(0.3), -1.0);
        assert_eq!(Marginal::Rademacher.quantile(0.5), -1.0);
    }

    #[test]
    fn empirical_left_continuous() {
        let m = Marginal::empirical(vec![3.0, 1.0, 3.0, 1.0]).unwrap();
        assert_eq!(m.quantile(0.25), 1.0);
        assert_eq!(m.quantile(0.26), 1.0);
        assert_eq!(m.quantile(0.51), 3.0);
        assert_eq!(m.quantile(0.75), 3.0);
        assert_eq!(m.quantile(0.0), 1.0);
        assert_eq!(m.quantile(1.0), 3.0);
        let c = Marginal::empirical(vec![5.0; 3]).unwrap();
        assert!([0.0, 0.2, 0.9, 1.0].iter().all(|&p| c.quantile(p) == 5.0));
    }

    #[test]
    fn categorical_sorted_and_monotone() {
        let m = Marginal::categorical(vec![2.0, 0.0, 1.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(m.quantile(0.5), 0.0);
        assert_eq!(m.quantile(0.51), 1.0);
        assert_eq!(m.quantile(0.8), 1.0);
        assert_eq!(m.quantile(0.81), 2.0);
        assert!(Marginal::categorical(vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn gaussian_quantile() {
        let g = Marginal::gaussian(1.0, 2.0).unwrap();
        assert!((g.quantile(0.5) - 1.0).abs() < 1e-12);
        assert!((g.quantile(0.975) - (1.0 + 2.0 * 1.959963984540054)).abs() < 1e-8);
        assert_eq!(Marginal::gaussian(4.0, 0.0).unwrap().quantile(0.3), 4.0);
        assert!(Marginal::gaussian(0.0, -1.0).is_err());
    }

    #[test]
    fn uniform_quantile() {
        let u = Marginal::uniform(-1.0, 1.0).unwrap();
        assert_eq!(u.quantile(0.25), -0.5);
    }
}
