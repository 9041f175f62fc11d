//! Pick-freeze estimation of Sobol indices and of the full explainability
//! measure for functions of independent inputs.
//!
//! The variance in every denominator is `Σ (f(W_i) - f(W'_i))² / 2M`, built
//! from the same pair of baseline outputs that every numerator uses, so the
//! estimate for the full variable set is exactly one.

use crate::algebra::{measure_from_totals, ExplanationMeasure, Provenance, TotalsTable};
use crate::distribution::Marginal;
use crate::pickfreeze::PickFreeze;
pub use crate::pickfreeze::{Estimate, EstimateError, EstimatorConfig};
use crate::subset::{self, Mask, MAX_VARS};

/// Independent inputs sampled by inverse CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSampler {
    marginals: Vec<Marginal>,
}

impl IndependentSampler {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self, EstimateError> {
        if marginals.is_empty() || marginals.len() > MAX_VARS {
            return Err(EstimateError::TooManyVars {
                count: marginals.len(),
                cap: MAX_VARS,
            });
        }
        Ok(Self { marginals })
    }

    pub fn standard_normal(k: usize) -> Result<Self, EstimateError> {
        Self::new(vec![Marginal::Gaussian { mean: 0.0, sd: 1.0 }; k])
    }

    pub fn rademacher(k: usize) -> Result<Self, EstimateError> {
        Self::new(vec![Marginal::Rademacher; k])
    }

    pub fn var_count(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// Maps a uniform vector to an input point.
    pub fn transform(&self, u: &[f64], out: &mut [f64]) {
        for ((o, m), &p) in out.iter_mut().zip(&self.marginals).zip(u) {
            *o = m.quantile(p);
        }
    }
}

fn check_subset(s: Mask, k: usize) -> Result<(), EstimateError> {
    if s == 0 {
        return Err(EstimateError::Subset("subset must be nonempty".into()));
    }
    if s & !subset::full_mask(k) != 0 {
        return Err(EstimateError::Subset(format!(
            "{s:#b} exceeds {k} variables"
        )));
    }
    Ok(())
}

fn with_evaluator<F, R>(
    f: &F,
    sampler: &IndependentSampler,
    cfg: &EstimatorConfig,
    body: impl FnOnce(&PickFreeze<'_>) -> R,
) -> R
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let k = sampler.var_count();
    let eval = move |u: &[f64]| -> Result<f64, EstimateError> {
        let mut w = [0.0; MAX_VARS];
        sampler.transform(u, &mut w[..k]);
        Ok(f(&w[..k]))
    };
    let pf = PickFreeze {
        dim: k,
        eval: &eval,
        cfg,
    };
    body(&pf)
}

/// Normalized Sobol upper index of `S`: `E[Var(Y | W_{-S})] / Var(Y)`.
pub fn estimate_upper<F>(
    f: &F,
    sampler: &IndependentSampler,
    s: Mask,
    cfg: &EstimatorConfig,
) -> Result<Estimate, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_subset(s, sampler.var_count())?;
    with_evaluator(f, sampler, cfg, |pf| {
        pf.upper_totals(&[s]).map(|mut v| v.remove(0))
    })
}

/// Normalized Sobol lower index of `S`: `Cov(f(W), f(W_S, W'_{-S})) / Var(Y)`.
pub fn estimate_lower<F>(
    f: &F,
    sampler: &IndependentSampler,
    s: Mask,
    cfg: &EstimatorConfig,
) -> Result<Estimate, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_subset(s, sampler.var_count())?;
    with_evaluator(f, sampler, cfg, |pf| pf.lower(s))
}

/// Normalized superset importance of `S`: `Var(I_S(W, W')) / (2^{|S|} Var(Y))`.
pub fn estimate_superset<F>(
    f: &F,
    sampler: &IndependentSampler,
    s: Mask,
    cfg: &EstimatorConfig,
) -> Result<Estimate, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_subset(s, sampler.var_count())?;
    with_evaluator(f, sampler, cfg, |pf| pf.superset(s))
}

/// Interaction contrast `I_S(w, w2) = Σ_{S'⊆S} (-1)^{|S|-|S'|} f(w2_{S'}, w_{-S'})`.
pub fn interaction_contrast<F>(f: &F, w: &[f64], w2: &[f64], s: Mask) -> Result<f64, EstimateError>
where
    F: Fn(&[f64]) -> f64,
{
    if w.len() != w2.len() {
        return Err(EstimateError::Subset(format!(
            "points have {} and {} coordinates",
            w.len(),
            w2.len()
        )));
    }
    if s & !subset::full_mask(w.len()) != 0 {
        return Err(EstimateError::Subset(format!(
            "{s:#b} exceeds {} variables",
            w.len()
        )));
    }
    let k = subset::size(s);
    let mut h = w.to_vec();
    Ok(subset::subsets_of(s)
        .map(|t| {
            for (j, hj) in h.iter_mut().enumerate() {
                *hj = if subset::contains(t, j) { w2[j] } else { w[j] };
            }
            subset::sign(k - subset::size(t)) as f64 * f(&h)
        })
        .sum())
}

/// Upper indices of every nonempty subset from one set of common pairs.
pub fn estimate_totals<F>(
    f: &F,
    sampler: &IndependentSampler,
    cfg: &EstimatorConfig,
) -> Result<TotalsTable<f64>, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let k = sampler.var_count();
    if k > cfg.max_vars {
        return Err(EstimateError::TooManyVars {
            count: k,
            cap: cfg.max_vars,
        });
    }
    let masks: Vec<Mask> = (1..=subset::full_mask(k)).collect();
    let est = with_evaluator(f, sampler, cfg, |pf| pf.upper_totals(&masks))?;
    totals_table(k, &est)
}

pub(crate) fn totals_table(k: usize, est: &[Estimate]) -> Result<TotalsTable<f64>, EstimateError> {
    let values = std::iter::once(0.0)
        .chain(est.iter().map(|e| e.value))
        .collect();
    let stderr = std::iter::once(0.0)
        .chain(est.iter().map(|e| e.stderr))
        .collect();
    TotalsTable::new(k, values)
        .and_then(|t| t.with_stderr(stderr))
        .map_err(|e| EstimateError::Config(e.to_string()))
}

/// Monte Carlo estimate of the explainability measure.
pub fn estimate_measure<F>(
    f: &F,
    sampler: &IndependentSampler,
    cfg: &EstimatorConfig,
    names: Vec<String>,
) -> Result<ExplanationMeasure<f64>, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if names.len() != sampler.var_count() {
        return Err(EstimateError::Config(format!(
            "{} names for {} variables",
            names.len(),
            sampler.var_count()
        )));
    }
    let totals = estimate_totals(f, sampler, cfg)?;
    measure_from_totals(
        &totals,
        names,
        Provenance::MonteCarlo {
            samples: cfg.samples as u64,
            seed: cfg.seed,
        },
    )
    .map_err(|e| EstimateError::Config(e.to_string()))
}

/// A named test function over three iid standard normal inputs.
#[derive(Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub formula: &'static str,
    pub eval: fn(&[f64]) -> f64,
}

fn sigmoid_unit(z: f64) -> f64 {
    1.0 / (1.0 + z.exp())
}

/// The three-input functions: linear, pairwise quadratic, a two-unit sigmoid
/// network and the multilinear monomial.
pub const REGISTRY: [TestFunction; 4] = [
    TestFunction {
        name: "linear3",
        formula: "W1 + W2 + W3",
        eval: |w| w[0] + w[1] + w[2],
    },
    TestFunction {
        name: "quadratic3",
        formula: "W1*W2 + W1*W3 + W2*W3",
        eval: |w| w[0] * w[1] + w[0] * w[2] + w[1] * w[2],
    },
    TestFunction {
        name: "sigmoid_nn3",
        formula: "1/(1+exp(10*W1+10*W2)) + 1/(1+exp(10*W2+10*W3))",
        eval: |w| sigmoid_unit(10.0 * w[0] + 10.0 * w[1]) + sigmoid_unit(10.0 * w[1] + 10.0 * w[2]),
    },
    TestFunction {
        name: "multilinear3",
        formula: "W1*W2*W3",
        eval: |w| w[0] * w[1] * w[2],
    },
];

pub fn builtin(name: &str) -> Option<&'static TestFunction> {
    REGISTRY.iter().find(|t| t.name == name)
}

pub fn builtin_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|t| t.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prod(w: &[f64]) -> f64 {
        w[0] * w[1]
    }

    fn sum(w: &[f64]) -> f64 {
        w[0] + w[1]
    }

    #[test]
    fn contrast_examples() {
        assert_eq!(
            interaction_contrast(&prod, &[1.0, 1.0], &[-1.0, -1.0], 0b11).unwrap(),
            4.0
        );
        assert_eq!(
            interaction_contrast(&prod, &[1.0, 1.0], &[-1.0, -1.0], 0).unwrap(),
            1.0
        );
        assert_eq!(
            interaction_contrast(&sum, &[0.3, 2.0], &[-1.5, 7.0], 0b11).unwrap(),
            0.0
        );
        assert!(interaction_contrast(&sum, &[0.3], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn upper_examples() {
        let cfg = EstimatorConfig::new(200_000, 11);
        let rad = IndependentSampler::rademacher(2).unwrap();
        let e = estimate_upper(&prod, &rad, 0b01, &cfg).unwrap();
        assert!((e.value - 1.0).abs() < 0.02, "{e:?}");
        let normal = IndependentSampler::standard_normal(2).unwrap();
        let e = estimate_upper(&sum, &normal, 0b01, &cfg).unwrap();
        assert!((e.value - 0.5).abs() < 0.02, "{e:?}");
        let e =
            estimate_upper(&|w: &[f64]| (w[0] * w[1]).sin() + w[0], &normal, 0b11, &cfg).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn lower_examples() {
        let cfg = EstimatorConfig::new(200_000, 12);
        let rad = IndependentSampler::rademacher(2).unwrap();
        let e = estimate_lower(&prod, &rad, 0b01, &cfg).unwrap();
        assert!(e.value.abs() < 0.02, "{e:?}");
        let normal = IndependentSampler::standard_normal(2).unwrap();
        let e = estimate_lower(&sum, &normal, 0b01, &cfg).unwrap();
        assert!((e.value - 0.5).abs() < 0.02, "{e:?}");
        let e = estimate_lower(&|w: &[f64]| w[0], &normal, 0b10, &cfg).unwrap();
        assert!(e.value.abs() < 4.0 * e.stderr.max(1e-3), "{e:?}");
    }

    #[test]
    fn superset_examples() {
        let cfg = EstimatorConfig::new(200_000, 13);
        let rad = IndependentSampler::rademacher(2).unwrap();
        let e = estimate_superset(&prod, &rad, 0b11, &cfg).unwrap();
        assert!((e.value - 1.0).abs() < 0.02, "{e:?}");
        let e = estimate_superset(&prod, &rad, 0b01, &cfg).unwrap();
        assert!((e.value - 1.0).abs() < 0.02, "{e:?}");
        let normal = IndependentSampler::standard_normal(2).unwrap();
        let e = estimate_superset(&sum, &normal, 0b11, &cfg).unwrap();
        assert!(e.value.abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn measure_examples() {
        let cfg = EstimatorConfig::new(200_000, 14);
        let normal = IndependentSampler::standard_normal(3).unwrap();
        let names: Vec<String> = ["W1", "W2", "W3"].iter().map(|s| s.to_string()).collect();
        let m = estimate_measure(
            &|w: &[f64]| w[0] + w[1] + w[2],
            &normal,
            &cfg,
            names.clone(),
        )
        .unwrap();
        for s in 1..8usize {
            let expect = if s.count_ones() == 1 { 1.0 / 3.0 } else { 0.0 };
            assert!(
                (m.atoms()[s] - expect).abs() < 0.02,
                "atom {s}: {}",
                m.atoms()[s]
            );
        }
        assert_eq!(m.atom(0), 0.0);
        let m = estimate_measure(
            &|w: &[f64]| w[0] * w[1] * w[2],
            &normal,
            &cfg,
            names.clone(),
        )
        .unwrap();
        assert!((m.atom(0b111) - 1.0).abs() < 0.03);
        assert_eq!(
            estimate_measure(&|_: &[f64]| 1.0, &normal, &cfg, names),
            Err(EstimateError::ZeroVariance)
        );
    }

    #[test]
    fn constant_input_is_allowed() {
        let cfg = EstimatorConfig::new(20_000, 15);
        let s = IndependentSampler::new(vec![
            Marginal::Gaussian { mean: 0.0, sd: 1.0 },
            Marginal::Gaussian { mean: 2.0, sd: 0.0 },
        ])
        .unwrap();
        let e = estimate_upper(&sum, &s, 0b10, &cfg).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn over_cap_rejected() {
        let mut cfg = EstimatorConfig::new(100, 0);
        cfg.max_vars = 2;
        let s = IndependentSampler::standard_normal(3).unwrap();
        assert!(matches!(
            estimate_totals(&|w: &[f64]| w[0], &s, &cfg),
            Err(EstimateError::TooManyVars { count: 3, cap: 2 })
        ));
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(
            builtin_names(),
            vec!["linear3", "quadratic3", "sigmoid_nn3", "multilinear3"]
        );
        assert!(builtin("nope").is_none());
        let q = builtin("quadratic3").unwrap();
        assert_eq!((q.eval)(&[1.0, 2.0, 3.0]), 11.0);
    }
}
