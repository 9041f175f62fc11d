//! Pick-freeze Monte Carlo over pairs of independent uniform noise vectors.
//!
//! An evaluator maps a uniform vector `u ∈ (0,1)^D` to an output. For a
//! coordinate mask `S`, the hybrid takes `u'` on `S` and `u` elsewhere.
//! Replicates are grouped into contiguous batches; each batch is cut into
//! fixed chunks that may run in parallel, and chunk sums are merged in chunk
//! order, so results do not depend on the number of worker threads.

use rayon::prelude::*;
use thiserror::Error;

use crate::rng::NoiseStream;
use crate::subset::{self, Mask};

const CHUNK: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("output has zero variance")]
    ZeroVariance,
    #[error("non-finite output in replicate {replicate}")]
    NonFinite { replicate: u64 },
    #[error("{count} variables exceed the cap of {cap}")]
    TooManyVars { count: usize, cap: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid subset: {0}")]
    Subset(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

/// Monte Carlo settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub samples: usize,
    pub seed: u64,
    /// Number of nonoverlapping batches used for standard errors.
    pub batches: usize,
    pub max_vars: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            batches: 20,
            max_vars: 12,
        }
    }
}

impl EstimatorConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.batches < 2 || self.samples < self.batches {
            return Err(EstimateError::Config(format!(
                "need samples ≥ batches ≥ 2 (samples = {}, batches = {})",
                self.samples, self.batches
            )));
        }
        Ok(())
    }
}

/// A Monte Carlo point value with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Evaluator of the output on a uniform noise vector.
pub type Evaluator<'a> = dyn Fn(&[f64]) -> Result<f64, EstimateError> + Sync + 'a;

trait Accumulator: Send + Sized {
    fn merge(&mut self, other: Self);
}

#[derive(Clone)]
struct TotalsAcc {
    den: f64,
    num: Vec<f64>,
}

impl Accumulator for TotalsAcc {
    fn merge(&mut self, other: Self) {
        self.den += other.den;
        for (a, b) in self.num.iter_mut().zip(other.num) {
            *a += b;
        }
    }
}

#[derive(Clone, Default)]
struct MomentAcc {
    n: f64,
    den: f64,
    sx: f64,
    sy: f64,
    sxy: f64,
}

impl Accumulator for MomentAcc {
    fn merge(&mut self, o: Self) {
        self.n += o.n;
        self.den += o.den;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxy += o.sxy;
    }
}

impl MomentAcc {
    /// Sample covariance of the accumulated `(x, y)` pairs.
    fn cov(&self) -> f64 {
        (self.sxy - self.sx * self.sy / self.n) / (self.n - 1.0)
    }

    /// `V̂ar(Y) = Σ (y - y')² / 2n`.
    fn var(&self) -> f64 {
        self.den / (2.0 * self.n)
    }
}

pub(crate) struct PickFreeze<'a> {
    pub dim: usize,
    pub eval: &'a Evaluator<'a>,
    pub cfg: &'a EstimatorConfig,
}

#[inline]
fn hybrid_into(out: &mut [f64], first: &[f64], second: &[f64], mask: Mask) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = if subset::contains(mask, k) {
            second[k]
        } else {
            first[k]
        };
    }
}

fn finite(v: f64, replicate: u64) -> Result<f64, EstimateError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EstimateError::NonFinite { replicate })
    }
}

/// Mean and batch-means standard error of per-batch ratios, with the point
/// value taken as the ratio of the pooled sums.
fn ratio_estimate(nums: &[f64], dens: &[f64], samples: usize) -> Estimate {
    let value = nums.iter().sum::<f64>() / dens.iter().sum::<f64>();
    let ratios: Vec<f64> = nums
        .iter()
        .zip(dens)
        .filter(|(_, &d)| d > 0.0)
        .map(|(n, d)| n / d)
        .collect();
    let b = ratios.len() as f64;
    let stderr = if ratios.len() < 2 {
        0.0
    } else {
        let mean = ratios.iter().sum::<f64>() / b;
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b * (b - 1.0))).sqrt()
    };
    Estimate {
        value,
        stderr,
        samples,
    }
}

impl<'a> PickFreeze<'a> {
    fn batch_range(&self, b: usize) -> (usize, usize) {
        let m = self.cfg.samples;
        let nb = self.cfg.batches;
        (b * m / nb, (b + 1) * m / nb)
    }

    /// Runs `step` on every replicate and returns one accumulator per batch.
    fn run<A, Z, S>(&self, zero: Z, step: S) -> Result<Vec<A>, EstimateError>
    where
        A: Accumulator,
        Z: Fn() -> A + Sync,
        S: Fn(&mut A, u64, &[f64], &[f64]) -> Result<(), EstimateError> + Sync,
    {
        self.cfg.validate()?;
        let mut jobs = Vec::new();
        for b in 0..self.cfg.batches {
            let (lo, hi) = self.batch_range(b);
            let mut start = lo;
            while start < hi {
                let end = (start + CHUNK).min(hi);
                jobs.push((b, start, end));
                start = end;
            }
        }
        let stream = NoiseStream::new(self.cfg.seed);
        let dim = self.dim;
        let chunks: Vec<(usize, A)> = jobs
            .par_iter()
            .map(|&(b, lo, hi)| {
                let mut acc = zero();
                let mut first = vec![0.0; dim];
                let mut second = vec![0.0; dim];
                for r in lo..hi {
                    stream.fill_pair(r as u64, &mut first, &mut second);
                    step(&mut acc, r as u64, &first, &second)?;
                }
                Ok((b, acc))
            })
            .collect::<Result<_, EstimateError>>()?;
        let mut batches: Vec<Option<A>> = (0..self.cfg.batches).map(|_| None).collect();
        for (b, acc) in chunks {
            match &mut batches[b] {
                Some(existing) => existing.merge(acc),
                slot => *slot = Some(acc),
            }
        }
        Ok(batches
            .into_iter()
            .map(|a| a.unwrap_or_else(&zero))
            .collect())
    }

    /// Normalized upper indices `Σ(y - y_S)² / Σ(y - y')²` for each hybrid mask.
    pub fn upper_totals(&self, masks: &[Mask]) -> Result<Vec<Estimate>, EstimateError> {
        let full = subset::full_mask(self.dim);
        let eval = self.eval;
        let batches = self.run(
            || TotalsAcc {
                den: 0.0,
                num: vec![0.0; masks.len()],
            },
            |acc, r, first, second| {
                let y = finite(eval(first)?, r)?;
                let y2 = finite(eval(second)?, r)?;
                acc.den += (y - y2) * (y - y2);
                let mut h = vec![0.0; first.len()];
                for (i, &m) in masks.iter().enumerate() {
                    let ys = if m == full {
                        y2
                    } else if m == 0 {
                        y
                    } else {
                        hybrid_into(&mut h, first, second, m);
                        finite(eval(&h)?, r)?
                    };
                    acc.num[i] += (y - ys) * (y - ys);
                }
                Ok(())
            },
        )?;
        let dens: Vec<f64> = batches.iter().map(|a| a.den).collect();
        if !(dens.iter().sum::<f64>() > 0.0) {
            return Err(EstimateError::ZeroVariance);
        }
        Ok((0..masks.len())
            .map(|i| {
                let nums: Vec<f64> = batches.iter().map(|a| a.num[i]).collect();
                ratio_estimate(&nums, &dens, self.cfg.samples)
            })
            .collect())
    }

    /// `Cov(y, y_{S^c}) / V̂ar(Y)`, where the hybrid keeps `u` on `S` only.
    pub fn lower(&self, mask: Mask) -> Result<Estimate, EstimateError> {
        let rest = subset::full_mask(self.dim) & !mask;
        let eval = self.eval;
        let batches = self.run(MomentAcc::default, |acc, r, first, second| {
            let y = finite(eval(first)?, r)?;
            let y2 = finite(eval(second)?, r)?;
            let mut h = vec![0.0; first.len()];
            hybrid_into(&mut h, first, second, rest);
            let yh = finite(eval(&h)?, r)?;
            acc.n += 1.0;
            acc.den += (y - y2) * (y - y2);
            acc.sx += y;
            acc.sy += yh;
            acc.sxy += y * yh;
            Ok(())
        })?;
        self.moment_ratio(&batches, 1.0)
    }

    /// `V̂ar(I_S(u, u')) / (2^{|S|} V̂ar(Y))`.
    pub fn superset(&self, mask: Mask) -> Result<Estimate, EstimateError> {
        let eval = self.eval;
        let full = subset::full_mask(self.dim);
        let k = subset::size(mask);
        let batches = self.run(MomentAcc::default, |acc, r, first, second| {
            let y = finite(eval(first)?, r)?;
            let y2 = finite(eval(second)?, r)?;
            let mut h = vec![0.0; first.len()];
            let mut contrast = 0.0;
            for t in subset::subsets_of(mask) {
                let v = if t == 0 {
                    y
                } else if t == full {
                    y2
                } else {
                    hybrid_into(&mut h, first, second, t);
                    finite(eval(&h)?, r)?
                };
                contrast += subset::sign(k - subset::size(t)) as f64 * v;
            }
            acc.n += 1.0;
            acc.den += (y - y2) * (y - y2);
            acc.sx += contrast;
            acc.sy += contrast;
            acc.sxy += contrast * contrast;
            Ok(())
        })?;
        self.moment_ratio(&batches, (1u64 << k) as f64)
    }

    fn moment_ratio(&self, batches: &[MomentAcc], scale: f64) -> Result<Estimate, EstimateError> {
        let mut pooled = MomentAcc::default();
        for b in batches {
            pooled.merge(b.clone());
        }
        let var = pooled.var();
        if !(var > 0.0) {
            return Err(EstimateError::ZeroVariance);
        }
        let value = pooled.cov() / (scale * var);
        let ratios: Vec<f64> = batches
            .iter()
            .filter(|b| b.n > 1.0 && b.den > 0.0)
            .map(|b| b.cov() / (scale * b.var()))
            .collect();
        let nb = ratios.len() as f64;
        let stderr = if ratios.len() < 2 {
            0.0
        } else {
            let mean = ratios.iter().sum::<f64>() / nb;
            (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (nb * (nb - 1.0))).sqrt()
        };
        Ok(Estimate {
            value,
            stderr,
            samples: self.cfg.samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(20, 0).validate().is_ok());
        let mut c = EstimatorConfig::new(10, 0);
        c.batches = 1;
        assert!(c.validate().is_err());
        assert!(EstimatorConfig::new(5, 0).validate().is_err());
    }

    #[test]
    fn full_mask_ratio_is_exactly_one() {
        let eval = |u: &[f64]| -> Result<f64, EstimateError> { Ok(u[0] * u[1] + u[1]) };
        let cfg = EstimatorConfig::new(1000, 3);
        let pf = PickFreeze {
            dim: 2,
            eval: &eval,
            cfg: &cfg,
        };
        let est = pf.upper_totals(&[0b11]).unwrap();
        assert_eq!(est[0].value, 1.0);
        assert_eq!(est[0].stderr, 0.0);
    }

    #[test]
    fn zero_variance_detected() {
        let eval = |_: &[f64]| -> Result<f64, EstimateError> { Ok(2.0) };
        let cfg = EstimatorConfig::new(100, 3);
        let pf = PickFreeze {
            dim: 1,
            eval: &eval,
            cfg: &cfg,
        };
        assert_eq!(pf.upper_totals(&[1]), Err(EstimateError::ZeroVariance));
        assert_eq!(pf.lower(1), Err(EstimateError::ZeroVariance));
    }

    #[test]
    fn non_finite_reported() {
        let eval = |u: &[f64]| -> Result<f64, EstimateError> {
            Ok(if u[0] > 0.99 { f64::NAN } else { u[0] })
        };
        let cfg = EstimatorConfig::new(2000, 1);
        let pf = PickFreeze {
            dim: 1,
            eval: &eval,
            cfg: &cfg,
        };
        assert!(matches!(
            pf.upper_totals(&[1]),
            Err(EstimateError::NonFinite { .. })
        ));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let eval =
            |u: &[f64]| -> Result<f64, EstimateError> { Ok((u[0] * 3.0).sin() + u[1] * u[2]) };
        let cfg = EstimatorConfig::new(20_000, 5);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let pf = PickFreeze {
                    dim: 3,
                    eval: &eval,
                    cfg: &cfg,
                };
                (
                    pf.upper_totals(&[1, 2, 3, 4, 5, 6, 7]).unwrap(),
                    pf.lower(3).unwrap(),
                    pf.superset(5).unwrap(),
                )
            })
        };
        assert_eq!(run(1), run(4));
    }
}
