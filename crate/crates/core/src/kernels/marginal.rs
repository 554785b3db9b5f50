use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{uniform_expect, GaussHermite};
use crate::summation::PairwiseSum;

/// One-dimensional marginal law `F` of a stationary sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Gaussian { mean: f64, var: f64 },
    Uniform { low: f64, high: f64 },
    Empirical { sample: Vec<f64> },
}

/// Mean and central moments of a marginal law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
}

const SIMPSON_INTERVALS: usize = 4000;

impl Marginal {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if !(mean.is_finite() && var.is_finite() && var >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian marginal needs finite mean and var >= 0, got ({mean}, {var})"
            )));
        }
        Ok(Marginal::Gaussian { mean, var })
    }

    pub fn standard_normal() -> Self {
        Marginal::Gaussian {
            mean: 0.0,
            var: 1.0,
        }
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidParameter(format!(
                "uniform marginal needs low < high, got ({low}, {high})"
            )));
        }
        Ok(Marginal::Uniform { low, high })
    }

    pub fn empirical(sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidParameter(
                "empirical marginal needs a sample".into(),
            ));
        }
        ensure_finite(&sample)?;
        Ok(Marginal::Empirical { sample })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Gaussian { mean, var } => Marginal::gaussian(*mean, *var).map(drop),
            Marginal::Uniform { low, high } => Marginal::uniform(*low, *high).map(drop),
            Marginal::Empirical { sample } => {
                if sample.is_empty() {
                    return Err(Error::InvalidParameter(
                        "empirical marginal needs a sample".into(),
                    ));
                }
                ensure_finite(sample)
            }
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            Marginal::Gaussian { mean, var } => Moments {
                mean: *mean,
                mu2: *var,
                mu3: 0.0,
                mu4: 3.0 * var * var,
            },
            Marginal::Uniform { low, high } => {
                let width = high - low;
                Moments {
                    mean: 0.5 * (low + high),
                    mu2: width * width / 12.0,
                    mu3: 0.0,
                    mu4: width.powi(4) / 80.0,
                }
            }
            Marginal::Empirical { sample } => {
                let n = sample.len() as f64;
                let mut sum = PairwiseSum::new();
                sum.extend(sample.iter().copied());
                let mean = sum.total() / n;
                let (mut s2, mut s3, mut s4) =
                    (PairwiseSum::new(), PairwiseSum::new(), PairwiseSum::new());
                for &x in sample {
                    let d = x - mean;
                    let d2 = d * d;
                    s2.add(d2);
                    s3.add(d2 * d);
                    s4.add(d2 * d2);
                }
                Moments {
                    mean,
                    mu2: s2.total() / n,
                    mu3: s3.total() / n,
                    mu4: s4.total() / n,
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    pub fn variance(&self) -> f64 {
        self.moments().mu2
    }

    pub fn is_point_mass(&self) -> bool {
        self.variance() == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Gaussian { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
            Marginal::Uniform { low, high } => rng.random_range(*low..*high),
            Marginal::Empirical { sample } => sample[rng.random_range(0..sample.len())],
        }
    }

    /// `E f(X)`: Gauss-Hermite for Gaussian laws, composite Simpson for the
    /// uniform law, and the exact average for an empirical law.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self {
            Marginal::Gaussian { mean, var } => GaussHermite::standard().expect(*mean, *var, f),
            Marginal::Uniform { low, high } => uniform_expect(*low, *high, SIMPSON_INTERVALS, f),
            Marginal::Empirical { sample } => {
                let mut sum = PairwiseSum::new();
                sum.extend(sample.iter().map(|&x| f(x)));
                sum.total() / sample.len() as f64
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            Marginal::Gaussian { mean, var } => {
                if *var == 0.0 {
                    return *mean;
                }
                Normal::new(*mean, var.sqrt())
                    .map(|d| d.inverse_cdf(p))
                    .unwrap_or(*mean)
            }
            Marginal::Uniform { low, high } => low + p * (high - low),
            Marginal::Empirical { sample } => {
                let mut sorted = sample.clone();
                sorted.sort_by(f64::total_cmp);
                let pos = p * (sorted.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
            }
        }
    }
}
