//! Seeded generators for stationary associated sequences.
//!
//! Every family is associated by construction: i.i.d. draws, Gaussian AR(1)
//! with `phi >= 0` (all correlations nonnegative), moving averages with
//! nonnegative weights (nondecreasing functions of independent innovations),
//! and nondecreasing transforms of any of these. Non-monotone transforms are
//! allowed as long as they come with a dominating function.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DominationPair, Marginal, Provenance, ScalarFn};
use crate::quadrature::GaussHermite;

/// `(seed, stream)` pair selecting an independent ChaCha8 stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    pub fn offset(&self, by: u64) -> Self {
        Self {
            seed: self.seed,
            stream: self.stream.wrapping_add(by),
        }
    }
}

/// Pointwise transform applied to a base process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Identity,
    Cube,
    /// `1{x > threshold}`.
    Indicator {
        threshold: f64,
    },
    /// `max(-bound, min(bound, x))`.
    Clamp {
        bound: f64,
    },
    /// `((x - center)^2 + offset) / 2`, the first projection of the variance
    /// kernel. Not monotone.
    CenteredSquare {
        center: f64,
        offset: f64,
    },
}

impl Transform {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Cube => x * x * x,
            Transform::Indicator { threshold } => f64::from(u8::from(x > threshold)),
            Transform::Clamp { bound } => x.clamp(-bound, bound),
            Transform::CenteredSquare { center, offset } => {
                let d = x - center;
                (d * d + offset) / 2.0
            }
        }
    }

    pub fn is_monotone(&self) -> bool {
        !matches!(self, Transform::CenteredSquare { .. })
    }

    pub fn as_fn(&self) -> ScalarFn {
        let t = self.clone();
        Arc::new(move |x| t.apply(x))
    }

    /// Domination pair certifying the transform; monotone transforms
    /// dominate themselves.
    pub fn domination(&self) -> DominationPair {
        match *self {
            Transform::CenteredSquare { center, offset } => {
                let f_tilde: ScalarFn = Arc::new(move |x| {
                    let d = x - center;
                    (d * d.abs() + offset) / 2.0
                });
                DominationPair::new(
                    self.as_fn(),
                    f_tilde,
                    Provenance::BoundedVariationConstruction,
                )
            }
            _ => DominationPair::identity(self.as_fn()),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Transform::Clamp { bound } if !(bound > 0.0) => Err(Error::InvalidParameter(format!(
                "clamp bound must be positive, got {bound}"
            ))),
            Transform::Indicator { threshold } if !threshold.is_finite() => Err(
                Error::InvalidParameter("indicator threshold must be finite".into()),
            ),
            Transform::CenteredSquare { center, offset }
                if !(center.is_finite() && offset.is_finite()) =>
            {
                Err(Error::InvalidParameter(
                    "centered square needs finite parameters".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Iid {
        marginal: Marginal,
    },
    /// `X_t - mean = phi (X_{t-1} - mean) + sigma e_t`, started from the
    /// stationary law `N(mean, sigma^2 / (1 - phi^2))`.
    GaussianAr1 {
        phi: f64,
        sigma: f64,
        #[serde(default)]
        mean: f64,
    },
    /// `X_t = mean + sum_i coeffs[i] e_{t-i}` with i.i.d. innovations.
    PositiveMa {
        coeffs: Vec<f64>,
        innovation: Marginal,
        #[serde(default)]
        mean: f64,
    },
    Transformed {
        base: Box<ProcessSpec>,
        transform: Transform,
    },
}

/// A Gaussian process seen through a pointwise transform.
#[derive(Clone)]
pub struct GaussianView {
    pub mean: f64,
    pub var: f64,
    pub transform: ScalarFn,
    corr: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
}

impl GaussianView {
    pub fn corr(&self, lag: usize) -> f64 {
        (self.corr)(lag)
    }
}

impl ProcessSpec {
    /// AR(1) with unit stationary variance.
    pub fn gaussian_ar1_unit(phi: f64) -> Self {
        ProcessSpec::GaussianAr1 {
            phi,
            sigma: (1.0 - phi * phi).max(0.0).sqrt(),
            mean: 0.0,
        }
    }

    pub fn iid_standard_normal() -> Self {
        ProcessSpec::Iid {
            marginal: Marginal::standard_normal(),
        }
    }

    pub fn transformed(base: ProcessSpec, transform: Transform) -> Self {
        ProcessSpec::Transformed {
            base: Box::new(base),
            transform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Iid { marginal } => marginal.validate(),
            ProcessSpec::GaussianAr1 { phi, sigma, mean } => {
                if phi.is_nan() || *phi < 0.0 {
                    return Err(Error::Association(format!(
                        "AR(1) coefficient phi = {phi} < 0 does not give an associated sequence; need 0 <= phi < 1"
                    )));
                }
                if *phi >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "AR(1) with phi = {phi} is not stationary"
                    )));
                }
                if !(sigma.is_finite() && *sigma >= 0.0 && mean.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "AR(1) needs finite sigma >= 0 and finite mean".into(),
                    ));
                }
                Ok(())
            }
            ProcessSpec::PositiveMa {
                coeffs,
                innovation,
                mean,
            } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidParameter(
                        "MA process needs at least one coefficient".into(),
                    ));
                }
                if let Some(c) = coeffs.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
                    return Err(Error::Association(format!(
                        "MA coefficient {c} is negative or not finite; association needs nonnegative weights"
                    )));
                }
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter("MA mean must be finite".into()));
                }
                innovation.validate()
            }
            ProcessSpec::Transformed { base, transform } => {
                base.validate()?;
                transform.validate()
            }
        }
    }

    /// Analytic autocovariance at `lag`; `None` for transformed families.
    pub fn autocov(&self, lag: usize) -> Option<f64> {
        match self {
            ProcessSpec::Iid { marginal } => Some(if lag == 0 { marginal.variance() } else { 0.0 }),
            ProcessSpec::GaussianAr1 { phi, sigma, .. } => {
                Some(sigma * sigma / (1.0 - phi * phi) * phi.powi(lag as i32))
            }
            ProcessSpec::PositiveMa {
                coeffs, innovation, ..
            } => {
                let dot: f64 = coeffs
                    .iter()
                    .zip(coeffs.iter().skip(lag))
                    .map(|(a, b)| a * b)
                    .sum();
                Some(innovation.variance() * dot)
            }
            ProcessSpec::Transformed { .. } => None,
        }
    }

    /// Marginal law of `X_t` when it has a closed form.
    pub fn marginal(&self) -> Option<Marginal> {
        match self {
            ProcessSpec::Iid { marginal } => Some(marginal.clone()),
            ProcessSpec::GaussianAr1 { mean, .. } => Some(Marginal::Gaussian {
                mean: *mean,
                var: self.autocov(0)?,
            }),
            ProcessSpec::PositiveMa {
                coeffs,
                innovation: Marginal::Gaussian { mean: m, .. },
                mean,
            } => Some(Marginal::Gaussian {
                mean: mean + m * coeffs.iter().sum::<f64>(),
                var: self.autocov(0)?,
            }),
            ProcessSpec::PositiveMa { .. } | ProcessSpec::Transformed { .. } => None,
        }
    }

    /// Transform chain applied over a Gaussian base, when there is one.
    pub fn gaussian_view(&self) -> Option<GaussianView> {
        match self {
            ProcessSpec::Transformed { base, transform } => {
                let inner = base.gaussian_view()?;
                let (f, t) = (Arc::clone(&inner.transform), transform.clone());
                Some(GaussianView {
                    transform: Arc::new(move |x| t.apply(f(x))),
                    ..inner
                })
            }
            _ => {
                let Some(Marginal::Gaussian { mean, var }) = self.marginal() else {
                    return None;
                };
                if self.is_iid() {
                    return Some(GaussianView {
                        mean,
                        var,
                        transform: Arc::new(|x| x),
                        corr: Arc::new(|lag| if lag == 0 { 1.0 } else { 0.0 }),
                    });
                }
                let spec = self.clone();
                Some(GaussianView {
                    mean,
                    var,
                    transform: Arc::new(|x| x),
                    corr: Arc::new(move |lag| {
                        if var == 0.0 {
                            return if lag == 0 { 1.0 } else { 0.0 };
                        }
                        spec.autocov(lag).unwrap_or(0.0) / var
                    }),
                })
            }
        }
    }

    pub fn is_iid(&self) -> bool {
        match self {
            ProcessSpec::Iid { .. } => true,
            ProcessSpec::GaussianAr1 { phi, .. } => *phi == 0.0,
            ProcessSpec::PositiveMa { coeffs, .. } => coeffs.len() == 1,
            ProcessSpec::Transformed { base, .. } => base.is_iid(),
        }
    }

    /// Lag beyond which the process is exactly uncorrelated, if any.
    pub fn dependence_range(&self) -> Option<usize> {
        match self {
            ProcessSpec::Iid { .. } => Some(0),
            ProcessSpec::GaussianAr1 { phi, .. } => (*phi == 0.0).then_some(0),
            ProcessSpec::PositiveMa { coeffs, .. } => Some(coeffs.len() - 1),
            ProcessSpec::Transformed { base, .. } => base.dependence_range(),
        }
    }

    /// Clamp bound `C_1` if the process is truncated.
    pub fn bound(&self) -> Option<f64> {
        match self {
            ProcessSpec::Transformed {
                transform: Transform::Clamp { bound },
                base,
            } => Some(base.bound().map_or(*bound, |b| b.min(*bound))),
            ProcessSpec::Transformed { base, .. } => base.bound(),
            _ => None,
        }
    }

    pub fn has_analytic_autocov(&self) -> bool {
        !matches!(self, ProcessSpec::Transformed { .. })
    }

    /// `E g(X_1)` under the stationary marginal; quadrature over the
    /// Gaussian base for transformed Gaussian processes.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> Option<f64> {
        if let Some(m) = self.marginal() {
            return Some(m.expect(g));
        }
        let view = self.gaussian_view()?;
        let t = &view.transform;
        Some(GaussHermite::standard().expect(view.mean, view.var, |x| g(t(x))))
    }
}

/// Wraps `spec` in the clamp `x -> max(-c1, min(c1, x))`. Clamping is
/// nondecreasing so association survives; the analytic autocovariance of
/// the result is no longer available.
pub fn truncate_bounded(spec: ProcessSpec, c1: f64) -> Result<ProcessSpec> {
    if !(c1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation bound must be positive, got {c1}"
        )));
    }
    Ok(ProcessSpec::transformed(
        spec,
        Transform::Clamp { bound: c1 },
    ))
}

pub fn generate(spec: &ProcessSpec, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "series length n must be at least 1".into(),
        ));
    }
    let mut rng = seed.rng();
    Ok(generate_with(spec, n, &mut rng))
}

fn generate_with(spec: &ProcessSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match spec {
        ProcessSpec::Iid { marginal } => (0..n).map(|_| marginal.sample(rng)).collect(),
        ProcessSpec::GaussianAr1 { phi, sigma, mean } => {
            let stationary_sd = sigma / (1.0 - phi * phi).sqrt();
            let mut out = Vec::with_capacity(n);
            let z: f64 = StandardNormal.sample(rng);
            let mut state = stationary_sd * z;
            out.push(mean + state);
            for _ in 1..n {
                let z: f64 = StandardNormal.sample(rng);
                state = phi * state + sigma * z;
                out.push(mean + state);
            }
            out
        }
        ProcessSpec::PositiveMa {
            coeffs,
            innovation,
            mean,
        } => {
            let q = coeffs.len() - 1;
            let shocks: Vec<f64> = (0..n + q).map(|_| innovation.sample(rng)).collect();
            (0..n)
                .map(|t| {
                    let newest = t + q;
                    mean + coeffs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * shocks[newest - i])
                        .sum::<f64>()
                })
                .collect()
        }
        ProcessSpec::Transformed { base, transform } => {
            let mut out = generate_with(base, n, rng);
            for x in &mut out {
                *x = transform.apply(*x);
            }
            out
        }
    }
}

/// Sample autocovariance at `lag`, centered at the sample mean, divisor `n`.
pub fn sample_autocov(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    if lag >= n {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::check_domination;

    #[test]
    fn seeds_reproduce_and_streams_differ() {
        let spec = ProcessSpec::gaussian_ar1_unit(0.5);
        let a = generate(&spec, 500, SeedSpec::new(7, 0)).unwrap();
        let b = generate(&spec, 500, SeedSpec::new(7, 0)).unwrap();
        let c = generate(&spec, 500, SeedSpec::new(7, 1)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_associated_or_invalid_specs() {
        let neg = ProcessSpec::GaussianAr1 {
            phi: -0.2,
            sigma: 1.0,
            mean: 0.0,
        };
        let err = generate(&neg, 10, SeedSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Association(_)));
        assert!(err.to_string().contains("associated"));
        let unit_root = ProcessSpec::GaussianAr1 {
            phi: 1.0,
            sigma: 1.0,
            mean: 0.0,
        };
        assert!(generate(&unit_root, 10, SeedSpec::default()).is_err());
        let ma = ProcessSpec::PositiveMa {
            coeffs: vec![1.0, -0.5],
            innovation: Marginal::standard_normal(),
            mean: 0.0,
        };
        assert!(matches!(
            generate(&ma, 10, SeedSpec::default()),
            Err(Error::Association(_))
        ));
        assert!(generate(&ProcessSpec::iid_standard_normal(), 0, SeedSpec::default()).is_err());
    }

    #[test]
    fn iid_lag_one_autocorrelation_vanishes() {
        let x = generate(
            &ProcessSpec::gaussian_ar1_unit(0.0),
            1_000_000,
            SeedSpec::new(1, 0),
        )
        .unwrap();
        let r1 = sample_autocov(&x, 1) / sample_autocov(&x, 0);
        assert!(r1.abs() < 0.004, "lag-1 autocorrelation {r1}");
    }

    #[test]
    fn ar1_lag_two_autocovariance() {
        let spec = ProcessSpec::gaussian_ar1_unit(0.5);
        assert!((spec.autocov(2).unwrap() - 0.25).abs() < 1e-15);
        let x = generate(&spec, 1_000_000, SeedSpec::new(2, 0)).unwrap();
        // Bartlett variance of the lag-2 autocovariance for phi = 0.5.
        let se = bartlett_se(&spec, 2, x.len());
        let got = sample_autocov(&x, 2);
        assert!((got - 0.25).abs() < 3.0 * se, "{got} (se {se})");
    }

    #[test]
    fn ma1_covariance_algebra() {
        let spec = ProcessSpec::PositiveMa {
            coeffs: vec![1.0, 1.0],
            innovation: Marginal::standard_normal(),
            mean: 0.0,
        };
        assert_eq!(spec.autocov(0), Some(2.0));
        assert_eq!(spec.autocov(1), Some(1.0));
        assert_eq!(spec.autocov(2), Some(0.0));
        assert_eq!(spec.dependence_range(), Some(1));
    }

    #[test]
    fn clamping_reduces_variance() {
        let spec = truncate_bounded(ProcessSpec::gaussian_ar1_unit(0.5), 1.0).unwrap();
        assert_eq!(spec.bound(), Some(1.0));
        assert!(!spec.has_analytic_autocov());
        let x = generate(&spec, 200_000, SeedSpec::new(3, 0)).unwrap();
        assert!(x.iter().all(|v| v.abs() <= 1.0));
        assert!(sample_autocov(&x, 0) < 1.0);
        assert!(truncate_bounded(ProcessSpec::iid_standard_normal(), 0.0).is_err());
    }

    #[test]
    fn huge_bound_leaves_series_unchanged() {
        let base = ProcessSpec::iid_standard_normal();
        let clamped = truncate_bounded(base.clone(), 1e9).unwrap();
        let a = generate(&base, 1_000_000, SeedSpec::new(4, 0)).unwrap();
        let b = generate(&clamped, 1_000_000, SeedSpec::new(4, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transforms_are_dominated() {
        let grid: Vec<f64> = (0..=400).map(|i| -4.0 + 0.02 * i as f64).collect();
        for t in [
            Transform::Identity,
            Transform::Cube,
            Transform::Clamp { bound: 1.5 },
            Transform::Indicator { threshold: 0.0 },
            Transform::CenteredSquare {
                center: 0.5,
                offset: 1.0,
            },
        ] {
            assert!(check_domination(&t.domination(), &grid).unwrap(), "{t:?}");
        }
    }

    #[test]
    fn transformed_expectation_by_quadrature() {
        let spec = ProcessSpec::transformed(
            ProcessSpec::gaussian_ar1_unit(0.3),
            Transform::CenteredSquare {
                center: 0.0,
                offset: 1.0,
            },
        );
        let mean = spec.expect(|x| x).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
    }

    fn bartlett_se(spec: &ProcessSpec, lag: usize, n: usize) -> f64 {
        let g = |k: i64| spec.autocov(k.unsigned_abs() as usize).unwrap();
        let h = lag as i64;
        let var: f64 = (-400..=400)
            .map(|k| g(k) * g(k) + g(k + h) * g(k - h))
            .sum();
        (var / n as f64).sqrt()
    }
}
