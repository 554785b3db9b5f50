//! Symmetric kernels, their marginal laws, and domination pairs.
//!
//! Builtin kernels carry closed-form projections `rho_c` and `theta` under
//! any marginal with known moments. Custom kernels get their projections by
//! Monte Carlo in [`crate::hoeffding`].

mod domination;
mod marginal;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use domination::{
    bv_domination, check_domination, default_grid, DominationPair, Provenance, DOMINATION_TOLERANCE,
};
pub use marginal::{Marginal, Moments};

use crate::error::{Error, Result};

/// Kernel of `c` real arguments.
pub type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Real function of one argument.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub const MAX_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKernel {
    /// `rho(x) = x`; the sample mean as a degree-1 U-statistic.
    Mean,
    /// `rho(x, y) = (x - y)^2 / 2`.
    Variance,
    /// `rho(x, y) = x y`.
    SquaredMean,
    /// Degree-3 kernel of the unbiased third central moment.
    ThirdMoment,
}

impl BuiltinKernel {
    pub const ALL: [BuiltinKernel; 4] = [
        BuiltinKernel::Mean,
        BuiltinKernel::Variance,
        BuiltinKernel::SquaredMean,
        BuiltinKernel::ThirdMoment,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BuiltinKernel::Mean => "mean",
            BuiltinKernel::Variance => "variance",
            BuiltinKernel::SquaredMean => "squared_mean",
            BuiltinKernel::ThirdMoment => "third_moment",
        }
    }

    pub fn degree(self) -> usize {
        match self {
            BuiltinKernel::Mean => 1,
            BuiltinKernel::Variance | BuiltinKernel::SquaredMean => 2,
            BuiltinKernel::ThirdMoment => 3,
        }
    }
}

impl fmt::Display for BuiltinKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BuiltinKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinKernel::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::UnknownKernel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Monotone,
    NonMonotone,
    Unknown,
}

/// Closed-form projections of a kernel under one marginal law.
#[derive(Clone)]
pub struct AnalyticProjections {
    pub theta: f64,
    /// `rho[c - 1]` is `rho_c` for `c = 1..k-1`; `rho_k` is the kernel itself.
    pub rho: Vec<KernelFn>,
}

#[derive(Clone)]
pub struct SymmetricKernel {
    id: String,
    degree: usize,
    eval: KernelFn,
    builtin: Option<BuiltinKernel>,
}

impl fmt::Debug for SymmetricKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricKernel")
            .field("id", &self.id)
            .field("degree", &self.degree)
            .field("builtin", &self.builtin)
            .finish()
    }
}

fn sorted3(args: &[f64]) -> [f64; 3] {
    let mut v = [args[0], args[1], args[2]];
    if v[0] > v[1] {
        v.swap(0, 1);
    }
    if v[1] > v[2] {
        v.swap(1, 2);
    }
    if v[0] > v[1] {
        v.swap(0, 1);
    }
    v
}

/// `(3/2) sum (x_i - xbar)^3` over three points, written through pairwise
/// differences: the sum of cubed deviations is `3 d_x d_y d_z` because the
/// deviations sum to zero. Exactly zero on ties and translation invariant.
pub(crate) fn third_moment_kernel(x: f64, y: f64, z: f64) -> f64 {
    let a = (x - y) + (x - z);
    let b = (y - x) + (y - z);
    let c = (z - x) + (z - y);
    a * b * c / 6.0
}

impl SymmetricKernel {
    pub fn builtin(kind: BuiltinKernel) -> Self {
        let eval: KernelFn = match kind {
            BuiltinKernel::Mean => Arc::new(|a: &[f64]| a[0]),
            BuiltinKernel::Variance => Arc::new(|a: &[f64]| {
                let d = a[0] - a[1];
                d * d / 2.0
            }),
            BuiltinKernel::SquaredMean => Arc::new(|a: &[f64]| a[0] * a[1]),
            // Sorting first makes the value bit-identical under permutation.
            BuiltinKernel::ThirdMoment => Arc::new(|a: &[f64]| {
                let [x, y, z] = sorted3(a);
                third_moment_kernel(x, y, z)
            }),
        };
        Self {
            id: kind.id().to_string(),
            degree: kind.degree(),
            eval,
            builtin: Some(kind),
        }
    }

    pub fn variance() -> Self {
        Self::builtin(BuiltinKernel::Variance)
    }

    pub fn squared_mean() -> Self {
        Self::builtin(BuiltinKernel::SquaredMean)
    }

    pub fn third_moment() -> Self {
        Self::builtin(BuiltinKernel::ThirdMoment)
    }

    pub fn mean() -> Self {
        Self::builtin(BuiltinKernel::Mean)
    }

    pub fn from_id(id: &str) -> Result<Self> {
        id.parse().map(Self::builtin)
    }

    /// A user kernel. The caller is responsible for symmetry; it is checked
    /// only by tests.
    pub fn custom<F>(id: impl Into<String>, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        Ok(Self {
            id: id.into(),
            degree,
            eval: Arc::new(f),
            builtin: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn builtin_kind(&self) -> Option<BuiltinKernel> {
        self.builtin
    }

    #[inline]
    pub fn eval(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.degree);
        (self.eval)(args)
    }

    pub fn eval_fn(&self) -> KernelFn {
        Arc::clone(&self.eval)
    }

    /// Closed-form `theta` and `rho_1..rho_{k-1}` under `marginal`. The
    /// third-moment forms are written for a centered law; other means are
    /// handled by centering the arguments.
    pub fn analytic_projections(&self, marginal: &Marginal) -> Option<AnalyticProjections> {
        let m = marginal.moments();
        let Moments { mean, mu2, mu3, .. } = m;
        match self.builtin? {
            BuiltinKernel::Mean => Some(AnalyticProjections {
                theta: mean,
                rho: vec![],
            }),
            BuiltinKernel::Variance => {
                let rho1: KernelFn = Arc::new(move |a: &[f64]| {
                    let d = a[0] - mean;
                    (d * d + mu2) / 2.0
                });
                Some(AnalyticProjections {
                    theta: mu2,
                    rho: vec![rho1],
                })
            }
            BuiltinKernel::SquaredMean => {
                let rho1: KernelFn = Arc::new(move |a: &[f64]| a[0] * mean);
                Some(AnalyticProjections {
                    theta: mean * mean,
                    rho: vec![rho1],
                })
            }
            BuiltinKernel::ThirdMoment => {
                let rho1: KernelFn = Arc::new(move |a: &[f64]| {
                    let x = a[0] - mean;
                    (2.0 * mu3 + x * x * x) / 3.0 - mu2 * x
                });
                let rho2: KernelFn = Arc::new(move |a: &[f64]| {
                    let x = a[0] - mean;
                    let y = a[1] - mean;
                    (mu3 + x * x * x + y * y * y) / 3.0
                        - (x * x * y + y * y * x + mu2 * (x + y)) / 2.0
                });
                Some(AnalyticProjections {
                    theta: mu3,
                    rho: vec![rho1, rho2],
                })
            }
        }
    }

    pub fn analytic_theta(&self, marginal: &Marginal) -> Option<f64> {
        self.analytic_projections(marginal).map(|p| p.theta)
    }

    /// First projection `rho_1` as a scalar function.
    pub fn analytic_rho1(&self, marginal: &Marginal) -> Option<ScalarFn> {
        if self.degree == 1 {
            let eval = self.eval_fn();
            return Some(Arc::new(move |x| eval(&[x])));
        }
        let rho1 = self
            .analytic_projections(marginal)?
            .rho
            .into_iter()
            .next()?;
        Some(Arc::new(move |x| rho1(&[x])))
    }

    pub fn rho1_monotonicity(&self, marginal: &Marginal) -> Monotonicity {
        let point_mass = marginal.is_point_mass();
        match self.builtin {
            Some(BuiltinKernel::Mean) | Some(BuiltinKernel::SquaredMean) => Monotonicity::Monotone,
            Some(BuiltinKernel::Variance) | Some(BuiltinKernel::ThirdMoment) if point_mass => {
                Monotonicity::Unknown
            }
            Some(BuiltinKernel::Variance) | Some(BuiltinKernel::ThirdMoment) => {
                Monotonicity::NonMonotone
            }
            None => Monotonicity::Unknown,
        }
    }

    /// A dominating nondecreasing function for the analytic `rho_1`, built
    /// from a Jordan decomposition of `rho_1` around the marginal mean.
    pub fn rho1_domination(&self, marginal: &Marginal) -> Option<DominationPair> {
        let Moments { mean, mu2, mu3, .. } = marginal.moments();
        let rho1 = self.analytic_rho1(marginal)?;
        match self.builtin? {
            BuiltinKernel::Mean => Some(DominationPair::identity(rho1)),
            BuiltinKernel::SquaredMean => {
                let scale = mean.abs();
                Some(DominationPair::new(
                    rho1,
                    Arc::new(move |x| scale * x),
                    Provenance::UserSupplied,
                ))
            }
            BuiltinKernel::Variance => {
                // rho_1 = U1 - U2 with U1 = ((x-m)^2 1{x>=m} + var)/2, U2 = -(x-m)^2 1{x<m}/2.
                let f_tilde: ScalarFn = Arc::new(move |x| {
                    let d = x - mean;
                    let signed = if d >= 0.0 { d * d } else { -d * d };
                    (signed + mu2) / 2.0
                });
                Some(DominationPair::new(
                    rho1,
                    f_tilde,
                    Provenance::BoundedVariationConstruction,
                ))
            }
            BuiltinKernel::ThirdMoment => {
                let f_tilde: ScalarFn = Arc::new(move |x| {
                    let d = x - mean;
                    (2.0 * mu3 + d * d * d) / 3.0 + mu2 * d
                });
                Some(DominationPair::new(
                    rho1,
                    f_tilde,
                    Provenance::BoundedVariationConstruction,
                ))
            }
        }
    }
}
