//! Overlapping-block estimator of the long-run standard deviation.
//!
//! For a stationary series `Y_1..Y_n` and block length `l`,
//!
//! ```text
//! B_n = 1/(n-l+1) * sum_{j=0}^{n-l} |S_j(l) - l * mean(Y)| / sqrt(l),   S_j(l) = Y_{j+1} + .. + Y_{j+l}
//! ```
//!
//! converges to `sigma_f * sqrt(2/pi)`, where `sigma_f^2` is the long-run
//! variance. This holds for associated series and for transforms `f(X)` of
//! associated series whenever `f` is dominated by a nondecreasing function.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{BuiltinKernel, Marginal, Monotonicity, SymmetricKernel};
use crate::ustat::subset_mean;

/// Block-length rule `l(n)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EllRule {
    Fixed(usize),
    /// `floor(n^(1/3))`.
    #[default]
    CubeRoot,
    /// `min(floor(n^(1/3)), floor(n / ln(n)^2))`.
    LogSquareCapped,
}

pub fn integer_cube_root(n: usize) -> usize {
    let mut r = (n as f64).cbrt().floor() as usize;
    while (r + 1).pow(3) <= n {
        r += 1;
    }
    while r > 0 && r.pow(3) > n {
        r -= 1;
    }
    r
}

impl EllRule {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let ell = match self {
            EllRule::Fixed(ell) => ell,
            EllRule::CubeRoot => integer_cube_root(n).max(1),
            EllRule::LogSquareCapped => {
                let cube = integer_cube_root(n).max(1);
                let ln = (n as f64).ln();
                if ln > 0.0 {
                    let capped = (n as f64 / (ln * ln)).floor() as usize;
                    cube.min(capped).max(1)
                } else {
                    cube
                }
            }
        };
        if ell == 0 || ell > n {
            return Err(Error::InvalidParameter(format!(
                "block length {ell} must lie in 1..={n}"
            )));
        }
        Ok(ell)
    }
}

impl fmt::Display for EllRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EllRule::Fixed(ell) => write!(f, "fixed({ell})"),
            EllRule::CubeRoot => f.write_str("cube_root"),
            EllRule::LogSquareCapped => f.write_str("log_square_capped"),
        }
    }
}

impl FromStr for EllRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "cube_root" => return Ok(EllRule::CubeRoot),
            "log_square_capped" => return Ok(EllRule::LogSquareCapped),
            _ => {}
        }
        let inner = s
            .strip_prefix("fixed(")
            .and_then(|rest| rest.strip_suffix(')'))
            .or_else(|| s.parse::<usize>().is_ok().then_some(s));
        match inner.and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(0) => Err(Error::InvalidParameter(
                "fixed block length must be at least 1".into(),
            )),
            Some(ell) => Ok(EllRule::Fixed(ell)),
            None => Err(Error::InvalidParameter(format!(
                "unknown block rule `{s}` (expected fixed(<l>), cube_root or log_square_capped)"
            ))),
        }
    }
}

impl TryFrom<String> for EllRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EllRule> for String {
    fn from(rule: EllRule) -> Self {
        rule.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub ell_rule: EllRule,
}

impl BlockConfig {
    pub fn new(ell_rule: EllRule) -> Self {
        Self { ell_rule }
    }

    pub fn fixed(ell: usize) -> Self {
        Self {
            ell_rule: EllRule::Fixed(ell),
        }
    }

    pub fn ell(&self, n: usize) -> Result<usize> {
        self.ell_rule.resolve(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunEstimate {
    pub b_n: f64,
    pub n: usize,
    pub ell: usize,
    pub ell_rule: EllRule,
    /// `b_n * sqrt(pi / 2)`.
    pub sigma_f_hat: f64,
    /// `sqrt(l / n) * A` with `sigma_f` replaced by `sigma_f_hat`.
    pub fluct_scale: f64,
    pub monotone_variant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `A / sigma` for the fluctuation bound: `sqrt((5pi-8)/(2pi)) + 1` for
/// monotone transforms and `sqrt((3pi-8)/(2pi)) + 1` for dominated ones.
pub fn fluctuation_constant(monotone: bool) -> f64 {
    let c = if monotone { 5.0 } else { 3.0 };
    ((c * PI - 8.0) / (2.0 * PI)).sqrt() + 1.0
}

/// Asymptotic bound on `P(sqrt(n/l) |B_n - E| > A x)`: `3 P(|N| > x)` for
/// monotone transforms and `2 P(|N| > x)` otherwise.
pub fn fluctuation_tail_probability(monotone: bool, x: f64) -> f64 {
    let factor = if monotone { 3.0 } else { 2.0 };
    (factor * erfc(x / 2f64.sqrt())).min(1.0)
}

/// Half-width `sqrt(l/n) * A * x` of the asymptotic deviation bound around
/// `E|S_0(l) - l mu| / sqrt(l)`.
pub fn fluctuation_bound(estimate: &LongRunEstimate, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "confidence multiplier must be positive, got {x}"
        )));
    }
    Ok(estimate.fluct_scale * x)
}

/// `1/(n-l+1) * sum_j |S_j(l) - l * center| / sqrt(l)` from prefix sums of
/// the centered series.
pub fn block_abs_mean(series: &[f64], ell: usize, center: f64) -> f64 {
    let n = series.len();
    debug_assert!(ell >= 1 && ell <= n);
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for &y in series {
        acc += y - center;
        prefix.push(acc);
    }
    let total: f64 = prefix.windows(ell + 1).map(|w| (w[ell] - w[0]).abs()).sum();
    total / ((n - ell + 1) as f64 * (ell as f64).sqrt())
}

fn estimate_with_variant(
    series: &[f64],
    config: &BlockConfig,
    monotone: bool,
) -> Result<LongRunEstimate> {
    ensure_finite(series)?;
    let n = series.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, degree: 2 });
    }
    let ell = config.ell(n)?;
    let constant = series.iter().all(|&y| y == series[0]);
    let (b_n, warning) = if constant {
        (
            0.0,
            Some("degenerate input: series is constant, B_n = 0".to_string()),
        )
    } else {
        let mean = crate::summation::pairwise_sum(series) / n as f64;
        (block_abs_mean(series, ell, mean), None)
    };
    let sigma_f_hat = b_n * (PI / 2.0).sqrt();
    Ok(LongRunEstimate {
        b_n,
        n,
        ell,
        ell_rule: config.ell_rule,
        sigma_f_hat,
        fluct_scale: (ell as f64 / n as f64).sqrt() * fluctuation_constant(monotone) * sigma_f_hat,
        monotone_variant: monotone,
        warning,
    })
}

/// `B_n` of an observed associated series.
pub fn block_estimator(series: &[f64], config: &BlockConfig) -> Result<LongRunEstimate> {
    estimate_with_variant(series, config, true)
}

/// Leave-one-out plug-in `rho1_hat(X_i)`: the average of
/// `rho(X_i, X_{j_1}, ..)` over subsets of the other observations.
pub fn empirical_rho1(sample: &[f64], kernel: &SymmetricKernel) -> Result<Vec<f64>> {
    ensure_finite(sample)?;
    let n = sample.len();
    let k = kernel.degree();
    if n < k.max(2) {
        return Err(Error::SampleTooSmall {
            n,
            degree: k.max(2),
        });
    }
    if k == 1 {
        return Ok(sample.iter().map(|&x| kernel.eval(&[x])).collect());
    }
    let m = (n - 1) as f64;
    match kernel.builtin_kind() {
        Some(BuiltinKernel::Variance) => {
            let mean = sample.iter().sum::<f64>() / n as f64;
            let c: Vec<f64> = sample.iter().map(|x| x - mean).collect();
            let (s1, s2) = (c.iter().sum::<f64>(), c.iter().map(|x| x * x).sum::<f64>());
            Ok(c.iter()
                .map(|&x| {
                    let (p1, p2) = (s1 - x, s2 - x * x);
                    (m * x * x - 2.0 * x * p1 + p2) / (2.0 * m)
                })
                .collect())
        }
        Some(BuiltinKernel::SquaredMean) => {
            let s1 = sample.iter().sum::<f64>();
            Ok(sample.iter().map(|&x| x * (s1 - x) / m).collect())
        }
        Some(BuiltinKernel::ThirdMoment) => {
            if n < 3 {
                return Err(Error::SampleTooSmall { n, degree: 3 });
            }
            let mean = sample.iter().sum::<f64>() / n as f64;
            let c: Vec<f64> = sample.iter().map(|x| x - mean).collect();
            let s1: f64 = c.iter().sum();
            let s2: f64 = c.iter().map(|x| x * x).sum();
            let s3: f64 = c.iter().map(|x| x * x * x).sum();
            let pairs = m * (m - 1.0) / 2.0;
            Ok(c.iter()
                .map(|&x| {
                    let (p1, p2, p3) = (s1 - x, s2 - x * x, s3 - x * x * x);
                    let e2 = (p1 * p1 - p2) / 2.0;
                    let total = pairs * x * x * x / 3.0 + (m - 1.0) * p3 / 3.0
                        - x * x * (m - 1.0) * p1 / 2.0
                        - x * (m - 1.0) * p2 / 2.0
                        - (p2 * p1 - p3) / 2.0
                        + 2.0 * x * e2;
                    total / pairs
                })
                .collect())
        }
        _ => (0..n)
            .map(|i| {
                let x = sample[i];
                let others: Vec<f64> = sample
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v)
                    .collect();
                let mut args = [0.0; crate::kernels::MAX_DEGREE];
                args[0] = x;
                subset_mean(&others, k - 1, &|rest: &[f64]| {
                    let mut a = args;
                    a[1..k].copy_from_slice(rest);
                    kernel.eval(&a[..k])
                })
            })
            .collect(),
    }
}

/// Plug-in estimate of `sigma_U`: `B_n` of the series `rho_1(X_j)`. With a
/// known `marginal` the analytic `rho_1` is used, otherwise the
/// leave-one-out plug-in of [`empirical_rho1`].
pub fn sigma_u_plugin(
    sample: &[f64],
    kernel: &SymmetricKernel,
    config: &BlockConfig,
    marginal: Option<&Marginal>,
) -> Result<LongRunEstimate> {
    ensure_finite(sample)?;
    let analytic = marginal.and_then(|m| {
        kernel
            .analytic_rho1(m)
            .map(|f| (f, kernel.rho1_monotonicity(m)))
    });
    let (series, monotonicity) = match analytic {
        Some((rho1, mono)) => (sample.iter().map(|&x| rho1(x)).collect::<Vec<_>>(), mono),
        None => {
            let mono = match kernel.builtin_kind() {
                Some(BuiltinKernel::Mean | BuiltinKernel::SquaredMean) => Monotonicity::Monotone,
                Some(_) => Monotonicity::NonMonotone,
                None => Monotonicity::Unknown,
            };
            (empirical_rho1(sample, kernel)?, mono)
        }
    };
    let constant_input = sample.iter().all(|&x| x == sample[0]);
    let mut est = estimate_with_variant(&series, config, monotonicity == Monotonicity::Monotone)?;
    if constant_input {
        est.b_n = 0.0;
        est.sigma_f_hat = 0.0;
        est.fluct_scale = 0.0;
        est.warning = Some("degenerate input: sample is constant, B_n = 0".to_string());
    }
    Ok(est)
}
