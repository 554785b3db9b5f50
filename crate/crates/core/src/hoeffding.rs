//! Hoeffding decomposition of a symmetric kernel and the asymptotic
//! variance of `U_n` over a stationary sequence.
//!
//! For a kernel of degree `k` the projections are
//! `rho_c(x_1..x_c) = E rho(x_1..x_c, X_{c+1}..X_k)` and the centered
//! components follow the recursion
//!
//! ```text
//! h^(c)(x_1..x_c) = rho_c(x_1..x_c) - sum_{j<c} sum_{|S|=j} h^(j)(x_S) - theta
//! ```
//!
//! after which `U_n = theta + sum_j C(k, j) H_n^(j)` holds for every sample.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assocgen::{generate, sample_autocov, ProcessSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::kernels::{KernelFn, Marginal, ScalarFn, SymmetricKernel, MAX_DEGREE};
use crate::quadrature::GaussHermite;
use crate::ustat::{binomial, subset_mean, u_statistic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProjectionSource {
    Analytic,
    /// Degree-1 kernels: `theta = E rho(X)` by quadrature, `rho_1 = rho`.
    Quadrature,
    MonteCarlo {
        draws: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    pub mc_draws: usize,
    pub seed: SeedSpec,
    /// Fail when the Monte Carlo standard error of `theta` exceeds this.
    pub theta_se_tolerance: Option<f64>,
}

pub const DEFAULT_MC_DRAWS: usize = 100_000;
pub const MIN_MC_DRAWS: usize = 10_000;

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            mc_draws: DEFAULT_MC_DRAWS,
            seed: SeedSpec::new(0x4844, 0),
            theta_se_tolerance: None,
        }
    }
}

#[derive(Clone)]
pub struct HoeffdingDecomposition {
    kernel: SymmetricKernel,
    marginal: Marginal,
    theta: f64,
    theta_se: f64,
    /// `rho_1..rho_k`; the last entry is the kernel itself.
    rho: Vec<KernelFn>,
    /// `h^(1)..h^(k)`.
    h: Vec<KernelFn>,
    source: ProjectionSource,
}

impl std::fmt::Debug for HoeffdingDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HoeffdingDecomposition")
            .field("kernel", &self.kernel)
            .field("theta", &self.theta)
            .field("theta_se", &self.theta_se)
            .field("source", &self.source)
            .finish_non_exhaustive()
    }
}

/// All index subsets of `0..c` with exactly `j` elements, lexicographic.
fn subsets(c: usize, j: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, c: usize, j: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for i in start..c {
            cur.push(i);
            rec(i + 1, c, j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, c, j, &mut Vec::new(), &mut out);
    out
}

fn build_components(theta: f64, rho: &[KernelFn]) -> Vec<KernelFn> {
    let mut h: Vec<KernelFn> = Vec::with_capacity(rho.len());
    for c in 1..=rho.len() {
        let rho_c = Arc::clone(&rho[c - 1]);
        let lower: Vec<(KernelFn, Vec<Vec<usize>>)> = (1..c)
            .map(|j| (Arc::clone(&h[j - 1]), subsets(c, j)))
            .collect();
        let component: KernelFn = Arc::new(move |args: &[f64]| {
            // Sorted arguments make every component exactly symmetric.
            let mut x = [0.0; MAX_DEGREE];
            x[..c].copy_from_slice(args);
            x[..c].sort_by(f64::total_cmp);
            let x = &x[..c];
            let mut value = rho_c(x) - theta;
            let mut buf = [0.0; MAX_DEGREE];
            for (hj, sets) in &lower {
                for set in sets {
                    for (slot, &i) in buf.iter_mut().zip(set) {
                        *slot = x[i];
                    }
                    value -= hj(&buf[..set.len()]);
                }
            }
            value
        });
        h.push(component);
    }
    h
}

/// Hoeffding decomposition of `kernel` under `marginal`. Closed forms are
/// used when the kernel has them; otherwise every projection averages the
/// kernel over one shared set of `mc_draws` Monte Carlo draws.
pub fn decompose(
    kernel: &SymmetricKernel,
    marginal: &Marginal,
    options: &DecomposeOptions,
) -> Result<HoeffdingDecomposition> {
    let k = kernel.degree();
    if k == 0 || k > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(k));
    }
    marginal.validate()?;
    let eval = kernel.eval_fn();

    let (theta, theta_se, mut rho, source) = if let Some(p) = kernel.analytic_projections(marginal)
    {
        (p.theta, 0.0, p.rho, ProjectionSource::Analytic)
    } else if k == 1 {
        let theta = marginal.expect(|x| eval(&[x]));
        (theta, 0.0, Vec::new(), ProjectionSource::Quadrature)
    } else {
        monte_carlo_projections(kernel, marginal, options)?
    };
    if let Some(tol) = options.theta_se_tolerance {
        if theta_se > tol {
            return Err(Error::MonteCarloTolerance { se: theta_se, tol });
        }
    }
    rho.push(eval);
    let h = build_components(theta, &rho);
    Ok(HoeffdingDecomposition {
        kernel: kernel.clone(),
        marginal: marginal.clone(),
        theta,
        theta_se,
        rho,
        h,
        source,
    })
}

type Projections = (f64, f64, Vec<KernelFn>, ProjectionSource);

fn monte_carlo_projections(
    kernel: &SymmetricKernel,
    marginal: &Marginal,
    options: &DecomposeOptions,
) -> Result<Projections> {
    let k = kernel.degree();
    let draws = options.mc_draws;
    if draws < MIN_MC_DRAWS {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo projections need at least {MIN_MC_DRAWS} draws, got {draws}"
        )));
    }
    let mut rng = options.seed.rng();
    let table: Arc<Vec<f64>> =
        Arc::new((0..draws * k).map(|_| marginal.sample(&mut rng)).collect());

    let eval = kernel.eval_fn();
    let values: Vec<f64> = table.chunks_exact(k).map(|row| eval(row)).collect();
    let (theta, theta_se) = mean_and_se(&values);

    let rho = (1..k)
        .map(|c| {
            let (table, eval) = (Arc::clone(&table), kernel.eval_fn());
            let f: KernelFn = Arc::new(move |args: &[f64]| {
                let mut buf = [0.0; MAX_DEGREE];
                buf[..c].copy_from_slice(args);
                let total: f64 = table
                    .chunks_exact(k)
                    .map(|row| {
                        buf[c..k].copy_from_slice(&row[..k - c]);
                        eval(&buf[..k])
                    })
                    .sum();
                total / draws as f64
            });
            f
        })
        .collect();
    Ok((theta, theta_se, rho, ProjectionSource::MonteCarlo { draws }))
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl HoeffdingDecomposition {
    pub fn kernel(&self) -> &SymmetricKernel {
        &self.kernel
    }

    pub fn marginal(&self) -> &Marginal {
        &self.marginal
    }

    pub fn degree(&self) -> usize {
        self.kernel.degree()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_se(&self) -> f64 {
        self.theta_se
    }

    pub fn source(&self) -> ProjectionSource {
        self.source
    }

    /// `rho_c` for `1 <= c <= k`.
    pub fn rho(&self, c: usize) -> &KernelFn {
        &self.rho[c - 1]
    }

    /// `h^(c)` for `1 <= c <= k`.
    pub fn h(&self, c: usize) -> &KernelFn {
        &self.h[c - 1]
    }

    pub fn rho1(&self) -> ScalarFn {
        let rho1 = Arc::clone(&self.rho[0]);
        Arc::new(move |x| rho1(&[x]))
    }

    /// Monte Carlo estimate of `E h^(c)(fixed.., X)` with its standard error.
    /// For `c >= 2` the component is degenerate and the mean should vanish.
    pub fn degeneracy_check(
        &self,
        c: usize,
        fixed: &[f64],
        draws: usize,
        seed: SeedSpec,
    ) -> Result<(f64, f64)> {
        if c < 1 || c > self.degree() || fixed.len() + 1 != c {
            return Err(Error::InvalidParameter(format!(
                "degeneracy check of h^({c}) needs {} fixed arguments",
                c.saturating_sub(1)
            )));
        }
        let mut rng = seed.rng();
        let h = self.h(c);
        let mut args = [0.0; MAX_DEGREE];
        args[..c - 1].copy_from_slice(fixed);
        let values: Vec<f64> = (0..draws)
            .map(|_| {
                args[c - 1] = self.marginal.sample(&mut rng);
                h(&args[..c])
            })
            .collect();
        Ok(mean_and_se(&values))
    }
}

/// `H_n^(j)`: the U-statistic of degree `j` with kernel `h^(j)`.
pub fn empirical_component(
    decomp: &HoeffdingDecomposition,
    sample: &[f64],
    j: usize,
) -> Result<f64> {
    if j == 0 || j > decomp.degree() {
        return Err(Error::InvalidParameter(format!(
            "component index {j} outside 1..={}",
            decomp.degree()
        )));
    }
    if sample.len() < j {
        return Err(Error::SampleTooSmall {
            n: sample.len(),
            degree: j,
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    subset_mean(&sorted, j, &**decomp.h(j))
}

/// `|U_n - theta - sum_j C(k, j) H_n^(j)|`.
pub fn reconstruction_check(decomp: &HoeffdingDecomposition, sample: &[f64]) -> Result<f64> {
    let k = decomp.degree();
    let u = u_statistic(sample, decomp.kernel())?.value;
    let mut rebuilt = decomp.theta();
    for j in 1..=k {
        rebuilt += binomial(k, j) * empirical_component(decomp, sample, j)?;
    }
    Ok((u - rebuilt).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceMethod {
    /// Exact up to quadrature error: Gaussian (possibly transformed) process.
    Quadrature,
    /// i.i.d. process, lag covariances are zero.
    Independent,
    Simulation {
        steps: usize,
    },
}

/// Truncated long-run variance of `rho_1(X_t)`:
/// `sigma_U^2 = sigma_1^2 + 2 sum_{j>=1} sigma_{1j}^2` with
/// `sigma_{1j}^2 = Cov(rho_1(X_1), rho_1(X_{1+j}))` (lag `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticVariance {
    pub sigma1_sq: f64,
    /// Lag `j` covariance at index `j - 1`.
    pub sigma1j_sq: Vec<f64>,
    pub sigma_u_sq: f64,
    pub truncation_lag: usize,
    /// Geometric extrapolation of the lags beyond `truncation_lag`, already
    /// included (doubled) in `sigma_u_sq`.
    pub tail_estimate: f64,
    /// Bound on the absolute tail sum; infinite when no decay rate fits.
    pub tail_bound: f64,
    /// Fitted ratio of successive covariances.
    pub decay_rate: Option<f64>,
    pub method: VarianceMethod,
}

impl AsymptoticVariance {
    pub fn sigma_u(&self) -> f64 {
        self.sigma_u_sq.sqrt()
    }
}

pub const DEFAULT_MAX_LAG: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    pub steps: usize,
    pub seed: SeedSpec,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            steps: 2_000_000,
            seed: SeedSpec::new(0x5EED, 0),
        }
    }
}

pub fn asymptotic_variance(
    rho1: &ScalarFn,
    process: &ProcessSpec,
    max_lag: usize,
) -> Result<AsymptoticVariance> {
    asymptotic_variance_with(rho1, process, max_lag, &SimulationOptions::default())
}

pub fn asymptotic_variance_with(
    rho1: &ScalarFn,
    process: &ProcessSpec,
    max_lag: usize,
    sim: &SimulationOptions,
) -> Result<AsymptoticVariance> {
    process.validate()?;
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    let range = process.dependence_range();
    let (sigma1_sq, covs, method) = if let Some(view) = process.gaussian_view() {
        if view.var == 0.0 {
            return Err(Error::DegenerateVariance(0.0));
        }
        let rule = GaussHermite::standard();
        let t = &view.transform;
        let g = |x: f64| rho1(t(x));
        let sigma1_sq = rule.bivariate_cov(view.mean, view.var, 1.0, g, g);
        let covs = (1..=max_lag)
            .map(|lag| match range {
                Some(r) if lag > r => 0.0,
                _ => rule.bivariate_cov(view.mean, view.var, view.corr(lag), g, g),
            })
            .collect();
        (sigma1_sq, covs, VarianceMethod::Quadrature)
    } else if let (true, Some(m)) = (process.is_iid(), process.marginal()) {
        let mean = m.expect(|x| rho1(x));
        let sigma1_sq = m.expect(|x| (rho1(x) - mean).powi(2));
        (sigma1_sq, vec![0.0; max_lag], VarianceMethod::Independent)
    } else {
        let path = generate(process, sim.steps, sim.seed)?;
        let series: Vec<f64> = path.iter().map(|&x| rho1(x)).collect();
        let covs = (1..=max_lag)
            .map(|lag| match range {
                Some(r) if lag > r => 0.0,
                _ => sample_autocov(&series, lag),
            })
            .collect();
        (
            sample_autocov(&series, 0),
            covs,
            VarianceMethod::Simulation { steps: sim.steps },
        )
    };

    let exhausted = range.is_some_and(|r| r <= max_lag);
    let (tail_estimate, tail_bound, decay_rate) = if exhausted {
        (0.0, 0.0, None)
    } else {
        geometric_tail(&covs, sigma1_sq)
    };
    let partial: f64 = covs.iter().sum();
    let sigma_u_sq = sigma1_sq + 2.0 * partial + 2.0 * tail_estimate;
    let scale = sigma1_sq.abs() + 2.0 * covs.iter().map(|c: &f64| c.abs()).sum::<f64>();
    if !(sigma_u_sq > 1e-12 * scale) || sigma_u_sq <= 0.0 {
        return Err(Error::DegenerateVariance(sigma_u_sq));
    }
    Ok(AsymptoticVariance {
        sigma1_sq,
        sigma1j_sq: covs,
        sigma_u_sq,
        truncation_lag: max_lag,
        tail_estimate,
        tail_bound,
        decay_rate,
        method,
    })
}

/// Least-squares fit of `log|c_j|` on `j` over the covariances that stand
/// clear of quadrature/rounding noise, extrapolated geometrically past the
/// truncation lag.
fn geometric_tail(covs: &[f64], sigma1_sq: f64) -> (f64, f64, Option<f64>) {
    let floor = 1e-10 * sigma1_sq.abs();
    let points: Vec<(f64, f64)> = covs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > floor && c.abs() > f64::MIN_POSITIVE)
        .map(|(i, c)| ((i + 1) as f64, c.abs().ln()))
        .collect();
    let Some(&(last_lag, _)) = points.last() else {
        return (0.0, 0.0, None);
    };
    if points.len() < 2 {
        return (0.0, f64::INFINITY, None);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let rate = (sxy / sxx).exp();
    if !(rate < 1.0) {
        return (0.0, f64::INFINITY, Some(rate));
    }
    let anchor = covs[last_lag as usize - 1];
    let steps = covs.len() as f64 - last_lag;
    let tail = anchor * rate.powf(steps) * rate / (1.0 - rate);
    (tail, tail.abs(), Some(rate))
}

/// JSON-friendly summary of a decomposition and its asymptotic variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub kernel_id: String,
    pub degree: usize,
    pub theta: f64,
    pub theta_se: f64,
    pub source: ProjectionSource,
    pub sigma1_sq: f64,
    pub sigma1j_sq: Vec<f64>,
    pub sigma_u_sq: f64,
    pub truncation_lag: usize,
    pub tail_bound: f64,
}

impl DecompositionRecord {
    pub fn new(decomp: &HoeffdingDecomposition, var: &AsymptoticVariance) -> Self {
        Self {
            kernel_id: decomp.kernel().id().to_string(),
            degree: decomp.degree(),
            theta: decomp.theta(),
            theta_se: decomp.theta_se(),
            source: decomp.source(),
            sigma1_sq: var.sigma1_sq,
            sigma1j_sq: var.sigma1j_sq.clone(),
            sigma_u_sq: var.sigma_u_sq,
            truncation_lag: var.truncation_lag,
            tail_bound: var.tail_bound,
        }
    }
}
