//! Replicated Monte Carlo experiments: standardized U-statistics, variance
//! decay, and block-estimator sweeps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assocgen::{generate, ProcessSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::harness::ks::ks_distance;
use crate::hoeffding::{asymptotic_variance, decompose, DecomposeOptions, DEFAULT_MAX_LAG};
use crate::kernels::{ScalarFn, SymmetricKernel};
use crate::longrun::{block_abs_mean, block_estimator, BlockConfig};
use crate::summation::pairwise_sum;
use crate::ustat::{fast_value, u_statistic};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    /// Divide by the `sigma_U` of the Hoeffding oracle.
    #[default]
    Oracle,
    /// Divide by the per-replication block estimate of `sigma_U`.
    Plugin,
}

fn default_max_lag() -> usize {
    DEFAULT_MAX_LAG
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub kernel_id: String,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: SeedSpec,
    #[serde(default)]
    pub block: BlockConfig,
    #[serde(default)]
    pub standardization: Standardization,
    /// Replaces the oracle `sigma_U`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_u_override: Option<f64>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

impl ExperimentConfig {
    pub fn new(
        process: ProcessSpec,
        kernel_id: &str,
        n_grid: Vec<usize>,
        replications: usize,
        seed: SeedSpec,
    ) -> Self {
        Self {
            process,
            kernel_id: kernel_id.to_string(),
            n_grid,
            replications,
            seed,
            block: BlockConfig::default(),
            standardization: Standardization::Oracle,
            sigma_u_override: None,
            max_lag: DEFAULT_MAX_LAG,
        }
    }

    pub fn validate(&self) -> Result<SymmetricKernel> {
        if self.replications < 2 {
            return Err(Error::InvalidParameter(format!(
                "replications must be at least 2, got {}",
                self.replications
            )));
        }
        if self.n_grid.is_empty() {
            return Err(Error::InvalidParameter("n_grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "n_grid must be strictly increasing".into(),
            ));
        }
        if let Some(s) = self.sigma_u_override {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::DegenerateVariance(s));
            }
        }
        self.process.validate()?;
        let kernel = SymmetricKernel::from_id(&self.kernel_id)?;
        let smallest = self.n_grid[0];
        if smallest < kernel.degree().max(2) {
            return Err(Error::SampleTooSmall {
                n: smallest,
                degree: kernel.degree().max(2),
            });
        }
        for &n in &self.n_grid {
            self.block.ell(n)?;
        }
        Ok(kernel)
    }
}

/// `theta`, `rho_1` and `sigma_U` of a kernel over a process.
#[derive(Clone)]
pub struct Oracle {
    pub theta: f64,
    pub rho1: ScalarFn,
    pub sigma_u: f64,
    pub degree: usize,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("theta", &self.theta)
            .field("sigma_u", &self.sigma_u)
            .field("degree", &self.degree)
            .finish()
    }
}

/// Builds the oracle from the marginal law when it has a closed form, or
/// from quadrature over the Gaussian base for degree-1 kernels over
/// transformed processes.
pub fn oracle(kernel: &SymmetricKernel, process: &ProcessSpec, max_lag: usize) -> Result<Oracle> {
    let (theta, rho1) = match process.marginal() {
        Some(marginal) => {
            let decomp = decompose(kernel, &marginal, &DecomposeOptions::default())?;
            (decomp.theta(), decomp.rho1())
        }
        None if kernel.degree() == 1 => {
            let eval = kernel.eval_fn();
            let theta = process
                .expect(|x| eval(&[x]))
                .ok_or_else(|| Error::Unsupported(format!("no marginal law for {:?}", process)))?;
            let rho1: ScalarFn = std::sync::Arc::new(move |x| eval(&[x]));
            (theta, rho1)
        }
        None => {
            return Err(Error::Unsupported(format!(
                "kernel of degree {} needs a closed-form marginal",
                kernel.degree()
            )))
        }
    };
    let var = asymptotic_variance(&rho1, process, max_lag)?;
    Ok(Oracle {
        theta,
        rho1,
        sigma_u: var.sigma_u(),
        degree: kernel.degree(),
    })
}

/// Everything recorded about one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    pub n: usize,
    pub ell: usize,
    pub ks_distance: f64,
    pub mean_standardized: f64,
    pub var_standardized: f64,
    pub var_u: f64,
    /// `n Var(U_n)`, which tends to `k^2 sigma_U^2`.
    pub n_var_u: f64,
    pub mean_b_n: f64,
    pub mean_sigma_f_hat: f64,
    pub u_values: Vec<f64>,
    pub standardized: Vec<f64>,
    pub b_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub theta: f64,
    pub sigma_u: f64,
    pub degree: usize,
    pub per_n: Vec<SampleSizeResult>,
}

impl ExperimentResult {
    pub fn max_ks(&self) -> f64 {
        self.per_n.iter().map(|r| r.ks_distance).fold(0.0, f64::max)
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = pairwise_sum(values) / r;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, pairwise_sum(&dev) / (r - 1.0))
}

/// Stream used for replication `r` at grid position `ni`.
fn replication_seed(seed: SeedSpec, ni: usize, r: usize) -> SeedSpec {
    seed.offset(((ni as u64) << 32) | r as u64)
}

struct Replicate {
    u: f64,
    b_n: f64,
    sigma_f_hat: f64,
}

/// Runs `replications` independent series per sample size and reports the
/// standardized statistics `sqrt(n) (U_n - theta) / (k sigma_U)` together
/// with their KS distance to the standard normal.
pub fn run_clt_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let kernel = config.validate()?;
    let mut oracle = oracle(&kernel, &config.process, config.max_lag)?;
    if let Some(s) = config.sigma_u_override {
        oracle.sigma_u = s;
    }
    let k = kernel.degree() as f64;
    let builtin = kernel.builtin_kind();

    let mut per_n = Vec::with_capacity(config.n_grid.len());
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let ell = config.block.ell(n)?;
        let reps: Vec<Replicate> = (0..config.replications)
            .into_par_iter()
            .map(|r| -> Result<Replicate> {
                let series = generate(&config.process, n, replication_seed(config.seed, ni, r))?;
                let u = match builtin {
                    Some(kind) => fast_value(&series, kind)?,
                    None => u_statistic(&series, &kernel)?.value,
                };
                if !u.is_finite() {
                    return Err(Error::NonFinite { index: r, value: u });
                }
                let projected: Vec<f64> = series.iter().map(|&x| (oracle.rho1)(x)).collect();
                let est = block_estimator(&projected, &config.block)?;
                Ok(Replicate {
                    u,
                    b_n: est.b_n,
                    sigma_f_hat: est.sigma_f_hat,
                })
            })
            .collect::<Result<_>>()?;

        let u_values: Vec<f64> = reps.iter().map(|r| r.u).collect();
        let b_n: Vec<f64> = reps.iter().map(|r| r.b_n).collect();
        let sqrt_n = (n as f64).sqrt();
        let standardized: Vec<f64> = reps
            .iter()
            .map(|r| {
                let scale = match config.standardization {
                    Standardization::Oracle => oracle.sigma_u,
                    Standardization::Plugin => r.sigma_f_hat,
                };
                sqrt_n * (r.u - oracle.theta) / (k * scale)
            })
            .collect();
        if let Some((i, &z)) = standardized
            .iter()
            .enumerate()
            .find(|(_, z)| !z.is_finite())
        {
            return Err(Error::NonFinite { index: i, value: z });
        }
        let ks = ks_distance(&standardized)?;
        let (mean_standardized, var_standardized) = mean_var(&standardized);
        let (_, var_u) = mean_var(&u_values);
        let sig: Vec<f64> = reps.iter().map(|r| r.sigma_f_hat).collect();
        per_n.push(SampleSizeResult {
            n,
            ell,
            ks_distance: ks,
            mean_standardized,
            var_standardized,
            var_u,
            n_var_u: n as f64 * var_u,
            mean_b_n: pairwise_sum(&b_n) / b_n.len() as f64,
            mean_sigma_f_hat: pairwise_sum(&sig) / sig.len() as f64,
            u_values,
            standardized,
            b_n,
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        theta: oracle.theta,
        sigma_u: oracle.sigma_u,
        degree: kernel.degree(),
        per_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecay {
    /// OLS slope of `log Var(U_n)` on `log n`.
    pub slope: f64,
    pub intercept: f64,
    /// Geometric mean of `n Var(U_n)` over the grid: the intercept of the
    /// fit with slope pinned at `-1`, an estimate of `k^2 sigma_U^2`.
    pub implied_k2_sigma_sq: f64,
}

pub fn variance_decay_fit(result: &ExperimentResult) -> Result<VarianceDecay> {
    if result.per_n.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "variance decay needs at least 3 sample sizes, got {}",
            result.per_n.len()
        )));
    }
    let pts: Vec<(f64, f64)> = result
        .per_n
        .iter()
        .map(|r| {
            if r.var_u > 0.0 {
                Ok(((r.n as f64).ln(), r.var_u.ln()))
            } else {
                Err(Error::DegenerateVariance(r.var_u))
            }
        })
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let implied = (pts.iter().map(|(x, y)| x + y).sum::<f64>() / m).exp();
    Ok(VarianceDecay {
        slope,
        intercept: my - slope * mx,
        implied_k2_sigma_sq: implied,
    })
}

/// Replicated `B_n` for a process observed directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSweepPoint {
    pub n: usize,
    pub ell: usize,
    pub mean_b_n: f64,
    pub mean_sigma_f_hat: f64,
    /// Mean of `|sigma_f_hat - sigma_f|` when a target is supplied.
    pub mean_abs_error: Option<f64>,
    pub b_n: Vec<f64>,
}

pub fn block_sweep(
    process: &ProcessSpec,
    n_grid: &[usize],
    replications: usize,
    block: &BlockConfig,
    seed: SeedSpec,
    sigma_f: Option<f64>,
) -> Result<Vec<BlockSweepPoint>> {
    if replications < 1 {
        return Err(Error::InvalidParameter(
            "block sweep needs at least one replication".into(),
        ));
    }
    n_grid
        .iter()
        .enumerate()
        .map(|(ni, &n)| {
            let ell = block.ell(n)?;
            let b_n: Vec<f64> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let series = generate(process, n, replication_seed(seed, ni, r))?;
                    Ok(block_estimator(&series, block)?.b_n)
                })
                .collect::<Result<_>>()?;
            let root = (PI / 2.0).sqrt();
            let r = replications as f64;
            let mean_b_n = pairwise_sum(&b_n) / r;
            let mean_abs_error = sigma_f.map(|s| {
                let errs: Vec<f64> = b_n.iter().map(|b| (b * root - s).abs()).collect();
                pairwise_sum(&errs) / r
            });
            Ok(BlockSweepPoint {
                n,
                ell,
                mean_b_n,
                mean_sigma_f_hat: mean_b_n * root,
                mean_abs_error,
                b_n,
            })
        })
        .collect()
}

/// Scaled deviations `sqrt(n/l) sqrt(pi/2) (B_n - mean B_n)` across
/// replications. Their variance tends to `(3 pi - 8) / 4` times the
/// long-run variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    pub n: usize,
    pub ell: usize,
    pub deviations: Vec<f64>,
    pub variance: f64,
}

pub fn fluctuation_experiment(
    process: &ProcessSpec,
    n: usize,
    replications: usize,
    block: &BlockConfig,
    seed: SeedSpec,
) -> Result<FluctuationResult> {
    if replications < 2 {
        return Err(Error::InvalidParameter(format!(
            "replications must be at least 2, got {replications}"
        )));
    }
    let ell = block.ell(n)?;
    let mean = process
        .expect(|x| x)
        .ok_or_else(|| Error::Unsupported("fluctuation experiment needs a known mean".into()))?;
    let b: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let series = generate(process, n, seed.offset(r as u64))?;
            Ok(block_abs_mean(&series, ell, mean))
        })
        .collect::<Result<_>>()?;
    let (m, _) = mean_var(&b);
    let scale = (n as f64 / ell as f64).sqrt() * (PI / 2.0).sqrt();
    let deviations: Vec<f64> = b.iter().map(|v| scale * (v - m)).collect();
    let (_, variance) = mean_var(&deviations);
    Ok(FluctuationResult {
        n,
        ell,
        deviations,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assocgen::Transform;

    fn iid_variance(n_grid: Vec<usize>, reps: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            ProcessSpec::iid_standard_normal(),
            "variance",
            n_grid,
            reps,
            SeedSpec::new(11, 0),
        )
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(iid_variance(vec![100], 1).validate().is_err());
        assert!(iid_variance(vec![200, 100], 10).validate().is_err());
        assert!(iid_variance(vec![], 10).validate().is_err());
        assert!(iid_variance(vec![1], 10).validate().is_err());
        let mut c = iid_variance(vec![100], 10);
        c.sigma_u_override = Some(0.0);
        assert!(matches!(
            run_clt_experiment(&c),
            Err(Error::DegenerateVariance(_))
        ));
        let mut c = iid_variance(vec![100], 10);
        c.kernel_id = "kurtosis".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn point_mass_process_is_rejected() {
        let c = ExperimentConfig::new(
            ProcessSpec::Iid {
                marginal: crate::kernels::Marginal::Gaussian {
                    mean: 1.0,
                    var: 0.0,
                },
            },
            "variance",
            vec![50],
            10,
            SeedSpec::default(),
        );
        assert!(run_clt_experiment(&c).is_err());
    }

    #[test]
    fn standardized_mean_is_near_zero() {
        let reps = 1000;
        let res = run_clt_experiment(&iid_variance(vec![500], reps)).unwrap();
        let row = &res.per_n[0];
        assert!(
            row.mean_standardized.abs() < 4.0 / (reps as f64).sqrt(),
            "{}",
            row.mean_standardized
        );
        assert!(
            (row.var_standardized - 1.0).abs() < 0.15,
            "{}",
            row.var_standardized
        );
        assert!(row.ks_distance < 0.06, "{}", row.ks_distance);
        assert!(row.standardized.iter().all(|z| z.is_finite()));
    }

    #[test]
    fn identical_configs_give_identical_results() {
        let c = iid_variance(vec![100, 200], 50);
        let a = run_clt_experiment(&c).unwrap();
        let b = run_clt_experiment(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_decays_like_one_over_n() {
        let res = run_clt_experiment(&iid_variance(vec![250, 500, 1000, 2000], 1500)).unwrap();
        let fit = variance_decay_fit(&res).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.1, "{fit:?}");
        assert!((fit.implied_k2_sigma_sq / 2.0 - 1.0).abs() < 0.1, "{fit:?}");
        let short = run_clt_experiment(&iid_variance(vec![100, 200], 10)).unwrap();
        assert!(variance_decay_fit(&short).is_err());
    }

    #[test]
    fn ar1_variance_decay_matches_isserlis() {
        let mut c = iid_variance(vec![500, 1000, 2000], 1500);
        c.process = ProcessSpec::gaussian_ar1_unit(0.5);
        let res = run_clt_experiment(&c).unwrap();
        let fit = variance_decay_fit(&res).unwrap();
        assert!(
            (fit.implied_k2_sigma_sq / 4.0 / (5.0 / 6.0) - 1.0).abs() < 0.1,
            "{fit:?}"
        );
        assert!((res.sigma_u * res.sigma_u - 5.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn dominated_transform_passes_like_monotone_one() {
        let base = ProcessSpec::gaussian_ar1_unit(0.5);
        let transforms = [
            Transform::Identity,
            Transform::CenteredSquare {
                center: 0.0,
                offset: 1.0,
            },
        ];
        for t in transforms {
            let c = ExperimentConfig::new(
                ProcessSpec::transformed(base.clone(), t.clone()),
                "mean",
                vec![2000],
                1000,
                SeedSpec::new(5, 0),
            );
            let res = run_clt_experiment(&c).unwrap();
            assert!(
                res.per_n[0].ks_distance < 0.06,
                "{t:?}: {}",
                res.per_n[0].ks_distance
            );
        }
    }

    #[test]
    fn plugin_standardization_runs() {
        let mut c = iid_variance(vec![2000], 400);
        c.standardization = Standardization::Plugin;
        let res = run_clt_experiment(&c).unwrap();
        assert!(res.per_n[0].ks_distance < 0.1);
        assert!((res.per_n[0].mean_sigma_f_hat - 0.5f64.sqrt()).abs() < 0.07);
    }

    #[test]
    fn consistency_curve_shrinks() {
        let phi: f64 = 0.5;
        let sigma_f = ((1.0 + phi) / (1.0 - phi)).sqrt();
        let pts = block_sweep(
            &ProcessSpec::gaussian_ar1_unit(phi),
            &[1_000, 10_000, 100_000],
            50,
            &BlockConfig::default(),
            SeedSpec::new(21, 0),
            Some(sigma_f),
        )
        .unwrap();
        let errs: Vec<f64> = pts.iter().map(|p| p.mean_abs_error.unwrap()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn fluctuation_variance_small_run() {
        let res = fluctuation_experiment(
            &ProcessSpec::iid_standard_normal(),
            20_000,
            300,
            &BlockConfig::default(),
            SeedSpec::new(3, 0),
        )
        .unwrap();
        assert_eq!(res.deviations.len(), 300);
        let target = (3.0 * PI - 8.0) / 4.0;
        assert!(
            (res.variance / target - 1.0).abs() < 0.35,
            "{}",
            res.variance
        );
    }
}
