//! The acceptance battery: nine criteria, each reporting a measured value
//! against its target and tolerance.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::assocgen::{generate, ProcessSpec, SeedSpec, Transform};
use crate::error::{Error, Result};
use crate::harness::experiment::{
    block_sweep, fluctuation_experiment, run_clt_experiment, ExperimentConfig,
};
use crate::harness::wiener::{wiener_constant_exact, wiener_constant_mc, DEFAULT_GRID_STEP};
use crate::hoeffding::{decompose, reconstruction_check, DecomposeOptions};
use crate::kernels::{check_domination, default_grid, BuiltinKernel, Marginal, SymmetricKernel};
use crate::longrun::{block_estimator, sigma_u_plugin, BlockConfig};
use crate::ustat::{u_statistic, u_statistic_fast};

pub const CRITERION_IDS: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub seed: u64,
    /// Forces the `sigma_U` used to standardize the CLT experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_u_override: Option<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

fn default_replications() -> usize {
    2000
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            sigma_u_override: None,
            replications: default_replications(),
        }
    }
}

impl AcceptanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidParameter(format!(
                "replications must be at least 2, got {}",
                self.replications
            )));
        }
        Ok(())
    }

    fn seed(&self, criterion: u64) -> SeedSpec {
        SeedSpec::new(self.seed, criterion << 48)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Reference value when the criterion compares against a single one.
    pub target: Option<f64>,
    pub tolerance: String,
    pub detail: String,
    pub elapsed_secs: f64,
}

fn number(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let target = self
            .target
            .map(|t| format!(", target {}", number(t)))
            .unwrap_or_default();
        format!(
            "criterion {} [{}] {}: measured {}{} ({}); {} [{:.1}s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            number(self.measured),
            target,
            self.tolerance,
            self.detail,
            self.elapsed_secs
        )
    }

    fn failed(id: u8, name: &str, err: &Error, elapsed_secs: f64) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed: false,
            measured: f64::NAN,
            target: None,
            tolerance: "n/a".into(),
            detail: format!("error: {err}"),
            elapsed_secs,
        }
    }
}

struct Measured {
    passed: bool,
    measured: f64,
    target: Option<f64>,
    tolerance: String,
    detail: String,
}

const NAMES: [&str; 9] = [
    "Hoeffding reconstruction",
    "degeneracy of h^(2)",
    "variance asymptotics",
    "CLT KS distance",
    "block estimator consistency",
    "non-monotone plug-in sigma_U",
    "block fluctuation variance",
    "Brownian covariance constant",
    "structural invariants",
];

pub fn run_criterion(cfg: &AcceptanceConfig, id: u8) -> Result<CriterionOutcome> {
    cfg.validate()?;
    let name = NAMES
        .get(usize::from(id).wrapping_sub(1))
        .ok_or_else(|| Error::InvalidParameter(format!("unknown criterion {id}")))?;
    let start = Instant::now();
    let result = match id {
        1 => criterion_1(cfg),
        2 => criterion_2(cfg),
        3 => criterion_3(cfg),
        4 => criterion_4(cfg),
        5 => criterion_5(cfg),
        6 => criterion_6(cfg),
        7 => criterion_7(cfg),
        8 => criterion_8(cfg),
        _ => criterion_9(cfg),
    };
    let elapsed_secs = start.elapsed().as_secs_f64();
    Ok(match result {
        Ok(m) => CriterionOutcome {
            id,
            name: name.to_string(),
            passed: m.passed,
            measured: m.measured,
            target: m.target,
            tolerance: m.tolerance,
            detail: m.detail,
            elapsed_secs,
        },
        Err(e) => CriterionOutcome::failed(id, name, &e, elapsed_secs),
    })
}

pub fn run(cfg: &AcceptanceConfig, ids: &[u8]) -> Result<Vec<CriterionOutcome>> {
    ids.iter().map(|&id| run_criterion(cfg, id)).collect()
}

pub fn summary_table(outcomes: &[CriterionOutcome]) -> String {
    let mut out = String::from("id,name,passed,measured,target,tolerance,elapsed_secs\n");
    for o in outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},\"{}\",{:.3}",
            o.id,
            o.name,
            o.passed,
            o.measured,
            o.target.map(|t| t.to_string()).unwrap_or_default(),
            o.tolerance,
            o.elapsed_secs
        );
    }
    out
}

fn rel_err(measured: f64, target: f64) -> f64 {
    ((measured - target) / target).abs()
}

fn criterion_1(cfg: &AcceptanceConfig) -> Result<Measured> {
    let marginal = Marginal::Gaussian {
        mean: 0.5,
        var: 2.0,
    };
    let kernels = [
        SymmetricKernel::variance(),
        SymmetricKernel::squared_mean(),
        SymmetricKernel::third_moment(),
    ];
    let decomps: Vec<_> = kernels
        .iter()
        .map(|k| decompose(k, &marginal, &DecomposeOptions::default()))
        .collect::<Result<_>>()?;
    let mut rng = cfg.seed(1).rng();
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let n = rng.random_range(3..=200);
        let sample: Vec<f64> = (0..n).map(|_| marginal.sample(&mut rng)).collect();
        let d = &decomps[s % decomps.len()];
        worst = worst.max(reconstruction_check(d, &sample)?);
    }
    Ok(Measured {
        passed: worst <= 1e-10,
        measured: worst,
        target: None,
        tolerance: "<= 1e-10".into(),
        detail: "max |U_n - theta - sum C(k,j) H_n^(j)| over 100 samples, n <= 200".into(),
    })
}

fn criterion_2(cfg: &AcceptanceConfig) -> Result<Measured> {
    let marginal = Marginal::Gaussian {
        mean: 0.5,
        var: 2.0,
    };
    let draws = 1_000_000;
    let grid: Vec<f64> = (0..20).map(|i| -3.0 + 6.0 * i as f64 / 19.0).collect();
    let mut worst_z: f64 = 0.0;
    let mut detail = String::new();
    for (ki, kind) in [
        BuiltinKernel::Variance,
        BuiltinKernel::SquaredMean,
        BuiltinKernel::ThirdMoment,
    ]
    .into_iter()
    .enumerate()
    {
        let d = decompose(
            &SymmetricKernel::builtin(kind),
            &marginal,
            &DecomposeOptions::default(),
        )?;
        let mut kernel_worst: f64 = 0.0;
        for (gi, &y) in grid.iter().enumerate() {
            let seed = cfg.seed(2).offset((ki * 100 + gi) as u64);
            let (mean, se) = d.degeneracy_check(2, &[y], draws, seed)?;
            let z = if se > 0.0 {
                mean.abs() / se
            } else if mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            kernel_worst = kernel_worst.max(z);
        }
        worst_z = worst_z.max(kernel_worst);
        let _ = write!(detail, "{}: max |z| {:.2}; ", kind.id(), kernel_worst);
    }
    Ok(Measured {
        passed: worst_z <= 4.0,
        measured: worst_z,
        target: None,
        tolerance: "|mean| <= 4 SE".into(),
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

fn criterion_3(cfg: &AcceptanceConfig) -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (i, phi) in [0.0f64, 0.5].into_iter().enumerate() {
        let config = ExperimentConfig::new(
            ProcessSpec::gaussian_ar1_unit(phi),
            "variance",
            vec![2000],
            cfg.replications,
            cfg.seed(3).offset((i as u64) << 40),
        );
        let res = run_clt_experiment(&config)?;
        let target = 0.5 * (1.0 + phi * phi) / (1.0 - phi * phi);
        let measured = res.per_n[0].n_var_u / 4.0;
        let e = rel_err(measured, target);
        worst = worst.max(e);
        let _ = write!(
            detail,
            "phi={phi}: n Var/4 = {measured:.4} vs {target:.4}; "
        );
    }
    Ok(Measured {
        passed: worst <= 0.10,
        measured: worst,
        target: None,
        tolerance: "relative error <= 10%".into(),
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

/// The four CLT cases of criterion 4.
pub fn clt_cases(cfg: &AcceptanceConfig) -> Vec<(&'static str, ExperimentConfig)> {
    let phi: f64 = 0.3;
    let ar = ProcessSpec::gaussian_ar1_unit(phi);
    let ar_mean_one = ProcessSpec::GaussianAr1 {
        phi,
        sigma: (1.0 - phi * phi).sqrt(),
        mean: 1.0,
    };
    let cases = [
        (
            "variance iid",
            ProcessSpec::iid_standard_normal(),
            "variance",
        ),
        ("variance ar1", ar, "variance"),
        ("squared_mean ar1", ar_mean_one, "squared_mean"),
        (
            "third_moment iid",
            ProcessSpec::iid_standard_normal(),
            "third_moment",
        ),
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (label, process, kernel))| {
            let mut c = ExperimentConfig::new(
                process,
                kernel,
                vec![2000],
                cfg.replications,
                cfg.seed(4).offset((i as u64) << 40),
            );
            c.sigma_u_override = cfg.sigma_u_override;
            (label, c)
        })
        .collect()
}

fn criterion_4(cfg: &AcceptanceConfig) -> Result<Measured> {
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (label, c) in clt_cases(cfg) {
        let res = run_clt_experiment(&c)?;
        let ks = res.max_ks();
        worst = worst.max(ks);
        let _ = write!(detail, "{label}: {ks:.4}; ");
    }
    Ok(Measured {
        passed: worst <= 0.06,
        measured: worst,
        target: None,
        tolerance: "KS <= 0.06".into(),
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

fn criterion_5(cfg: &AcceptanceConfig) -> Result<Measured> {
    let n = 100_000;
    let block = BlockConfig::default();
    let root = (2.0 / PI).sqrt();
    let phi: f64 = 0.5;
    let cases = [
        ("iid", ProcessSpec::iid_standard_normal(), root, 0.05),
        (
            "ar1 phi=0.5",
            ProcessSpec::transformed(ProcessSpec::gaussian_ar1_unit(phi), Transform::Identity),
            ((1.0 + phi) / (1.0 - phi)).sqrt() * root,
            0.10,
        ),
    ];
    let mut passed = true;
    let mut worst_ratio: f64 = 0.0;
    let mut detail = String::new();
    for (i, (label, process, target, tol)) in cases.into_iter().enumerate() {
        let pts = block_sweep(
            &process,
            &[n],
            100,
            &block,
            cfg.seed(5).offset((i as u64) << 40),
            None,
        )?;
        let e = rel_err(pts[0].mean_b_n, target);
        passed &= e <= tol;
        worst_ratio = worst_ratio.max(e / tol);
        let _ = write!(
            detail,
            "{label}: mean b_n {:.5} vs {target:.5} (err {:.2}%); ",
            pts[0].mean_b_n,
            100.0 * e
        );
    }
    Ok(Measured {
        passed,
        measured: worst_ratio,
        target: None,
        tolerance: "relative error <= 5% iid, 10% ar1 (measured is worst error/tolerance)".into(),
        detail: detail.trim_end_matches("; ").to_string(),
    })
}

fn criterion_6(cfg: &AcceptanceConfig) -> Result<Measured> {
    let phi: f64 = 0.5;
    let process = ProcessSpec::gaussian_ar1_unit(phi);
    let marginal = process.marginal().expect("AR(1) has a Gaussian marginal");
    let kernel = SymmetricKernel::variance();
    let target = 0.5 * (1.0 + phi * phi) / (1.0 - phi * phi);
    let reps = 20;
    let block = BlockConfig::default();
    let mut analytic = 0.0;
    let mut empirical = 0.0;
    for r in 0..reps {
        let sample = generate(&process, 100_000, cfg.seed(6).offset(r))?;
        analytic += sigma_u_plugin(&sample, &kernel, &block, Some(&marginal))?
            .sigma_f_hat
            .powi(2);
        empirical += sigma_u_plugin(&sample, &kernel, &block, None)?
            .sigma_f_hat
            .powi(2);
    }
    analytic /= reps as f64;
    empirical /= reps as f64;
    let worst = rel_err(analytic, target).max(rel_err(empirical, target));
    Ok(Measured {
        passed: worst <= 0.10,
        measured: worst,
        target: None,
        tolerance: "relative error <= 10%".into(),
        detail: format!(
            "mean sigma_f_hat^2 over {reps} runs: analytic rho_1 {analytic:.4}, leave-one-out {empirical:.4}, target {target:.4}"
        ),
    })
}

fn criterion_7(cfg: &AcceptanceConfig) -> Result<Measured> {
    let res = fluctuation_experiment(
        &ProcessSpec::iid_standard_normal(),
        100_000,
        500,
        &BlockConfig::default(),
        cfg.seed(7),
    )?;
    let target = (3.0 * PI - 8.0) / 4.0;
    Ok(Measured {
        passed: rel_err(res.variance, target) <= 0.25,
        measured: res.variance,
        target: Some(target),
        tolerance: "relative error <= 25%".into(),
        detail: format!("500 replications, n = {}, l = {}", res.n, res.ell),
    })
}

fn criterion_8(cfg: &AcceptanceConfig) -> Result<Measured> {
    let est = wiener_constant_mc(100_000, DEFAULT_GRID_STEP, cfg.seed(8))?;
    let target = wiener_constant_exact();
    Ok(Measured {
        passed: (est.value - target).abs() <= 0.005,
        measured: est.value,
        target: Some(target),
        tolerance: "+/- 0.005".into(),
        detail: format!(
            "100000 paths, grid step {}, MC SE {:.5}",
            est.grid_step, est.std_error
        ),
    })
}

fn structural_checks(cfg: &AcceptanceConfig) -> Result<Vec<(&'static str, bool)>> {
    let mut rng = cfg.seed(9).rng();
    let exp = Exp::new(1.0).expect("unit rate");
    let mut checks = Vec::new();

    let mut fast_ok = true;
    let mut perm_ok = true;
    let mut shift_ok = true;
    let mut scale_ok = true;
    for _ in 0..20 {
        let n = rng.random_range(4..=60);
        let sample: Vec<f64> = (0..n).map(|_| exp.sample(&mut rng)).collect();
        let mut shuffled = sample.clone();
        shuffled.shuffle(&mut rng);
        let c = rng.random_range(-5.0..5.0);
        let a = rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shifted: Vec<f64> = sample.iter().map(|x| x + c).collect();
        let scaled: Vec<f64> = sample.iter().map(|x| a * x).collect();
        for kind in BuiltinKernel::ALL {
            let kernel = SymmetricKernel::builtin(kind);
            let exact = u_statistic(&sample, &kernel)?.value;
            let fast = u_statistic_fast(&sample, kind.id())?.value;
            fast_ok &= rel_close(fast, exact, 1e-10);
            perm_ok &= u_statistic(&shuffled, &kernel)?.value.to_bits() == exact.to_bits();
            perm_ok &= u_statistic_fast(&shuffled, kind.id())?.value.to_bits() == fast.to_bits();
            let sh = u_statistic_fast(&shifted, kind.id())?.value;
            let sc = u_statistic_fast(&scaled, kind.id())?.value;
            let (shift_target, scale_target) = match kind {
                BuiltinKernel::Mean => (fast + c, a * fast),
                BuiltinKernel::Variance => (fast, a * a * fast),
                BuiltinKernel::ThirdMoment => (fast, a * a * a * fast),
                BuiltinKernel::SquaredMean => {
                    let mean = u_statistic_fast(&sample, "mean")?.value;
                    (fast + 2.0 * c * mean + c * c, a * a * fast)
                }
            };
            shift_ok &= abs_close(sh, shift_target, 1e-9);
            scale_ok &= abs_close(sc, scale_target, 1e-9);
        }
    }
    checks.push(("fast path equals enumeration", fast_ok));
    checks.push(("exact permutation invariance", perm_ok));
    checks.push(("shift laws", shift_ok));
    checks.push(("scale laws", scale_ok));

    let series = generate(
        &ProcessSpec::gaussian_ar1_unit(0.5),
        5000,
        cfg.seed(9).offset(1),
    )?;
    let block = BlockConfig::default();
    let b = block_estimator(&series, &block)?.b_n;
    let b_shift = block_estimator(&series.iter().map(|x| x + 3.5).collect::<Vec<_>>(), &block)?.b_n;
    let b_scale =
        block_estimator(&series.iter().map(|x| -2.5 * x).collect::<Vec<_>>(), &block)?.b_n;
    checks.push((
        "block estimator shift and scale",
        abs_close(b_shift, b, 1e-9) && abs_close(b_scale, 2.5 * b, 1e-9),
    ));

    let mut dom_ok = true;
    for marginal in [
        Marginal::standard_normal(),
        Marginal::Gaussian {
            mean: -1.5,
            var: 2.0,
        },
        Marginal::Uniform {
            low: -1.0,
            high: 2.0,
        },
    ] {
        let grid = default_grid(&marginal)?;
        for kind in BuiltinKernel::ALL {
            if let Some(pair) = SymmetricKernel::builtin(kind).rho1_domination(&marginal) {
                dom_ok &= check_domination(&pair, &grid)?;
            }
        }
    }
    let grid: Vec<f64> = (0..=2000)
        .map(|i| -6.0 + 12.0 * i as f64 / 2000.0)
        .collect();
    for t in [
        Transform::Identity,
        Transform::Cube,
        Transform::Clamp { bound: 1.0 },
        Transform::CenteredSquare {
            center: 0.3,
            offset: 1.0,
        },
    ] {
        dom_ok &= check_domination(&t.domination(), &grid)?;
    }
    checks.push(("domination grid checks", dom_ok));

    let spec = ProcessSpec::gaussian_ar1_unit(0.4);
    let s = SeedSpec::new(cfg.seed, 99);
    let same_series = generate(&spec, 10_000, s)? == generate(&spec, 10_000, s)?;
    let exp_cfg = ExperimentConfig::new(spec, "variance", vec![100, 200], 20, s);
    let same_experiment = run_clt_experiment(&exp_cfg)? == run_clt_experiment(&exp_cfg)?;
    checks.push(("bit-exact reproducibility", same_series && same_experiment));
    Ok(checks)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE) || a == b
}

fn abs_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn criterion_9(cfg: &AcceptanceConfig) -> Result<Measured> {
    let checks = structural_checks(cfg)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Ok(Measured {
        passed: failed.is_empty(),
        measured: failed.len() as f64,
        target: None,
        tolerance: "all checks pass".into(),
        detail: if failed.is_empty() {
            format!("{} checks passed", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    })
}
