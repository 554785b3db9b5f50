//! End-to-end use of the public API: generate, decompose, compute the
//! asymptotic variance, and estimate it back from data.

use ustat_core::hoeffding::{reconstruction_check, DecomposeOptions};
use ustat_core::series_io::{read_series, write_series};
use ustat_core::{
    asymptotic_variance, decompose, generate, sigma_u_plugin, u_statistic, u_statistic_fast,
    BlockConfig, ProcessSpec, SeedSpec, SymmetricKernel, Transform,
};

#[test]
fn oracle_and_plugin_agree_on_ar1() {
    let phi: f64 = 0.4;
    let process = ProcessSpec::gaussian_ar1_unit(phi);
    let marginal = process.marginal().unwrap();
    let kernel = SymmetricKernel::variance();
    let decomp = decompose(&kernel, &marginal, &DecomposeOptions::default()).unwrap();
    let var = asymptotic_variance(&decomp.rho1(), &process, 200).unwrap();
    let closed = 0.5 * (1.0 + phi * phi) / (1.0 - phi * phi);
    assert!((var.sigma_u_sq - closed).abs() < 1e-8);

    let reps = 10;
    let mean_sq: f64 = (0..reps)
        .map(|r| {
            let series = generate(&process, 50_000, SeedSpec::new(17, r)).unwrap();
            sigma_u_plugin(&series, &kernel, &BlockConfig::default(), Some(&marginal))
                .unwrap()
                .sigma_f_hat
                .powi(2)
        })
        .sum::<f64>()
        / reps as f64;
    assert!(
        (mean_sq / closed - 1.0).abs() < 0.1,
        "{mean_sq} vs {closed}"
    );
}

#[test]
fn file_round_trip_preserves_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    let spec = ProcessSpec::transformed(ProcessSpec::gaussian_ar1_unit(0.3), Transform::Cube);
    let series = generate(&spec, 300, SeedSpec::new(2, 5)).unwrap();
    write_series(&path, &series).unwrap();
    let back = read_series(&path).unwrap();
    assert_eq!(back, series);
    for id in ["mean", "variance", "squared_mean", "third_moment"] {
        let a = u_statistic_fast(&series, id).unwrap().value;
        let b = u_statistic_fast(&back, id).unwrap().value;
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn reconstruction_with_custom_kernel() {
    let kernel = SymmetricKernel::custom("gini", 2, |a: &[f64]| (a[0] - a[1]).abs()).unwrap();
    let marginal = ustat_core::Marginal::Uniform {
        low: 0.0,
        high: 1.0,
    };
    let decomp = decompose(&kernel, &marginal, &DecomposeOptions::default()).unwrap();
    let sample = generate(&ProcessSpec::Iid { marginal }, 80, SeedSpec::new(1, 0)).unwrap();
    assert!(reconstruction_check(&decomp, &sample).unwrap() < 1e-10);
    let u = u_statistic(&sample, &kernel).unwrap().value;
    assert!((u - 1.0 / 3.0).abs() < 0.1);
}
