//! File artifacts for experiments: per-replication CSV, summary JSON and
//! two-column plot files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::harness::experiment::{
    variance_decay_fit, ExperimentConfig, ExperimentResult, VarianceDecay,
};
use crate::series_io::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeSummary {
    pub n: usize,
    pub ell: usize,
    pub ks_distance: f64,
    pub mean_standardized: f64,
    pub var_standardized: f64,
    pub var_u: f64,
    pub n_var_u: f64,
    pub mean_b_n: f64,
    pub mean_sigma_f_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub theta: f64,
    pub sigma_u: f64,
    pub degree: usize,
    pub per_n: Vec<SampleSizeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_decay: Option<VarianceDecay>,
}

impl ExperimentSummary {
    pub fn from_result(result: &ExperimentResult) -> Self {
        Self {
            config: result.config.clone(),
            theta: result.theta,
            sigma_u: result.sigma_u,
            degree: result.degree,
            per_n: result
                .per_n
                .iter()
                .map(|r| SampleSizeSummary {
                    n: r.n,
                    ell: r.ell,
                    ks_distance: r.ks_distance,
                    mean_standardized: r.mean_standardized,
                    var_standardized: r.var_standardized,
                    var_u: r.var_u,
                    n_var_u: r.n_var_u,
                    mean_b_n: r.mean_b_n,
                    mean_sigma_f_hat: r.mean_sigma_f_hat,
                })
                .collect(),
            variance_decay: variance_decay_fit(result).ok(),
        }
    }
}

/// One row per replication: `replication,u_n,standardized,b_n`.
pub fn replications_csv(result: &ExperimentResult, index: usize) -> String {
    let row = &result.per_n[index];
    let mut out = String::from("replication,u_n,standardized,b_n\n");
    for (r, ((u, z), b)) in row
        .u_values
        .iter()
        .zip(&row.standardized)
        .zip(&row.b_n)
        .enumerate()
    {
        let _ = writeln!(out, "{r},{u},{z},{b}");
    }
    out
}

/// `theoretical_quantile sample_quantile` pairs at plotting positions
/// `(i - 0.5) / R`.
pub fn qq_pairs(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let r = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (normal.inverse_cdf((i as f64 + 0.5) / r), x))
        .collect()
}

pub fn two_column(pairs: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (a, b) in pairs {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

/// Writes `summary.json`, and per sample size `replications_n{n}.csv` and
/// `qq_n{n}.dat`, plus `bn_vs_n.dat`. Returns the written paths in order.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    write_json(&summary, &ExperimentSummary::from_result(result))?;
    written.push(summary);
    for (i, row) in result.per_n.iter().enumerate() {
        let csv = dir.join(format!("replications_n{}.csv", row.n));
        fs::write(&csv, replications_csv(result, i))?;
        written.push(csv);
        let qq = dir.join(format!("qq_n{}.dat", row.n));
        fs::write(&qq, two_column(&qq_pairs(&row.standardized)))?;
        written.push(qq);
    }
    let bn: Vec<(f64, f64)> = result
        .per_n
        .iter()
        .map(|r| (r.n as f64, r.mean_b_n))
        .collect();
    let bn_path = dir.join("bn_vs_n.dat");
    fs::write(&bn_path, two_column(&bn))?;
    written.push(bn_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assocgen::{ProcessSpec, SeedSpec};
    use crate::harness::experiment::run_clt_experiment;

    fn small() -> ExperimentResult {
        let c = ExperimentConfig::new(
            ProcessSpec::gaussian_ar1_unit(0.3),
            "variance",
            vec![50, 100, 200],
            20,
            SeedSpec::new(9, 1),
        );
        run_clt_experiment(&c).unwrap()
    }

    #[test]
    fn csv_has_one_row_per_replication() {
        let res = small();
        let csv = replications_csv(&res, 1);
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.starts_with("replication,u_n,standardized,b_n\n"));
    }

    #[test]
    fn qq_pairs_are_sorted() {
        let pairs = qq_pairs(&[3.0, -1.0, 0.5]);
        assert_eq!(
            pairs.iter().map(|p| p.1).collect::<Vec<_>>(),
            vec![-1.0, 0.5, 3.0]
        );
        assert!(pairs[1].0.abs() < 1e-12);
    }

    #[test]
    fn output_files_are_bit_identical_across_runs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let pa = write_experiment(a.path(), &small()).unwrap();
        let pb = write_experiment(b.path(), &small()).unwrap();
        assert_eq!(pa.len(), 8);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let summary: ExperimentSummary =
            serde_json::from_str(&fs::read_to_string(&pa[0]).unwrap()).unwrap();
        assert_eq!(summary.per_n.len(), 3);
        assert!(summary.variance_decay.is_some());
    }
}
