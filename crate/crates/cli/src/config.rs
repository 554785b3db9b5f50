//! TOML run configuration with `key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use ustat_core::harness::acceptance::{AcceptanceConfig, CRITERION_IDS};
use ustat_core::harness::ExperimentConfig;
use ustat_core::{EllRule, Marginal, ProcessSpec, SeedSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ExperimentConfig>,
}

fn default_series_file() -> PathBuf {
    PathBuf::from("series.txt")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub process: ProcessSpec,
    pub n: usize,
    #[serde(default)]
    pub seed: SeedSpec,
    /// Series file name inside the output directory.
    #[serde(default = "default_series_file")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub ell: EllRule,
    /// Estimate `sigma_U` of this kernel instead of the long-run standard
    /// deviation of the raw series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Known marginal law, enabling the analytic first projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<Marginal>,
}

fn all_criteria() -> Vec<u8> {
    CRITERION_IDS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub seed: u64,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_u_override: Option<f64>,
    #[serde(default = "all_criteria")]
    pub criteria: Vec<u8>,
}

impl Default for VerifySection {
    fn default() -> Self {
        let a = AcceptanceConfig::default();
        Self {
            seed: a.seed,
            replications: a.replications,
            sigma_u_override: None,
            criteria: all_criteria(),
        }
    }
}

impl VerifySection {
    pub fn acceptance(&self) -> Result<AcceptanceConfig> {
        let cfg = AcceptanceConfig {
            seed: self.seed,
            sigma_u_override: self.sigma_u_override,
            replications: self.replications,
        };
        cfg.validate()?;
        if let Some(bad) = self.criteria.iter().find(|id| !CRITERION_IDS.contains(id)) {
            bail!("unknown criterion {bad}");
        }
        Ok(cfg)
    }
}

/// Parses `key.path=value`. The value is read as a TOML literal, falling
/// back to a bare string.
pub fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{text}` is not key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        bail!("override key `{key}` has an empty segment");
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty override path");
    let mut table = root;
    for seg in parents {
        let entry = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            anyhow!(
                "override path `{}` crosses a non-table value at `{seg}`",
                path.join(".")
            )
        })?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

/// Reads `path` (or starts from an empty document), applies `overrides`
/// in order, and deserializes with unknown keys rejected.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str::<toml::Table>(&text)
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        let (key, value) = parse_override(o)?;
        apply_override(&mut table, &key, value)?;
    }
    toml::Value::Table(table)
        .try_into()
        .context("invalid configuration")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values_are_typed() {
        assert_eq!(parse_override("a.b=3").unwrap().1, toml::Value::Integer(3));
        assert_eq!(parse_override("x=0.5").unwrap().1, toml::Value::Float(0.5));
        assert_eq!(
            parse_override("k=variance").unwrap().1,
            toml::Value::String("variance".into())
        );
        assert_eq!(
            parse_override("e=\"fixed(46)\"").unwrap().1,
            toml::Value::String("fixed(46)".into())
        );
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn overrides_build_sections() {
        let cfg = load(
            None,
            &["verify.seed=5".into(), "verify.replications=100".into()],
        )
        .unwrap();
        let v = cfg.verify.unwrap();
        assert_eq!((v.seed, v.replications), (5, 100));
        assert_eq!(v.criteria, all_criteria());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(load(None, &["verify.sed=5".into()]).is_err());
        assert!(load(None, &["bogus.x=1".into()]).is_err());
    }

    #[test]
    fn zero_block_length_is_rejected() {
        assert!(load(None, &["estimate.ell=fixed(0)".into()]).is_err());
        let ok = load(None, &["estimate.ell=fixed(46)".into()]).unwrap();
        assert_eq!(ok.estimate.unwrap().ell, EllRule::Fixed(46));
    }

    #[test]
    fn single_replication_is_rejected() {
        let cfg = load(
            None,
            &["verify.seed=1".into(), "verify.replications=1".into()],
        )
        .unwrap();
        assert!(cfg.verify.unwrap().acceptance().is_err());
    }

    #[test]
    fn shipped_config_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/verify.toml");
        let cfg = load(Some(&path), &[]).unwrap();
        assert!(cfg.verify.is_some() && cfg.simulate.is_some() && cfg.report.is_some());
        cfg.report.unwrap().validate().unwrap();
    }
}
