//! `ustat`: simulate associated series, estimate long-run variances, run
//! the acceptance battery, and write experiment reports.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use ustat_core::harness::acceptance::{run as run_acceptance, summary_table};
use ustat_core::harness::output::write_experiment;
use ustat_core::harness::run_clt_experiment;
use ustat_core::series_io::{read_series, write_json, write_series};
use ustat_core::{
    block_estimator, generate, sigma_u_plugin, BlockConfig, EllRule, LongRunEstimate,
    SymmetricKernel,
};

use config::{RunConfig, VerifySection};

const AUTOCOV_LAGS: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "ustat",
    version,
    about = "U-statistics over associated sequences"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set simulate.n=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed of the selected subcommand, applied after all overrides.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all output files.
    #[arg(
        long,
        env = "USTAT_OUT_DIR",
        default_value = "ustat-out",
        global = true
    )]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a series from `[simulate]`.
    Simulate,
    /// Block estimate of a series file.
    Estimate {
        #[arg(long)]
        input: Option<PathBuf>,
        /// `cube_root`, `log_square_capped` or `fixed(L)`.
        #[arg(long)]
        ell: Option<String>,
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Run the acceptance criteria; exits nonzero if any fails.
    Verify,
    /// Run the `[report]` experiment and write its tables.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_path: Option<&'a Path>,
    overrides: &'a [String],
    out_dir: &'a Path,
    resolved: serde_json::Value,
}

#[derive(Serialize)]
struct EstimateRecord {
    input: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<String>,
    #[serde(flatten)]
    estimate: LongRunEstimate,
}

fn write_manifest(cli: &Cli, resolved: serde_json::Value) -> Result<()> {
    let manifest = Manifest {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config_path: cli.config.as_deref(),
        overrides: &cli.overrides,
        out_dir: &cli.out_dir,
        resolved,
    };
    write_json(&cli.out_dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn resolve_input(out_dir: &Path, input: &Path) -> PathBuf {
    if input.is_absolute() || input.exists() {
        input.to_path_buf()
    } else {
        out_dir.join(input)
    }
}

fn simulate(cli: &Cli, cfg: RunConfig) -> Result<ExitCode> {
    let Some(mut sim) = cfg.simulate else {
        bail!("simulate needs a [simulate] section");
    };
    if let Some(seed) = cli.seed {
        sim.seed.seed = seed;
    }
    if sim.n == 0 {
        bail!("simulate.n must be positive");
    }
    let series = generate(&sim.process, sim.n, sim.seed)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let path = cli.out_dir.join(&sim.output);
    write_series(&path, &series)?;
    let autocov: Option<Vec<f64>> = (0..=AUTOCOV_LAGS)
        .map(|lag| sim.process.autocov(lag))
        .collect();
    let sidecar = json!({ "spec": sim.process, "seed": sim.seed, "n": sim.n, "autocov": autocov });
    write_json(&path.with_extension("json"), &sidecar)?;
    write_manifest(cli, json!({ "simulate": sim }))?;
    println!("wrote {} values to {}", sim.n, path.display());
    Ok(ExitCode::SUCCESS)
}

fn estimate(
    cli: &Cli,
    cfg: RunConfig,
    input: &Option<PathBuf>,
    ell: &Option<String>,
    kernel: &Option<String>,
) -> Result<ExitCode> {
    let mut section = cfg.estimate.unwrap_or_default();
    if let Some(i) = input {
        section.input = Some(i.clone());
    }
    if let Some(rule) = ell {
        section.ell = rule
            .parse::<EllRule>()
            .map_err(|e| anyhow::anyhow!("--ell {rule}: {e}"))?;
    }
    if let Some(k) = kernel {
        section.kernel = Some(k.clone());
    }
    let input = section
        .input
        .clone()
        .context("estimate needs an input series (--input or estimate.input)")?;
    let path = resolve_input(&cli.out_dir, &input);
    let series =
        read_series(&path).with_context(|| format!("reading series {}", path.display()))?;
    let block = BlockConfig::new(section.ell);
    let est = match &section.kernel {
        Some(id) => sigma_u_plugin(
            &series,
            &SymmetricKernel::from_id(id)?,
            &block,
            section.marginal.as_ref(),
        )?,
        None => block_estimator(&series, &block)?,
    };
    std::fs::create_dir_all(&cli.out_dir)?;
    let record = EstimateRecord {
        input: path,
        kernel: section.kernel.clone(),
        estimate: est,
    };
    write_json(&cli.out_dir.join("estimate.json"), &record)?;
    write_manifest(cli, json!({ "estimate": section }))?;
    println!("{}", serde_json::to_string(&record)?);
    Ok(ExitCode::SUCCESS)
}

fn verify(cli: &Cli, cfg: RunConfig) -> Result<ExitCode> {
    let mut section: VerifySection = cfg.verify.unwrap_or_default();
    if let Some(seed) = cli.seed {
        section.seed = seed;
    }
    let acceptance = section.acceptance()?;
    let outcomes = run_acceptance(&acceptance, &section.criteria)?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    std::fs::write(
        cli.out_dir.join("verify_summary.csv"),
        summary_table(&outcomes),
    )?;
    write_json(&cli.out_dir.join("verify.json"), &outcomes)?;
    write_manifest(cli, json!({ "verify": section }))?;
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({})", o.id, o.name))
        .collect();
    if failed.is_empty() {
        println!("all {} criteria passed", outcomes.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed criteria: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn report(cli: &Cli, cfg: RunConfig) -> Result<ExitCode> {
    let Some(mut exp) = cfg.report else {
        bail!("report needs a [report] section");
    };
    if let Some(seed) = cli.seed {
        exp.seed.seed = seed;
    }
    let result = run_clt_experiment(&exp)?;
    let written = write_experiment(&cli.out_dir, &result)?;
    write_manifest(cli, json!({ "report": exp }))?;
    for row in &result.per_n {
        println!(
            "n={} ks={:.4} mean_z={:.4} n_var_u={:.4} mean_b_n={:.4}",
            row.n, row.ks_distance, row.mean_standardized, row.n_var_u, row.mean_b_n
        );
    }
    println!("wrote {} files to {}", written.len(), cli.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Simulate => simulate(cli, cfg),
        Command::Estimate { input, ell, kernel } => estimate(cli, cfg, input, ell, kernel),
        Command::Verify => verify(cli, cfg),
        Command::Report => report(cli, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
