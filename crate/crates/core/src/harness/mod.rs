//! Monte Carlo experiments reproducing the limit theorems, and the
//! acceptance battery built on them.

pub mod acceptance;
pub mod experiment;
pub mod ks;
pub mod output;
pub mod wiener;

pub use acceptance::{run as run_acceptance, AcceptanceConfig, CriterionOutcome, CRITERION_IDS};
pub use experiment::{
    block_sweep, fluctuation_experiment, run_clt_experiment, variance_decay_fit, ExperimentConfig,
    ExperimentResult, Standardization,
};
pub use ks::{ks_distance, standard_normal_cdf};
pub use wiener::{wiener_constant_exact, wiener_constant_mc, WienerEstimate, WienerPath};
