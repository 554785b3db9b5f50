//! U-statistics over stationary positively associated sequences.
//!
//! The crate covers the whole pipeline used to study these statistics:
//!
//! - [`kernels`]: symmetric kernels, marginal laws, and domination pairs for
//!   non-monotone transforms.
//! - [`hoeffding`]: Hoeffding projections, empirical components and the
//!   asymptotic variance of `U_n`.
//! - [`ustat`]: exact U-statistic evaluation by subset enumeration, plus
//!   power-sum fast paths for the builtin kernels.
//! - [`assocgen`]: seeded generators for associated processes with known
//!   autocovariances.
//! - [`longrun`]: the overlapping-block estimator of the long-run standard
//!   deviation.
//! - [`harness`]: Monte Carlo experiments and the acceptance criteria.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assocgen;
pub mod error;
pub mod harness;
pub mod hoeffding;
pub mod kernels;
pub mod longrun;
pub mod quadrature;
pub mod series_io;
pub mod summation;
pub mod ustat;

pub use assocgen::{generate, ProcessSpec, SeedSpec, Transform};
pub use error::{Error, Result};
pub use hoeffding::{asymptotic_variance, decompose, AsymptoticVariance, HoeffdingDecomposition};
pub use kernels::{BuiltinKernel, DominationPair, Marginal, Moments, SymmetricKernel};
pub use longrun::{block_estimator, sigma_u_plugin, BlockConfig, EllRule, LongRunEstimate};
pub use ustat::{u_statistic, u_statistic_fast, UStatMethod, UStatResult};
