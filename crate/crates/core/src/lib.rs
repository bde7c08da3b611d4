//! Placement of dynamic var sources by empirical controllability covariance.
//!
//! The crate is organised bottom-up:
//!
//! - [`netmodel`]: case ingestion, admittance matrix, Newton-Raphson power flow
//! - [`dynsim`]: fixed-step phasor simulation with generators, recovery loads and SVCs
//! - [`ecc`]: empirical covariances, analytic gramians, covariance store
//! - [`placement`]: max-det selection (exhaustive, greedy, swap-based direct search)
//! - [`vsi`]: voltage criteria, severity ranking and the sensitivity-index baseline
//! - [`screening`]: N-1 lists, FIDVR filtering, coverage and cost
//! - [`cli`]: the `varplace` command line front end

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dynsim;
pub mod ecc;
pub mod error;
pub mod fixtures;
pub mod netmodel;
pub mod placement;
pub mod screening;
pub mod vsi;

pub use error::{Error, Result};
