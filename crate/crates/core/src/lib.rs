//! Profit model and optimizers for 5G network slices.
//!
//! A slice of size `s` with KPI vector `k` needs `r = s (A k) + b` resources,
//! costs `sum_j cost_j r_j` and earns `p min(s, c)`. On top of that profit
//! model the crate provides:
//!
//! * exact size optimization with dedicated resources, scalarized by objective
//!   sum or weighted sum, plus a brute-force grid oracle ([`orthogonal`]);
//! * resource sharing between slices, by exhaustive scheme enumeration, block
//!   coordinate descent, or a genetic Pareto explorer ([`multiplex`], [`ga`]);
//! * configuration-dependent KPIs solved by fixed-point iteration ([`closed_loop`]);
//! * time-varying demand and update-period selection ([`longterm`]);
//! * posted-price resource trading between operators ([`game`]).
//!
//! Scenarios are JSON files loaded through [`scenario`]; results are written
//! as CSV through [`report`].

pub mod closed_loop;
pub mod error;
pub mod ga;
pub mod game;
pub mod longterm;
pub mod model;
pub mod multiplex;
pub mod orthogonal;
pub mod report;
pub mod scenario;
mod sizing;

pub use error::{Error, Result};
pub use model::{Outcome, SharingMode, SliceSpec, VnfScheme};
pub use orthogonal::{SolveResult, Weights};
pub use scenario::{load_scenario, save_scenario, Scenario};
