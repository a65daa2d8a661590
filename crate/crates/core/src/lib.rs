//! Multi-objective mixed-integer optimization with NSGA-II and a
//! branch-and-bound hybrid that uses NSGA-II to bound every node.
//!
//! Modules, bottom-up:
//! - [`pareto`]: dominance, Pareto filtering, ideal points, the incumbent archive
//! - [`problems`]: benchmark problem definitions and registry
//! - [`nsga2`]: the NSGA-II engine
//! - [`bnb`]: branch-and-bound driven by NSGA-II bounding
//! - [`metrics`]: front quality indicators and the investment ratio
//! - [`oracle`]: reference fronts by enumeration, refinement and resampling
//! - [`harness`]: repeated seeded experiments, statistics, export

pub mod bnb;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nsga2;
pub mod oracle;
pub mod pareto;
pub mod problems;

pub use error::{Error, Result};
