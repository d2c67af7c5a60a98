//! Subsistence versus culture under food spoilage.
//!
//! - [`env`]: the daily hunt/invest/culture decision process.
//! - [`mlp`]: small ReLU networks with manual backprop, Adam and clipping.
//! - [`a2c`]: advantage actor-critic training and evaluation.
//! - [`oracle`]: greedy witness schedules for the hunting/free-time orderings.
//! - [`stats`]: OLS with standard errors, correlations, histograms.
//! - [`sweep`]: seeded population experiment with CSV/JSON output.
//! - [`report`]: SVG figures and the regression table.
//! - [`cli`]: command-line entry point.

pub mod a2c;
pub mod env;
pub mod mlp;
pub mod oracle;
pub mod stats;
pub mod sweep;
pub mod cli;
pub mod report;
