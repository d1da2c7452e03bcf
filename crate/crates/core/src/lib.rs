//! Adaptive selection of prediction models and training windows for
//! period-indexed data whose distribution drifts over time.
//!
//! The crate is organised bottom-up:
//!
//! - [`panel`]: period-indexed observations, CSV ingestion, seeded train/validation splits.
//! - [`models`]: ridge, LASSO, elastic net and random-forest fits on trailing windows.
//! - [`gapscan`]: rolling-window performance-gap estimates with bias and variance proxies.
//! - [`duel`]: pairwise comparison with an adaptively chosen validation window.
//! - [`atoms`]: the random-pivot elimination tournament built on top of a duel.
//! - [`baselines`]: fixed validation window and fixed-window cross-validation selectors.
//! - [`synth`]: seeded drifting environments with known regression functions.
//! - [`metrics`]: out-of-sample R², sign-trading wealth and excess ratios.
//! - [`harness`]: walk-forward orchestration and report emission.
//!
//! Data-parallel loops (candidate fitting, duels within a tournament round,
//! per-seed runs) go through [`Execution`], which uses rayon when the
//! `parallel` feature is enabled and plain iteration otherwise.

pub mod atoms;
pub mod baselines;
pub mod duel;
pub mod error;
pub mod exec;
pub mod gapscan;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod panel;
pub mod plot;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
