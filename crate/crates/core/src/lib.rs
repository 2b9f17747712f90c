//! Verification of food-security forecasts against later ground truth.
//!
//! The library turns published classification maps into a stable panel of
//! small analysis units ("atoms"), projects each publication's current and
//! projected classifications onto that panel, generates forecasts from the
//! published projections plus naive baselines, and scores everything with a
//! multi-class metric suite.
//!
//! Pipeline stages (each consuming only earlier outputs plus config):
//! catalog discovery -> atom construction -> panel build -> prediction
//! generation -> scoring and reports. See the `pipeline` module for the
//! orchestration and the `fsv` binary crate for the command surface.

pub mod atoms;
pub mod baselines;
pub mod config;
pub mod error;
pub mod geom;
pub mod ingest;
pub mod ipc;
pub mod manifest;
pub mod metrics;
pub mod period;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
pub use ipc::{IpcClass, LayerKind};
pub use period::{Cycle, PeriodId, PeriodRange};

/// Version stamped into manifests so runs are attributable to a build.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
