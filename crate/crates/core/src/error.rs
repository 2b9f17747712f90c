//! Error taxonomy for the verification pipeline.
//!
//! Variants are grouped roughly by stage: ingest/catalog problems, geometry
//! repair and clipping failures, and evaluation-time emptiness. The CLI maps
//! these onto process exit codes; library callers can match on them directly.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be parsed as the format its extension promised.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// A vector layer parsed fine but contained zero usable features.
    #[error("layer {path} contains no features")]
    EmptyLayer { path: String },

    /// The layer declares a CRS that is not geographic lon/lat.
    #[error("unsupported CRS for {path}: {detail}")]
    Crs { path: String, detail: String },

    /// Two catalog sources resolve to the same (period, region, kind) slot.
    #[error("duplicate catalog entry for {key}: {first} vs {second}")]
    DuplicateEntry {
        key: String,
        first: String,
        second: String,
    },

    /// A path inside the data root does not follow the naming convention.
    #[error("cannot interpret layer path {path}")]
    Naming { path: String },

    /// A required attribute column is absent from a feature.
    #[error("attribute {name} missing on feature {index} of {path}")]
    Attribute {
        name: String,
        index: usize,
        path: String,
    },

    /// An IPC value was present but outside 1..=5 and not a known sentinel.
    #[error("IPC value {value} out of range on feature {index} of {path}")]
    Range {
        value: String,
        index: usize,
        path: String,
    },

    /// Geometry repair altered the area of an already-valid input.
    #[error("repair changed area beyond tolerance: {before} -> {after}")]
    Repair { before: f64, after: f64 },

    /// Input geometry has no interior to work with.
    #[error("degenerate zero-area geometry: {detail}")]
    Degenerate { detail: String },

    /// The clipping kernel could not produce a usable result.
    #[error("clipping kernel failure: {0}")]
    Topology(String),

    /// An overlay or filter step left nothing behind.
    #[error("empty result: {0}")]
    EmptyResult(String),

    /// Scoring had no (prediction, ground truth) pairs to work with.
    #[error("no scored pairs: {0}")]
    EmptyJoin(String),

    #[error("config error: {0}")]
    Config(String),

    /// An internal invariant was violated; always a bug, never bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Geometry-kernel failures get one retry in the pipeline and their
    /// own exit code when they persist.
    pub fn is_geometry(&self) -> bool {
        matches!(
            self,
            Error::Repair { .. } | Error::Degenerate { .. } | Error::Topology(_)
        )
    }

    /// Stable process exit code: 2 catalog conflicts, 3 geometry
    /// failures, 4 empty evaluations, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DuplicateEntry { .. } => 2,
            e if e.is_geometry() => 3,
            Error::EmptyJoin(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
