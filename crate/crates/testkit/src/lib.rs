//! Independent oracles and fixture generators used by the fsv test suites.
//!
//! Everything in here deliberately avoids the production code paths it is
//! used to check: point-in-polygon casts a vertical ray where production
//! casts a horizontal one, areas are estimated by stratified Monte-Carlo
//! sampling instead of the shoelace formula, and metrics are counted with
//! direct loops over the label vectors rather than through a confusion
//! matrix. Agreement between the two sides is therefore meaningful.

pub mod fixtures;
pub mod oracle;
pub mod shp;

pub use oracle::*;
