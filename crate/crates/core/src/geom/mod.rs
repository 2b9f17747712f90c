//! Geometry: the polygon model and the boolean-overlay operations on it.

pub mod overlay;
pub mod region;

pub use overlay::{
    filter_small, intersect_layers, intersect_regions, make_valid, pieces_to_geojson, OverlayPiece,
};
pub use region::{Point, Polygon, Region};
