//! Layer ingestion: reading vector layers (GeoJSON and ESRI shapefile),
//! locating them on disk via the directory naming convention, and
//! validating IPC attributes into typed records.
//!
//! All geometry is treated as geographic lon/lat (WGS84). Files declaring a
//! projected CRS are rejected rather than reprojected: the downstream area
//! threshold is expressed in square degrees and only meaningful in a fixed
//! unit.

pub mod catalog;
pub mod geojson;
pub mod shapefile;

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Region;
use crate::ipc::IpcClass;

pub use catalog::{build_catalog, read_catalog_csv, write_catalog_csv, Catalog, CatalogEntry};
pub use geojson::{load_geojson, write_geojson};
pub use shapefile::load_shapefile;

/// IPC attribute values that mean "no data" / "not analyzed" rather than a
/// classification. Dropped (and counted) instead of imputed.
pub const DEFAULT_SENTINELS: [i64; 4] = [0, 66, 88, 99];

/// One feature of a raw vector layer: geometry plus its attribute table
/// row, all values rendered as strings.
#[derive(Debug, Clone)]
pub struct RawFeature {
    pub region: Region,
    pub attrs: BTreeMap<String, String>,
}

/// A loaded vector layer. Immutable after construction and safe to share
/// across threads read-only.
#[derive(Debug, Clone)]
pub struct RawLayer {
    pub features: Vec<RawFeature>,
    pub source_path: String,
    pub declared_crs: String,
}

/// Supported on-disk vector formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerFormat {
    EsriShapefile,
    GeoJson,
}

impl LayerFormat {
    pub fn from_path(path: &Path) -> Option<LayerFormat> {
        match path.extension().and_then(|e| e.to_str())?.to_ascii_lowercase().as_str() {
            "shp" => Some(LayerFormat::EsriShapefile),
            "geojson" | "json" => Some(LayerFormat::GeoJson),
            _ => None,
        }
    }
}

/// Load a vector layer in the given format. Ring orientation is normalized
/// on load (exteriors counter-clockwise, holes clockwise) and coordinates
/// are snapped to the 1e-9 degree grid.
pub fn load_layer(path: &Path, format: LayerFormat) -> Result<RawLayer> {
    match format {
        LayerFormat::EsriShapefile => load_shapefile(path),
        LayerFormat::GeoJson => load_geojson(path),
    }
}

/// Load a layer, picking the format from the file extension.
pub fn load_layer_auto(path: &Path) -> Result<RawLayer> {
    let format = LayerFormat::from_path(path).ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        reason: "unrecognized extension (expected .shp, .geojson, or .json)".into(),
    })?;
    load_layer(path, format)
}

/// Longitude/latitude plausibility check, used when no CRS is declared.
pub(crate) fn check_geographic_range(layer: &RawLayer) -> Result<()> {
    for feature in &layer.features {
        for ring in feature.region.rings() {
            for p in ring {
                if p[0].abs() > 361.0 || p[1].abs() > 91.0 {
                    return Err(Error::Crs {
                        path: layer.source_path.clone(),
                        detail: format!(
                            "coordinate ({}, {}) outside geographic lon/lat range",
                            p[0], p[1]
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Parse and validate the IPC attribute of every feature. Sentinel codes
/// are dropped and counted; anything else outside 1..=5 is an error.
pub fn validate_ipc(
    layer: &RawLayer,
    attribute_name: &str,
    sentinels: &[i64],
) -> Result<(Vec<(Region, IpcClass)>, u64)> {
    let mut out = Vec::with_capacity(layer.features.len());
    let mut dropped = 0u64;
    for (index, feature) in layer.features.iter().enumerate() {
        let raw = feature.attrs.get(attribute_name).ok_or_else(|| Error::Attribute {
            name: attribute_name.to_string(),
            index,
            path: layer.source_path.clone(),
        })?;
        let value = parse_ipc_number(raw).ok_or_else(|| Error::Range {
            value: raw.clone(),
            index,
            path: layer.source_path.clone(),
        })?;
        if sentinels.contains(&value) {
            dropped += 1;
            continue;
        }
        match IpcClass::try_from(value) {
            Ok(ipc) => out.push((feature.region.clone(), ipc)),
            Err(_) => {
                return Err(Error::Range {
                    value: raw.clone(),
                    index,
                    path: layer.source_path.clone(),
                })
            }
        }
    }
    Ok((out, dropped))
}

/// Accept integer-valued attribute strings in either integer or decimal
/// form ("3", " 3", "3.0"), as published attribute tables vary.
fn parse_ipc_number(raw: &str) -> Option<i64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return None;
    }
    if let Ok(v) = trimmed.parse::<i64>() {
        return Some(v);
    }
    let f = trimmed.parse::<f64>().ok()?;
    if f.fract() == 0.0 && f.abs() < 1e9 {
        Some(f as i64)
    } else {
        None
    }
}
