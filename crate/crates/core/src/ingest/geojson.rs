//! GeoJSON (RFC 7946) reading and writing for polygon layers.
//!
//! Only `FeatureCollection` documents with `Polygon`/`MultiPolygon`
//! geometries are accepted. Property values are rendered to strings on
//! load; write-out therefore round-trips attributes byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geom::{Polygon, Region};

use super::{check_geographic_range, RawFeature, RawLayer};

pub fn load_geojson(path: &Path) -> Result<RawLayer> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: format!("invalid JSON: {e}"),
    })?;
    let fail = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };

    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(fail("expected a FeatureCollection document".into()));
    }
    let declared_crs = parse_crs(&doc, path)?;

    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| fail("missing features array".into()))?;
    if features.is_empty() {
        return Err(Error::EmptyLayer {
            path: path.display().to_string(),
        });
    }

    let mut out = Vec::with_capacity(features.len());
    for (i, feature) in features.iter().enumerate() {
        if feature.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(fail(format!("features[{i}] is not a Feature")));
        }
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| fail(format!("features[{i}] has no geometry")))?;
        let region = parse_geometry(geometry)
            .map_err(|reason| fail(format!("features[{i}]: {reason}")))?
            .normalized();
        if region.is_empty() {
            return Err(fail(format!("features[{i}]: degenerate (zero-area) geometry")));
        }
        let mut attrs = BTreeMap::new();
        if let Some(props) = feature.get("properties").and_then(Value::as_object) {
            for (k, v) in props {
                if let Some(s) = attr_string(v) {
                    attrs.insert(k.clone(), s);
                }
            }
        }
        out.push(RawFeature { region, attrs });
    }

    let layer = RawLayer {
        features: out,
        source_path: path.display().to_string(),
        declared_crs,
    };
    check_geographic_range(&layer)?;
    Ok(layer)
}

/// Legacy `crs` members are tolerated but must name a geographic lon/lat
/// system; RFC 7946 documents without one default to CRS84.
fn parse_crs(doc: &Value, path: &Path) -> Result<String> {
    let Some(crs) = doc.get("crs") else {
        return Ok("OGC:CRS84".to_string());
    };
    let name = crs
        .get("properties")
        .and_then(|p| p.get("name"))
        .and_then(Value::as_str)
        .unwrap_or("");
    let upper = name.to_ascii_uppercase();
    if upper.contains("CRS84") || upper.contains("4326") || upper.contains("WGS") {
        Ok(name.to_string())
    } else {
        Err(Error::Crs {
            path: path.display().to_string(),
            detail: format!("declared CRS {name:?} is not geographic lon/lat"),
        })
    }
}

fn parse_geometry(geometry: &Value) -> std::result::Result<Region, String> {
    let kind = geometry
        .get("type")
        .and_then(Value::as_str)
        .ok_or("geometry without type")?;
    let coords = geometry.get("coordinates").ok_or("geometry without coordinates")?;
    let polygons = match kind {
        "Polygon" => vec![parse_polygon(coords)?],
        "MultiPolygon" => coords
            .as_array()
            .ok_or("MultiPolygon coordinates must be an array")?
            .iter()
            .map(parse_polygon)
            .collect::<std::result::Result<Vec<_>, _>>()?,
        other => return Err(format!("unsupported geometry type {other:?}")),
    };
    Ok(Region::new(polygons))
}

fn parse_polygon(coords: &Value) -> std::result::Result<Polygon, String> {
    let rings = coords.as_array().ok_or("Polygon coordinates must be an array")?;
    if rings.is_empty() {
        return Err("Polygon with zero rings".to_string());
    }
    let mut parsed = rings.iter().map(parse_ring);
    let exterior = parsed.next().unwrap()?;
    let holes = parsed.collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Polygon { exterior, holes })
}

fn parse_ring(ring: &Value) -> std::result::Result<Vec<[f64; 2]>, String> {
    let positions = ring.as_array().ok_or("ring must be an array of positions")?;
    let mut out = Vec::with_capacity(positions.len());
    for pos in positions {
        let nums = pos.as_array().ok_or("position must be an array")?;
        if nums.len() < 2 {
            return Err("position with fewer than 2 coordinates".to_string());
        }
        let x = nums[0].as_f64().ok_or("non-numeric coordinate")?;
        let y = nums[1].as_f64().ok_or("non-numeric coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err("non-finite coordinate".to_string());
        }
        out.push([x, y]);
    }
    if out.len() < 4 {
        return Err("ring with fewer than 4 positions".to_string());
    }
    Ok(out)
}

fn attr_string(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        other => Some(other.to_string()),
    }
}

/// Write a layer back out as a GeoJSON FeatureCollection. All attribute
/// values are emitted as strings, matching how they were loaded.
pub fn write_geojson(layer: &RawLayer, path: &Path) -> Result<()> {
    let features: Vec<Value> = layer
        .features
        .iter()
        .map(|f| {
            let mut props = Map::new();
            for (k, v) in &f.attrs {
                props.insert(k.clone(), Value::String(v.clone()));
            }
            json!({
                "type": "Feature",
                "properties": Value::Object(props),
                "geometry": f.region.to_geojson_geometry(),
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
