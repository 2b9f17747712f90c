//! Minimal ESRI shapefile reader: polygon shapes (types 5, 15, 25) with a
//! dBASE III attribute table and an optional .prj sidecar.
//!
//! Only what published classification layers need is implemented: XY
//! coordinates (Z/M payloads are skipped), character/numeric/date/logical
//! fields rendered as trimmed strings, and ESRI ring winding (clockwise
//! exteriors, counter-clockwise holes) regrouped into polygons by
//! containment.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::region::{point_in_ring, signed_ring_area};
use crate::geom::{Polygon, Region};

use super::{check_geographic_range, RawFeature, RawLayer};

const SHP_MAGIC: i32 = 9994;
const SHP_VERSION: i32 = 1000;
const TYPE_POLYGON: i32 = 5;
const TYPE_POLYGON_Z: i32 = 15;
const TYPE_POLYGON_M: i32 = 25;
const TYPE_NULL: i32 = 0;

pub fn load_shapefile(path: &Path) -> Result<RawLayer> {
    let fail = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };

    check_prj(path)?;
    let shp = std::fs::read(path)?;
    let shapes = parse_shp(&shp).map_err(&fail)?;

    let dbf_path = path.with_extension("dbf");
    if !dbf_path.exists() {
        return Err(fail("missing .dbf attribute sidecar".into()));
    }
    let dbf = std::fs::read(&dbf_path)?;
    let records = parse_dbf(&dbf).map_err(&fail)?;

    if shapes.len() != records.len() {
        return Err(fail(format!(
            "shape count {} does not match attribute record count {}",
            shapes.len(),
            records.len()
        )));
    }

    let mut features = Vec::with_capacity(shapes.len());
    for (i, (shape, record)) in shapes.into_iter().zip(records).enumerate() {
        let (attrs, deleted) = record;
        if deleted {
            continue;
        }
        let Some(rings) = shape else { continue }; // null shape
        let region = group_rings(rings).normalized();
        if region.is_empty() {
            return Err(fail(format!("record {i}: degenerate (zero-area) geometry")));
        }
        features.push(RawFeature { region, attrs });
    }
    if features.is_empty() {
        return Err(Error::EmptyLayer {
            path: path.display().to_string(),
        });
    }

    let layer = RawLayer {
        features,
        source_path: path.display().to_string(),
        declared_crs: declared_crs_of(path),
    };
    check_geographic_range(&layer)?;
    Ok(layer)
}

/// A projected .prj (PROJCS) is an error; geographic (GEOGCS) or absent is
/// accepted. When absent, the coordinate-range check is the only guard.
fn check_prj(path: &Path) -> Result<()> {
    let prj_path = path.with_extension("prj");
    let Ok(text) = std::fs::read_to_string(&prj_path) else {
        return Ok(());
    };
    let upper = text.to_ascii_uppercase();
    if upper.trim_start().starts_with("PROJCS") || upper.contains("PROJECTION[") {
        return Err(Error::Crs {
            path: path.display().to_string(),
            detail: "projected CRS declared in .prj; expected geographic lon/lat".into(),
        });
    }
    Ok(())
}

fn declared_crs_of(path: &Path) -> String {
    let prj_path = path.with_extension("prj");
    match std::fs::read_to_string(&prj_path) {
        Ok(text) => {
            // First quoted token of the WKT, e.g. GEOGCS["WGS 84", ...].
            text.split('"').nth(1).unwrap_or("GEOGCS").to_string()
        }
        Err(_) => "ASSUMED:WGS84".to_string(),
    }
}

type Ring = Vec<[f64; 2]>;

fn be_i32(buf: &[u8], off: usize) -> std::result::Result<i32, String> {
    let bytes = buf.get(off..off + 4).ok_or("truncated file")?;
    Ok(i32::from_be_bytes(bytes.try_into().unwrap()))
}

fn le_i32(buf: &[u8], off: usize) -> std::result::Result<i32, String> {
    let bytes = buf.get(off..off + 4).ok_or("truncated file")?;
    Ok(i32::from_le_bytes(bytes.try_into().unwrap()))
}

fn le_f64(buf: &[u8], off: usize) -> std::result::Result<f64, String> {
    let bytes = buf.get(off..off + 8).ok_or("truncated file")?;
    Ok(f64::from_le_bytes(bytes.try_into().unwrap()))
}

/// Parse the .shp geometry stream. `None` entries are null shapes, which
/// still consume an attribute record.
fn parse_shp(buf: &[u8]) -> std::result::Result<Vec<Option<Vec<Ring>>>, String> {
    if buf.len() < 100 {
        return Err("file shorter than the 100-byte header".into());
    }
    if be_i32(buf, 0)? != SHP_MAGIC {
        return Err("bad magic number (not a shapefile)".into());
    }
    if le_i32(buf, 28)? != SHP_VERSION {
        return Err("unsupported shapefile version".into());
    }
    let file_type = le_i32(buf, 32)?;
    if !matches!(file_type, TYPE_POLYGON | TYPE_POLYGON_Z | TYPE_POLYGON_M) {
        return Err(format!("shape type {file_type} is not a polygon type"));
    }
    let declared_len = 2 * be_i32(buf, 24)? as usize;
    if declared_len != buf.len() {
        return Err(format!(
            "header length {declared_len} does not match file size {}",
            buf.len()
        ));
    }

    let mut shapes = Vec::new();
    let mut off = 100usize;
    while off < buf.len() {
        let content_words = be_i32(buf, off + 4)?;
        if content_words < 2 {
            return Err("record content shorter than a shape type".into());
        }
        let content = off + 8;
        let end = content + 2 * content_words as usize;
        if end > buf.len() {
            return Err("record overruns the file".into());
        }
        let shape_type = le_i32(buf, content)?;
        if shape_type == TYPE_NULL {
            shapes.push(None);
            off = end;
            continue;
        }
        if shape_type != file_type {
            return Err(format!(
                "record shape type {shape_type} differs from file type {file_type}"
            ));
        }
        let num_parts = le_i32(buf, content + 36)? as usize;
        let num_points = le_i32(buf, content + 40)? as usize;
        let parts_off = content + 44;
        let points_off = parts_off + 4 * num_parts;
        if points_off + 16 * num_points > end {
            return Err("record too short for its declared parts/points".into());
        }
        let mut parts = Vec::with_capacity(num_parts + 1);
        for p in 0..num_parts {
            let idx = le_i32(buf, parts_off + 4 * p)? as usize;
            if idx > num_points {
                return Err("part index out of range".into());
            }
            parts.push(idx);
        }
        parts.push(num_points);
        let mut rings = Vec::with_capacity(num_parts);
        for w in parts.windows(2) {
            let (start, stop) = (w[0], w[1]);
            if stop < start {
                return Err("part indices not ascending".into());
            }
            let mut ring = Vec::with_capacity(stop - start);
            for p in start..stop {
                let x = le_f64(buf, points_off + 16 * p)?;
                let y = le_f64(buf, points_off + 16 * p + 8)?;
                if !x.is_finite() || !y.is_finite() {
                    return Err("non-finite coordinate".into());
                }
                ring.push([x, y]);
            }
            if ring.len() < 3 {
                continue; // degenerate part
            }
            if ring.first() != ring.last() {
                ring.push(ring[0]);
            }
            rings.push(ring);
        }
        if rings.is_empty() {
            return Err("polygon record with no usable rings".into());
        }
        shapes.push(Some(rings));
        off = end;
    }
    Ok(shapes)
}

/// Regroup a record's rings into polygons. ESRI convention: clockwise
/// rings are exteriors, counter-clockwise rings are holes belonging to the
/// smallest enclosing exterior. Rings with unexpected winding are promoted
/// to exteriors rather than dropped.
fn group_rings(rings: Vec<Ring>) -> Region {
    if rings.len() == 1 {
        let mut it = rings.into_iter();
        return Region::from_rings(it.next().unwrap(), Vec::new());
    }
    let mut exteriors: Vec<(Ring, f64)> = Vec::new();
    let mut holes: Vec<Ring> = Vec::new();
    for ring in rings {
        let signed = signed_ring_area(&ring);
        if signed <= 0.0 {
            exteriors.push((ring, signed.abs()));
        } else {
            holes.push(ring);
        }
    }
    if exteriors.is_empty() {
        // All counter-clockwise: treat every ring as its own exterior.
        let polygons = holes
            .into_iter()
            .map(|ring| Polygon { exterior: ring, holes: Vec::new() })
            .collect();
        return Region::new(polygons);
    }
    let mut grouped: Vec<(Ring, Vec<Ring>)> =
        exteriors.iter().map(|(r, _)| (r.clone(), Vec::new())).collect();
    for hole in holes {
        let probe = hole[0];
        let mut best: Option<(usize, f64)> = None;
        for (i, (ext, area)) in exteriors.iter().enumerate() {
            if point_in_ring(probe, ext) && best.map_or(true, |(_, a)| *area < a) {
                best = Some((i, *area));
            }
        }
        match best {
            Some((i, _)) => grouped[i].1.push(hole),
            // Orphan ring: promote to exterior.
            None => grouped.push((hole, Vec::new())),
        }
    }
    Region::new(
        grouped
            .into_iter()
            .map(|(exterior, holes)| Polygon { exterior, holes })
            .collect(),
    )
}

/// Parse a dBASE III table into per-record attribute maps plus a deletion
/// flag.
#[allow(clippy::type_complexity)]
fn parse_dbf(buf: &[u8]) -> std::result::Result<Vec<(BTreeMap<String, String>, bool)>, String> {
    if buf.len() < 33 {
        return Err(".dbf shorter than its header".into());
    }
    if buf[0] & 0x07 != 0x03 {
        return Err(format!(".dbf version byte {:#x} unsupported", buf[0]));
    }
    let record_count = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let header_size = u16::from_le_bytes(buf[8..10].try_into().unwrap()) as usize;
    let record_size = u16::from_le_bytes(buf[10..12].try_into().unwrap()) as usize;

    let mut fields: Vec<(String, usize)> = Vec::new();
    let mut off = 32usize;
    while off + 32 <= header_size && buf.get(off) != Some(&0x0D) {
        let descriptor = &buf[off..off + 32];
        let name_end = descriptor[..11].iter().position(|&b| b == 0).unwrap_or(11);
        let name = String::from_utf8_lossy(&descriptor[..name_end]).trim().to_string();
        let len = descriptor[16] as usize;
        if name.is_empty() {
            return Err(".dbf field with empty name".into());
        }
        fields.push((name, len));
        off += 32;
    }
    let fields_width: usize = fields.iter().map(|(_, l)| l).sum();
    if fields_width + 1 != record_size {
        return Err(format!(
            ".dbf record size {record_size} does not match field widths {fields_width} + 1"
        ));
    }

    let mut records = Vec::with_capacity(record_count);
    let mut pos = header_size;
    for r in 0..record_count {
        let end = pos + record_size;
        if end > buf.len() {
            return Err(format!(".dbf truncated at record {r}"));
        }
        let deleted = buf[pos] == b'*';
        let mut attrs = BTreeMap::new();
        let mut field_pos = pos + 1;
        for (name, len) in &fields {
            let raw = &buf[field_pos..field_pos + len];
            let value = String::from_utf8_lossy(raw)
                .trim_matches(|c: char| c == ' ' || c == '\0')
                .to_string();
            attrs.insert(name.clone(), value);
            field_pos += len;
        }
        records.push((attrs, deleted));
        pos = end;
    }
    Ok(records)
}
