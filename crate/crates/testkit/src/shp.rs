//! A minimal ESRI polygon shapefile *writer*, used only to fabricate test
//! inputs for the production reader. Writes .shp, .shx, and .dbf with the
//! subset of the format the reader consumes.
//!
//! Rings are written exactly as supplied (apart from closing an open ring),
//! so tests control winding order and part grouping precisely.

use std::io;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct DbfField {
    pub name: String,
    /// 'C' (character) or 'N' (numeric).
    pub kind: char,
    pub len: u8,
}

impl DbfField {
    pub fn character(name: &str, len: u8) -> DbfField {
        DbfField { name: name.to_string(), kind: 'C', len }
    }

    pub fn numeric(name: &str, len: u8) -> DbfField {
        DbfField { name: name.to_string(), kind: 'N', len }
    }
}

fn close(ring: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut r = ring.to_vec();
    if r.first() != r.last() {
        r.push(r[0]);
    }
    r
}

/// Write `stem`.shp/.shx/.dbf for polygon features given as raw ring lists.
/// Attribute row length must match `fields`.
pub fn write_polygon_shapefile(
    stem: &Path,
    features: &[(Vec<Vec<[f64; 2]>>, Vec<String>)],
    fields: &[DbfField],
) -> io::Result<()> {
    let mut records: Vec<Vec<u8>> = Vec::with_capacity(features.len());
    let mut global_bbox = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];

    for (rings, _) in features {
        let rings: Vec<Vec<[f64; 2]>> = rings.iter().map(|r| close(r)).collect();
        let mut bbox = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];
        for p in rings.iter().flatten() {
            bbox[0] = bbox[0].min(p[0]);
            bbox[1] = bbox[1].min(p[1]);
            bbox[2] = bbox[2].max(p[0]);
            bbox[3] = bbox[3].max(p[1]);
        }
        for i in 0..4 {
            global_bbox[i] = if i < 2 {
                global_bbox[i].min(bbox[i])
            } else {
                global_bbox[i].max(bbox[i])
            };
        }
        let npoints: usize = rings.iter().map(|r| r.len()).sum();

        let mut content = Vec::new();
        content.extend_from_slice(&5i32.to_le_bytes());
        for v in bbox {
            content.extend_from_slice(&v.to_le_bytes());
        }
        content.extend_from_slice(&(rings.len() as i32).to_le_bytes());
        content.extend_from_slice(&(npoints as i32).to_le_bytes());
        let mut offset = 0i32;
        for r in &rings {
            content.extend_from_slice(&offset.to_le_bytes());
            offset += r.len() as i32;
        }
        for p in rings.iter().flatten() {
            content.extend_from_slice(&p[0].to_le_bytes());
            content.extend_from_slice(&p[1].to_le_bytes());
        }
        records.push(content);
    }

    let header = |file_words: i32| -> Vec<u8> {
        let mut h = Vec::with_capacity(100);
        h.extend_from_slice(&9994i32.to_be_bytes());
        h.extend_from_slice(&[0u8; 20]);
        h.extend_from_slice(&file_words.to_be_bytes());
        h.extend_from_slice(&1000i32.to_le_bytes());
        h.extend_from_slice(&5i32.to_le_bytes());
        for v in global_bbox {
            h.extend_from_slice(&v.to_le_bytes());
        }
        h.extend_from_slice(&[0u8; 32]);
        h
    };

    // Main file: header + (8-byte record header + content) per record.
    let total: usize = 100 + records.iter().map(|r| 8 + r.len()).sum::<usize>();
    let mut shp = header((total / 2) as i32);
    let mut shx_entries = Vec::new();
    let mut pos_words = 50i32;
    for (i, content) in records.iter().enumerate() {
        shx_entries.push((pos_words, (content.len() / 2) as i32));
        shp.extend_from_slice(&(i as i32 + 1).to_be_bytes());
        shp.extend_from_slice(&((content.len() / 2) as i32).to_be_bytes());
        shp.extend_from_slice(content);
        pos_words += 4 + (content.len() / 2) as i32;
    }
    std::fs::write(stem.with_extension("shp"), &shp)?;

    let mut shx = header(((100 + 8 * records.len()) / 2) as i32);
    for (off, len) in shx_entries {
        shx.extend_from_slice(&off.to_be_bytes());
        shx.extend_from_slice(&len.to_be_bytes());
    }
    std::fs::write(stem.with_extension("shx"), &shx)?;

    std::fs::write(stem.with_extension("dbf"), build_dbf(features, fields))?;
    Ok(())
}

fn build_dbf(features: &[(Vec<Vec<[f64; 2]>>, Vec<String>)], fields: &[DbfField]) -> Vec<u8> {
    let record_len: usize = 1 + fields.iter().map(|f| f.len as usize).sum::<usize>();
    let header_len = 32 + 32 * fields.len() + 1;
    let mut dbf = Vec::new();
    dbf.push(0x03);
    dbf.extend_from_slice(&[24, 1, 1]);
    dbf.extend_from_slice(&(features.len() as u32).to_le_bytes());
    dbf.extend_from_slice(&(header_len as u16).to_le_bytes());
    dbf.extend_from_slice(&(record_len as u16).to_le_bytes());
    dbf.extend_from_slice(&[0u8; 20]);
    for f in fields {
        let mut name = [0u8; 11];
        for (i, b) in f.name.bytes().take(10).enumerate() {
            name[i] = b;
        }
        dbf.extend_from_slice(&name);
        dbf.push(f.kind as u8);
        dbf.extend_from_slice(&[0u8; 4]);
        dbf.push(f.len);
        dbf.push(0); // decimal count
        dbf.extend_from_slice(&[0u8; 14]);
    }
    dbf.push(0x0D);
    for (_, row) in features {
        assert_eq!(row.len(), fields.len(), "attribute row arity mismatch");
        dbf.push(b' '); // not deleted
        for (field, value) in fields.iter().zip(row) {
            let len = field.len as usize;
            let bytes = value.as_bytes();
            assert!(bytes.len() <= len, "value {value:?} exceeds field width {len}");
            let mut cell = vec![b' '; len];
            match field.kind {
                'N' => cell[len - bytes.len()..].copy_from_slice(bytes),
                _ => cell[..bytes.len()].copy_from_slice(bytes),
            }
            dbf.extend_from_slice(&cell);
        }
    }
    dbf.push(0x1A);
    dbf
}
