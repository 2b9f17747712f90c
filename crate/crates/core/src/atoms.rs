//! The atom base layer and the classification panel.
//!
//! An *atom* is one piece of the admin-boundary × livelihood-zone overlay:
//! the smallest unit that classifications are projected onto. Atoms are
//! built once from a fixed pair of base layers and stay stable across all
//! periods; per-period classifications are then assigned by a second
//! overlay, deduplicated to the worst (highest) IPC class per atom, and
//! gated on a minimum covered fraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{filter_small, intersect_layers, make_valid, Region};
use crate::ingest::RawLayer;
use crate::ipc::{IpcClass, LayerKind};
use crate::period::PeriodId;

/// Attribute names used to read the two base layers. Published files vary;
/// these are configurable, with defaults matching the fixture corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseAttrNames {
    pub admin_id: String,
    pub admin_name: String,
    pub country: String,
    pub livelihood_id: String,
    pub livelihood_name: String,
}

impl Default for BaseAttrNames {
    fn default() -> Self {
        BaseAttrNames {
            admin_id: "admin_id".into(),
            admin_name: "admin_name".into(),
            country: "country".into(),
            livelihood_id: "lz_id".into(),
            livelihood_name: "lz_name".into(),
        }
    }
}

/// One admin × livelihood overlap piece (merged over multipart geometry).
#[derive(Debug, Clone)]
pub struct Atom {
    pub atom_id: String,
    pub admin_id: String,
    pub admin_name: String,
    /// ISO 3166-1 alpha-3 code carried by the admin layer.
    pub country: String,
    pub livelihood_id: String,
    pub livelihood_name: String,
    pub geometry: Region,
    pub area: f64,
}

/// A classification projected onto one atom for one (period, kind),
/// after dedup.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationRecord {
    pub atom_id: String,
    pub period: PeriodId,
    pub kind: LayerKind,
    pub ipc: IpcClass,
    pub covered_fraction: f64,
}

/// Pre-dedup record: one per surviving (atom × classification polygon)
/// intersection piece.
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub atom_id: String,
    pub ipc: IpcClass,
    pub covered_fraction: f64,
}

/// Bookkeeping from building the atom base.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomStats {
    pub admin_features: usize,
    pub livelihood_features: usize,
    pub pieces_before_filter: usize,
    pub removed_area_fraction: f64,
    pub atom_count: usize,
}

/// Bookkeeping from one (period, kind) assignment + dedup.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DedupStats {
    /// Atoms that carried more than one distinct IPC class.
    pub conflicted_atoms: u64,
    /// Atoms that carried at least one record.
    pub classified_atoms: u64,
}

impl DedupStats {
    /// Fraction of classified atoms whose records disagreed.
    pub fn dedup_rate(&self) -> f64 {
        if self.classified_atoms == 0 {
            0.0
        } else {
            self.conflicted_atoms as f64 / self.classified_atoms as f64
        }
    }
}

/// Stable atom identifier: the leading 16 hex digits of
/// SHA-256(admin_id, 0x1F, livelihood_id).
pub fn atom_id_for(admin_id: &str, livelihood_id: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(admin_id.as_bytes());
    hasher.update([0x1F]);
    hasher.update(livelihood_id.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(16);
    for byte in &digest[..8] {
        write!(out, "{byte:02x}").unwrap();
    }
    out
}

fn require_attr(layer: &RawLayer, index: usize, name: &str) -> Result<String> {
    layer.features[index]
        .attrs
        .get(name)
        .filter(|v| !v.is_empty())
        .cloned()
        .ok_or_else(|| Error::Attribute {
            name: name.to_string(),
            index,
            path: layer.source_path.clone(),
        })
}

fn optional_attr(layer: &RawLayer, index: usize, name: &str, fallback: &str) -> String {
    layer.features[index]
        .attrs
        .get(name)
        .filter(|v| !v.is_empty())
        .cloned()
        .unwrap_or_else(|| fallback.to_string())
}

/// Build the atom base: repair both layers, overlay them, drop slivers
/// below `area_threshold`, and merge pieces by (admin_id, livelihood_id).
pub fn build_atoms(
    admin: &RawLayer,
    livelihood: &RawLayer,
    names: &BaseAttrNames,
    area_threshold: f64,
) -> Result<(Vec<Atom>, AtomStats)> {
    let mut admin_meta: BTreeMap<String, (String, String)> = BTreeMap::new();
    let mut admin_layer = Vec::with_capacity(admin.features.len());
    for i in 0..admin.features.len() {
        let id = require_attr(admin, i, &names.admin_id)?;
        let name = optional_attr(admin, i, &names.admin_name, &id);
        let country = require_attr(admin, i, &names.country)?;
        admin_meta.insert(id.clone(), (name, country));
        admin_layer.push((id, make_valid(&admin.features[i].region)?));
    }

    let mut lz_meta: BTreeMap<String, String> = BTreeMap::new();
    let mut lz_layer = Vec::with_capacity(livelihood.features.len());
    for i in 0..livelihood.features.len() {
        let id = require_attr(livelihood, i, &names.livelihood_id)?;
        let name = optional_attr(livelihood, i, &names.livelihood_name, &id);
        lz_meta.insert(id.clone(), name);
        lz_layer.push((id, make_valid(&livelihood.features[i].region)?));
    }

    let pieces = intersect_layers(&admin_layer, &lz_layer)?;
    let pieces_before_filter = pieces.len();
    let (kept, removed_area_fraction) = filter_small(pieces, area_threshold);

    let mut merged: BTreeMap<(String, String), Vec<Region>> = BTreeMap::new();
    for piece in kept {
        merged
            .entry((piece.left_id, piece.right_id))
            .or_default()
            .push(piece.geometry);
    }

    let mut atoms: Vec<Atom> = merged
        .into_iter()
        .map(|((admin_id, livelihood_id), regions)| {
            let polygons = regions.into_iter().flat_map(|r| r.polygons).collect();
            let geometry = Region::new(polygons);
            let area = geometry.area();
            let (admin_name, country) = admin_meta[&admin_id].clone();
            Atom {
                atom_id: atom_id_for(&admin_id, &livelihood_id),
                admin_id,
                admin_name,
                country,
                livelihood_name: lz_meta[&livelihood_id].clone(),
                livelihood_id,
                geometry,
                area,
            }
        })
        .collect();
    atoms.sort_by(|a, b| {
        (&a.country, &a.admin_id, &a.livelihood_id).cmp(&(&b.country, &b.admin_id, &b.livelihood_id))
    });

    if atoms.is_empty() {
        return Err(Error::EmptyResult(
            "no admin × livelihood overlap survives the sliver filter".into(),
        ));
    }
    let stats = AtomStats {
        admin_features: admin.features.len(),
        livelihood_features: livelihood.features.len(),
        pieces_before_filter,
        removed_area_fraction,
        atom_count: atoms.len(),
    };
    Ok((atoms, stats))
}

/// Project one validated classification layer onto the atom base. Returns
/// raw (pre-dedup) records plus the sliver-filtered area fraction.
pub fn assign_classification(
    atoms: &[Atom],
    fs: &[(Region, IpcClass)],
    area_threshold: f64,
) -> Result<(Vec<RawRecord>, f64)> {
    if fs.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let atom_layer: Vec<(String, Region)> = atoms
        .iter()
        .map(|a| (a.atom_id.clone(), a.geometry.clone()))
        .collect();
    let mut fs_layer = Vec::with_capacity(fs.len());
    for (i, (region, _)) in fs.iter().enumerate() {
        fs_layer.push((i.to_string(), make_valid(region)?));
    }

    let pieces = intersect_layers(&atom_layer, &fs_layer)?;
    let (kept, removed_area_fraction) = filter_small(pieces, area_threshold);

    let area_of: BTreeMap<&str, f64> =
        atoms.iter().map(|a| (a.atom_id.as_str(), a.area)).collect();
    let mut records = Vec::with_capacity(kept.len());
    for piece in kept {
        let fs_index: usize = piece.right_id.parse().map_err(|_| {
            Error::Internal(format!("non-numeric classification piece id {}", piece.right_id))
        })?;
        let atom_area = area_of[piece.left_id.as_str()];
        records.push(RawRecord {
            atom_id: piece.left_id,
            ipc: fs[fs_index].1,
            covered_fraction: piece.area / atom_area,
        });
    }
    Ok((records, removed_area_fraction))
}

/// Resolve multiple raw records per atom to one, taking the worst
/// (highest) IPC class; covered fractions add up, clamped to 1.
pub fn dedup_worst(
    raw: &[RawRecord],
    period: PeriodId,
    kind: LayerKind,
) -> (Vec<ClassificationRecord>, DedupStats) {
    let mut grouped: BTreeMap<&str, (IpcClass, f64, BTreeSet<u8>)> = BTreeMap::new();
    for record in raw {
        let entry = grouped
            .entry(record.atom_id.as_str())
            .or_insert((record.ipc, 0.0, BTreeSet::new()));
        entry.0 = entry.0.max(record.ipc);
        entry.1 += record.covered_fraction;
        entry.2.insert(record.ipc.value());
    }
    let mut stats = DedupStats::default();
    let mut out = Vec::with_capacity(grouped.len());
    for (atom_id, (ipc, fraction_sum, distinct)) in grouped {
        stats.classified_atoms += 1;
        if distinct.len() > 1 {
            stats.conflicted_atoms += 1;
        }
        out.push(ClassificationRecord {
            atom_id: atom_id.to_string(),
            period,
            kind,
            ipc,
            covered_fraction: fraction_sum.min(1.0),
        });
    }
    (out, stats)
}

/// Keep only records whose covered fraction reaches the threshold; a
/// barely-touched atom stays unclassified for the period. Returns the
/// number dropped.
pub fn apply_coverage(
    records: Vec<ClassificationRecord>,
    coverage_threshold: f64,
) -> (Vec<ClassificationRecord>, u64) {
    let before = records.len();
    let kept: Vec<ClassificationRecord> = records
        .into_iter()
        .filter(|r| r.covered_fraction >= coverage_threshold)
        .collect();
    let dropped = (before - kept.len()) as u64;
    (kept, dropped)
}

/// Non-geometric atom attributes, as carried by the panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomMeta {
    pub atom_id: String,
    pub country: String,
    pub admin_id: String,
    pub livelihood_id: String,
}

/// The long-format classification panel: one row per (atom, period, kind)
/// that was actually classified. No imputation.
#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub metas: BTreeMap<String, AtomMeta>,
    /// Sorted by (period, kind, country, admin_id, livelihood_id).
    pub rows: Vec<ClassificationRecord>,
    index: BTreeMap<(PeriodId, LayerKind), BTreeMap<String, IpcClass>>,
    pub warnings: Vec<String>,
}

impl Panel {
    /// Assemble from per-(period, kind) record tables. Emits a warning for
    /// every period that lacks one of the three kinds.
    pub fn assemble(
        atoms: &[Atom],
        tables: Vec<(PeriodId, LayerKind, Vec<ClassificationRecord>)>,
    ) -> Result<Panel> {
        let metas: BTreeMap<String, AtomMeta> = atoms
            .iter()
            .map(|a| {
                (
                    a.atom_id.clone(),
                    AtomMeta {
                        atom_id: a.atom_id.clone(),
                        country: a.country.clone(),
                        admin_id: a.admin_id.clone(),
                        livelihood_id: a.livelihood_id.clone(),
                    },
                )
            })
            .collect();

        let mut kinds_seen: BTreeMap<PeriodId, BTreeSet<LayerKind>> = BTreeMap::new();
        let mut rows = Vec::new();
        for (period, kind, records) in tables {
            kinds_seen.entry(period).or_default().insert(kind);
            rows.extend(records);
        }
        let mut panel = Panel::from_rows(metas, rows)?;
        for (period, kinds) in kinds_seen {
            for kind in LayerKind::ALL {
                if !kinds.contains(&kind) {
                    panel
                        .warnings
                        .push(format!("period {period}: no {kind} layer in the catalog"));
                }
            }
        }
        Ok(panel)
    }

    /// Build the sorted panel and its lookup index from loose rows.
    pub fn from_rows(
        metas: BTreeMap<String, AtomMeta>,
        mut rows: Vec<ClassificationRecord>,
    ) -> Result<Panel> {
        for row in &rows {
            if !metas.contains_key(&row.atom_id) {
                return Err(Error::Internal(format!(
                    "panel row references unknown atom {}",
                    row.atom_id
                )));
            }
        }
        rows.sort_by(|a, b| {
            let ma = &metas[&a.atom_id];
            let mb = &metas[&b.atom_id];
            (a.period, a.kind, &ma.country, &ma.admin_id, &ma.livelihood_id)
                .cmp(&(b.period, b.kind, &mb.country, &mb.admin_id, &mb.livelihood_id))
        });
        let mut index: BTreeMap<(PeriodId, LayerKind), BTreeMap<String, IpcClass>> =
            BTreeMap::new();
        for row in &rows {
            let table = index.entry((row.period, row.kind)).or_default();
            if table.insert(row.atom_id.clone(), row.ipc).is_some() {
                return Err(Error::Internal(format!(
                    "duplicate panel row for atom {} at {} {}",
                    row.atom_id, row.period, row.kind
                )));
            }
        }
        Ok(Panel {
            metas,
            rows,
            index,
            warnings: Vec::new(),
        })
    }

    pub fn get(&self, atom_id: &str, period: PeriodId, kind: LayerKind) -> Option<IpcClass> {
        self.index.get(&(period, kind))?.get(atom_id).copied()
    }

    pub fn cs(&self, atom_id: &str, period: PeriodId) -> Option<IpcClass> {
        self.get(atom_id, period, LayerKind::Cs)
    }

    /// Whether any row exists for (period, kind).
    pub fn has_table(&self, period: PeriodId, kind: LayerKind) -> bool {
        self.index.contains_key(&(period, kind))
    }

    /// Distinct periods present, in chronological order.
    pub fn periods(&self) -> Vec<PeriodId> {
        let set: BTreeSet<PeriodId> = self.index.keys().map(|(p, _)| *p).collect();
        set.into_iter().collect()
    }

    /// Atom ids that have a row of the given kind, sorted by atom id.
    pub fn atoms_with(&self, period: PeriodId, kind: LayerKind) -> Vec<&str> {
        self.index
            .get(&(period, kind))
            .map(|table| table.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "atom_id",
            "country",
            "admin_id",
            "livelihood_id",
            "period",
            "kind",
            "ipc",
            "covered_fraction",
        ])?;
        for row in &self.rows {
            let meta = &self.metas[&row.atom_id];
            w.write_record([
                row.atom_id.as_str(),
                meta.country.as_str(),
                meta.admin_id.as_str(),
                meta.livelihood_id.as_str(),
                &row.period.to_string(),
                row.kind.as_str(),
                &row.ipc.to_string(),
                &format!("{:.6}", row.covered_fraction),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write one JSON object per row (same columns as the CSV).
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for row in &self.rows {
            let meta = &self.metas[&row.atom_id];
            let obj = json!({
                "atom_id": row.atom_id,
                "country": meta.country,
                "admin_id": meta.admin_id,
                "livelihood_id": meta.livelihood_id,
                "period": row.period.to_string(),
                "kind": row.kind.as_str(),
                "ipc": row.ipc.value(),
                "covered_fraction": round6(row.covered_fraction),
            });
            text.push_str(&serde_json::to_string(&obj)?);
            text.push('\n');
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Panel> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut metas = BTreeMap::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 8 {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    reason: format!("panel row with {} columns, expected 8", record.len()),
                });
            }
            let atom_id = record[0].to_string();
            metas.entry(atom_id.clone()).or_insert_with(|| AtomMeta {
                atom_id: atom_id.clone(),
                country: record[1].to_string(),
                admin_id: record[2].to_string(),
                livelihood_id: record[3].to_string(),
            });
            let ipc_value: i64 = record[6].parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                reason: format!("bad ipc value {:?}", &record[6]),
            })?;
            rows.push(ClassificationRecord {
                atom_id,
                period: PeriodId::parse(&record[4])?,
                kind: record[5].parse()?,
                ipc: IpcClass::try_from(ipc_value)?,
                covered_fraction: record[7].parse().map_err(|_| Error::Format {
                    path: path.display().to_string(),
                    reason: format!("bad covered_fraction {:?}", &record[7]),
                })?,
            });
        }
        Panel::from_rows(metas, rows)
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Persist atom geometry and attributes as a GeoJSON FeatureCollection,
/// in atom table order.
pub fn write_atoms_geojson(atoms: &[Atom], path: &Path) -> Result<()> {
    let features: Vec<Value> = atoms
        .iter()
        .map(|a| {
            json!({
                "type": "Feature",
                "properties": {
                    "atom_id": a.atom_id,
                    "admin_id": a.admin_id,
                    "admin_name": a.admin_name,
                    "country": a.country,
                    "lz_id": a.livelihood_id,
                    "lz_name": a.livelihood_name,
                    "area_sqdeg": a.area,
                },
                "geometry": a.geometry.to_geojson_geometry(),
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
