//! Discovery of classification layers on disk.
//!
//! The directory convention is `<root>/<REGION>/<YYYYMM>/<KIND>.<ext>`
//! with MM one of {02, 06, 10} and KIND one of {CS, ML1, ML2}. An optional
//! `ingest_manifest.json` at the root may override the convention for
//! individual files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipc::LayerKind;
use crate::period::PeriodId;

use super::LayerFormat;

/// Name of the optional per-root override file.
pub const INGEST_MANIFEST_NAME: &str = "ingest_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub period: PeriodId,
    pub kind: LayerKind,
    pub report_region: String,
    /// Path relative to the catalog root, with `/` separators.
    pub path: String,
}

impl CatalogEntry {
    pub fn key(&self) -> (PeriodId, LayerKind, String) {
        (self.period, self.kind, self.report_region.clone())
    }

    pub fn absolute_path(&self, root: &Path) -> PathBuf {
        root.join(&self.path)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    /// Sorted by (period, report_region, kind).
    pub entries: Vec<CatalogEntry>,
    /// Human-readable notes about skipped files and directories.
    pub warnings: Vec<String>,
}

/// Schema of `ingest_manifest.json`: explicit (period, kind, region)
/// assignments for files that do not follow the naming convention.
#[derive(Debug, Deserialize)]
struct IngestManifest {
    #[serde(default)]
    overrides: Vec<IngestOverride>,
}

#[derive(Debug, Deserialize)]
struct IngestOverride {
    /// Root-relative path with `/` separators.
    path: String,
    region: String,
    /// "YYYY-MM" or "YYYYMM".
    period: String,
    kind: String,
}

/// Scan `root` for classification layers. Unparseable names are skipped
/// with a warning; two files mapping to the same (period, kind, region)
/// key are a hard error.
pub fn build_catalog(root: &Path) -> Result<Catalog> {
    let mut warnings = Vec::new();
    let mut by_key: BTreeMap<(PeriodId, String, LayerKind), CatalogEntry> = BTreeMap::new();

    let overrides = load_overrides(root, &mut warnings)?;
    let overridden_paths: std::collections::BTreeSet<&str> =
        overrides.iter().map(|e| e.path.as_str()).collect();

    for entry in overrides.clone() {
        insert_entry(&mut by_key, entry, root)?;
    }

    if root.exists() {
        for region_dir in sorted_dirs(root)? {
            let region = match dir_name(&region_dir) {
                Some(name) if is_region_code(&name) => name,
                Some(name) => {
                    warnings.push(format!("skipping directory with unrecognized region code: {name}"));
                    continue;
                }
                None => continue,
            };
            for period_dir in sorted_dirs(&region_dir)? {
                let Some(period_name) = dir_name(&period_dir) else { continue };
                let period = match PeriodId::parse(&period_name) {
                    Ok(p) => p,
                    Err(_) => {
                        warnings.push(format!(
                            "skipping directory not named YYYYMM with a publication month: {region}/{period_name}"
                        ));
                        continue;
                    }
                };
                for file in sorted_files(&period_dir)? {
                    let rel = relative_slash_path(root, &file);
                    if overridden_paths.contains(rel.as_str()) {
                        continue; // the manifest already placed this file
                    }
                    let Some(stem) = file.file_stem().and_then(|s| s.to_str()) else { continue };
                    if LayerFormat::from_path(&file).is_none() {
                        if is_sidecar(&file) {
                            continue; // .dbf/.shx/.prj ride along silently
                        }
                        warnings.push(format!("skipping file with unrecognized extension: {rel}"));
                        continue;
                    }
                    let kind = match LayerKind::from_str(stem) {
                        Ok(k) => k,
                        Err(_) => {
                            warnings.push(format!(
                                "skipping file not named CS/ML1/ML2: {rel}"
                            ));
                            continue;
                        }
                    };
                    let entry = CatalogEntry {
                        period,
                        kind,
                        report_region: region.clone(),
                        path: rel,
                    };
                    insert_entry(&mut by_key, entry, root)?;
                }
            }
        }
    }

    let entries = by_key.into_values().collect();
    Ok(Catalog { entries, warnings })
}

fn load_overrides(root: &Path, warnings: &mut Vec<String>) -> Result<Vec<CatalogEntry>> {
    let manifest_path = root.join(INGEST_MANIFEST_NAME);
    if !manifest_path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&manifest_path)?;
    let manifest: IngestManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: manifest_path.display().to_string(),
        reason: format!("invalid ingest manifest: {e}"),
    })?;
    let mut out = Vec::new();
    for o in manifest.overrides {
        let period = PeriodId::parse(&o.period).map_err(|e| Error::Format {
            path: manifest_path.display().to_string(),
            reason: format!("override for {}: {e}", o.path),
        })?;
        let kind = LayerKind::from_str(&o.kind).map_err(|e| Error::Format {
            path: manifest_path.display().to_string(),
            reason: format!("override for {}: {e}", o.path),
        })?;
        if !root.join(&o.path).exists() {
            warnings.push(format!("ingest manifest names a missing file: {}", o.path));
            continue;
        }
        out.push(CatalogEntry {
            period,
            kind,
            report_region: o.region,
            path: o.path,
        });
    }
    Ok(out)
}

fn insert_entry(
    by_key: &mut BTreeMap<(PeriodId, String, LayerKind), CatalogEntry>,
    entry: CatalogEntry,
    root: &Path,
) -> Result<()> {
    let key = (entry.period, entry.report_region.clone(), entry.kind);
    if let Some(existing) = by_key.get(&key) {
        return Err(Error::DuplicateEntry {
            key: format!("({}, {}, {})", entry.period, entry.kind, entry.report_region),
            first: root.join(&existing.path).display().to_string(),
            second: root.join(&entry.path).display().to_string(),
        });
    }
    by_key.insert(key, entry);
    Ok(())
}

fn sorted_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn sorted_files(path: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn dir_name(path: &Path) -> Option<String> {
    path.file_name().and_then(|n| n.to_str()).map(str::to_string)
}

fn is_region_code(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 16
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn is_sidecar(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("dbf") | Some("shx") | Some("prj") | Some("cpg") | Some("sbn") | Some("sbx")
    )
}

fn relative_slash_path(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Persist a catalog as CSV: `period,region,kind,path`.
pub fn write_catalog_csv(catalog: &Catalog, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["period", "region", "kind", "path"])?;
    for e in &catalog.entries {
        w.write_record([
            e.period.to_string(),
            e.report_region.clone(),
            e.kind.to_string(),
            e.path.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_catalog_csv(path: &Path) -> Result<Catalog> {
    let mut r = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("catalog row with {} columns, expected 4", record.len()),
            });
        }
        entries.push(CatalogEntry {
            period: PeriodId::parse(&record[0])?,
            report_region: record[1].to_string(),
            kind: LayerKind::from_str(&record[2])?,
            path: record[3].to_string(),
        });
    }
    Ok(Catalog { entries, warnings: Vec::new() })
}
