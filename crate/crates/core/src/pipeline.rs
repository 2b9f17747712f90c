//! The four pipeline stages behind the CLI commands. Each stage reads
//! only the config and files written by earlier stages, and writes its
//! outputs plus a manifest, so a run is reproducible from the config and
//! the input tree alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::atoms::{
    apply_coverage, assign_classification, build_atoms, dedup_worst, write_atoms_geojson, Atom,
    BaseAttrNames, ClassificationRecord, Panel, RawRecord,
};
use crate::baselines::{generate, write_predictions_csv, PredictionSource};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::catalog::{build_catalog, read_catalog_csv, write_catalog_csv, CatalogEntry};
use crate::ingest::{load_layer_auto, validate_ipc};
use crate::ipc::LayerKind;
use crate::manifest::{sha256_file, LayerStats, RunManifest, TableStats};
use crate::metrics::{join_pairs, score, Grouping, MetricsReport, ScoredPair};
use crate::period::PeriodId;
use crate::report::{
    write_accuracy_over_time_csv, write_confusion_by_period_csv,
    write_country_period_accuracy_csv, write_metrics_csv, MetricsDocument,
};

pub const CATALOG_FILE: &str = "catalog.csv";
pub const ATOMS_FILE: &str = "atoms.geojson";
pub const PANEL_FILE: &str = "panel.csv";
pub const BUILD_MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const EVALUATE_MANIFEST_FILE: &str = "evaluate_manifest.json";
pub const REPORTS_DIR: &str = "reports";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const METRICS_ML2_JSON_FILE: &str = "metrics_ml2.json";
pub const METRICS_ML2_CSV_FILE: &str = "metrics_ml2.csv";
pub const ACCURACY_OVER_TIME_FILE: &str = "accuracy_over_time.csv";
pub const COUNTRY_PERIOD_ACCURACY_FILE: &str = "country_period_accuracy.csv";
pub const CONFUSION_BY_PERIOD_FILE: &str = "confusion_by_period.csv";

/// Resolved output locations for a run.
#[derive(Debug, Clone)]
pub struct OutPaths {
    pub catalog: PathBuf,
    pub atoms: PathBuf,
    pub panel: PathBuf,
    pub build_manifest: PathBuf,
    pub predictions: PathBuf,
    pub evaluate_manifest: PathBuf,
    pub reports_dir: PathBuf,
    pub metrics_json: PathBuf,
    pub metrics_csv: PathBuf,
    pub metrics_ml2_json: PathBuf,
    pub metrics_ml2_csv: PathBuf,
    pub accuracy_over_time: PathBuf,
    pub country_period_accuracy: PathBuf,
    pub confusion_by_period: PathBuf,
}

impl OutPaths {
    pub fn new(output_dir: &Path) -> OutPaths {
        let reports = output_dir.join(REPORTS_DIR);
        OutPaths {
            catalog: output_dir.join(CATALOG_FILE),
            atoms: output_dir.join(ATOMS_FILE),
            panel: output_dir.join(PANEL_FILE),
            build_manifest: output_dir.join(BUILD_MANIFEST_FILE),
            predictions: output_dir.join(PREDICTIONS_FILE),
            evaluate_manifest: output_dir.join(EVALUATE_MANIFEST_FILE),
            metrics_json: reports.join(METRICS_JSON_FILE),
            metrics_csv: reports.join(METRICS_CSV_FILE),
            metrics_ml2_json: reports.join(METRICS_ML2_JSON_FILE),
            metrics_ml2_csv: reports.join(METRICS_ML2_CSV_FILE),
            accuracy_over_time: reports.join(ACCURACY_OVER_TIME_FILE),
            country_period_accuracy: reports.join(COUNTRY_PERIOD_ACCURACY_FILE),
            confusion_by_period: reports.join(CONFUSION_BY_PERIOD_FILE),
            reports_dir: reports,
        }
    }
}

/// One retry for geometry-kernel failures; anything else propagates
/// immediately, and a second geometry failure is final (exit code 3).
fn with_geometry_retry<T>(mut op: impl FnMut() -> Result<T>) -> Result<T> {
    match op() {
        Err(e) if e.is_geometry() => op(),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// catalog

#[derive(Debug)]
pub struct CatalogOutcome {
    pub entries: usize,
    pub warnings: Vec<String>,
    pub path: PathBuf,
}

/// Scan the data root and write the catalog CSV.
pub fn run_catalog(config: &RunConfig) -> Result<CatalogOutcome> {
    let catalog = build_catalog(&config.data_root)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let paths = OutPaths::new(&config.output_dir);
    write_catalog_csv(&catalog, &paths.catalog)?;
    Ok(CatalogOutcome {
        entries: catalog.entries.len(),
        warnings: catalog.warnings,
        path: paths.catalog,
    })
}

// ---------------------------------------------------------------------------
// build

#[derive(Debug)]
pub struct BuildOutcome {
    pub atom_count: usize,
    pub panel_rows: usize,
    pub warnings: Vec<String>,
    pub manifest: RunManifest,
}

struct EntryResult {
    digest: String,
    stats: LayerStats,
    raw: Vec<RawRecord>,
}

fn process_entry(config: &RunConfig, atoms: &[Atom], entry: &CatalogEntry) -> Result<EntryResult> {
    let path = entry.absolute_path(&config.data_root);
    let digest = sha256_file(&path)?;
    let layer = load_layer_auto(&path)?;
    let attribute = config.ipc_attribute(entry.period, entry.kind);
    let (regions, sentinel_dropped) = validate_ipc(&layer, &attribute, &config.sentinels)?;
    let (raw, removed_area_fraction) =
        with_geometry_retry(|| assign_classification(atoms, &regions, config.area_threshold))?;
    Ok(EntryResult {
        digest,
        stats: LayerStats {
            features: layer.features.len() as u64,
            sentinel_dropped,
            raw_records: raw.len() as u64,
            removed_area_fraction,
        },
        raw,
    })
}

/// Build the atom base, project every cataloged layer onto it, assemble
/// the panel, and write atoms + panel + manifest.
pub fn run_build(config: &RunConfig) -> Result<BuildOutcome> {
    let paths = OutPaths::new(&config.output_dir);
    if !paths.catalog.exists() {
        return Err(Error::Config(format!(
            "catalog not found at {}; run the catalog command first",
            paths.catalog.display()
        )));
    }
    let catalog = read_catalog_csv(&paths.catalog)?;
    let entries: Vec<&CatalogEntry> = catalog
        .entries
        .iter()
        .filter(|e| config.periods.is_none_or(|r| r.contains(e.period)))
        .collect();

    // Fixed atom base from the configured boundary vintage.
    let admin = load_layer_auto(&config.admin_path)?;
    let livelihood = load_layer_auto(&config.livelihood_path)?;
    let step1_threshold = if config.filter_each_step {
        config.area_threshold
    } else {
        0.0
    };
    let (atoms, atom_stats) = with_geometry_retry(|| {
        build_atoms(&admin, &livelihood, &BaseAttrNames::default(), step1_threshold)
    })?;

    let mut manifest = RunManifest::new(config.snapshot());
    manifest.atoms = Some(atom_stats);
    manifest.inputs.insert(
        format!("base/{}", file_name(&config.admin_path)),
        sha256_file(&config.admin_path)?,
    );
    manifest.inputs.insert(
        format!("base/{}", file_name(&config.livelihood_path)),
        sha256_file(&config.livelihood_path)?,
    );

    // Per-layer ingest + projection, in parallel; entry order (already
    // sorted by period/region/kind) is preserved by the indexed collect.
    let results: Vec<EntryResult> = entries
        .par_iter()
        .map(|entry| process_entry(config, &atoms, entry))
        .collect::<Result<Vec<_>>>()?;

    // Merge raw records across report regions of the same (period, kind),
    // then dedup and apply the coverage rule per table.
    let mut merged: BTreeMap<(PeriodId, LayerKind), Vec<RawRecord>> = BTreeMap::new();
    for (entry, result) in entries.iter().zip(results) {
        manifest.inputs.insert(entry.path.clone(), result.digest);
        manifest.layers.insert(entry.path.clone(), result.stats);
        merged.entry((entry.period, entry.kind)).or_default().extend(result.raw);
    }

    let mut tables: Vec<(PeriodId, LayerKind, Vec<ClassificationRecord>)> = Vec::new();
    for ((period, kind), raw) in merged {
        let (records, dedup_stats) = dedup_worst(&raw, period, kind);
        let (kept, low_coverage_dropped) = apply_coverage(records, config.coverage_threshold);
        manifest.tables.insert(
            format!("{period}/{kind}", kind = kind.as_str()),
            TableStats {
                records: kept.len() as u64,
                classified_atoms: dedup_stats.classified_atoms,
                conflicted_atoms: dedup_stats.conflicted_atoms,
                dedup_rate: dedup_stats.dedup_rate(),
                low_coverage_dropped,
            },
        );
        tables.push((period, kind, kept));
    }

    let panel = Panel::assemble(&atoms, tables)?;
    manifest.warnings = panel.warnings.clone();

    std::fs::create_dir_all(&config.output_dir)?;
    write_atoms_geojson(&atoms, &paths.atoms)?;
    panel.write_csv(&paths.panel)?;
    manifest.write_json(&paths.build_manifest)?;

    Ok(BuildOutcome {
        atom_count: atoms.len(),
        panel_rows: panel.rows.len(),
        warnings: panel.warnings.clone(),
        manifest,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub predictions: usize,
    pub scored_pairs: usize,
    pub ml2_pairs: usize,
    pub warnings: Vec<String>,
    pub manifest: RunManifest,
}

/// ML2 projections paired against the assessment two cycles ahead.
fn ml2_pairs(panel: &Panel, config: &RunConfig) -> Vec<ScoredPair> {
    let mut pairs = Vec::new();
    for period in panel.periods() {
        for atom_id in panel.atoms_with(period, LayerKind::Ml2) {
            let target = period.plus_cycles(2);
            if config.periods.is_some_and(|r| !r.contains(target)) {
                continue;
            }
            let Some(actual) = panel.cs(atom_id, target) else {
                continue;
            };
            let predicted = panel.get(atom_id, period, LayerKind::Ml2).expect("listed atom");
            let country = panel
                .metas
                .get(atom_id)
                .map(|m| m.country.clone())
                .unwrap_or_default();
            pairs.push(ScoredPair {
                atom_id: atom_id.to_string(),
                target_period: target,
                source: PredictionSource::Fewsnet,
                predicted,
                actual,
                country,
                partial: false,
            });
        }
    }
    pairs
}

fn score_all(pairs: &[ScoredPair], groupings: &[Grouping]) -> Result<Vec<MetricsReport>> {
    let mut reports = Vec::new();
    for grouping in groupings {
        reports.extend(score(pairs, *grouping)?);
    }
    Ok(reports)
}

/// Generate predictions, join them against ground truth, score every
/// grouping, and write predictions + reports + manifest.
pub fn run_evaluate(config: &RunConfig) -> Result<EvaluateOutcome> {
    let paths = OutPaths::new(&config.output_dir);
    if !paths.panel.exists() {
        return Err(Error::Config(format!(
            "panel not found at {}; run the build command first",
            paths.panel.display()
        )));
    }
    let panel = Panel::read_csv(&paths.panel)?;

    let (mut predictions, prediction_stats) = generate(&panel, &config.sources);
    if let Some(range) = config.periods {
        predictions.retain(|p| range.contains(p.target_period));
    }

    let pairs = join_pairs(&predictions, &panel);
    if pairs.is_empty() {
        return Err(Error::EmptyJoin(
            "no prediction source yielded any scored pair".into(),
        ));
    }

    let mut warnings = Vec::new();
    for source in &config.sources {
        if !pairs.iter().any(|p| p.source == *source) {
            warnings.push(format!(
                "source {source} produced no scored pairs; omitted from reports"
            ));
        }
    }

    // Plot files need the two source-resolved groupings even when the
    // config asks for fewer; score them exactly once.
    let mut groupings = config.groupings.clone();
    for required in [Grouping::SourcePeriod, Grouping::SourceCountryPeriod] {
        if !groupings.contains(&required) {
            groupings.push(required);
        }
    }
    let reports = score_all(&pairs, &groupings)?;
    let document = MetricsDocument::from_reports(&reports);

    std::fs::create_dir_all(&paths.reports_dir)?;
    write_predictions_csv(&predictions, &paths.predictions)?;
    document.write_json(&paths.metrics_json)?;
    write_metrics_csv(&document, &paths.metrics_csv)?;
    write_accuracy_over_time_csv(&document, &paths.accuracy_over_time)?;
    write_country_period_accuracy_csv(&document, &paths.country_period_accuracy)?;
    write_confusion_by_period_csv(&document, &paths.confusion_by_period)?;

    // Optional extension: ML2 against CS two cycles ahead, as a separate
    // document so the headline comparison stays ML1-based.
    let ml2 = if config.score_ml2 {
        let pairs = ml2_pairs(&panel, config);
        if pairs.is_empty() {
            warnings.push("ML2 scoring enabled but produced no pairs; skipped".into());
            Vec::new()
        } else {
            let reports = score_all(&pairs, &groupings)?;
            let document = MetricsDocument::from_reports(&reports);
            document.write_json(&paths.metrics_ml2_json)?;
            write_metrics_csv(&document, &paths.metrics_ml2_csv)?;
            pairs
        }
    } else {
        Vec::new()
    };

    let mut manifest = RunManifest::new(config.snapshot());
    manifest
        .inputs
        .insert(PANEL_FILE.to_string(), sha256_file(&paths.panel)?);
    manifest.predictions = Some(prediction_stats);
    manifest.warnings = warnings.clone();
    manifest.write_json(&paths.evaluate_manifest)?;

    Ok(EvaluateOutcome {
        predictions: predictions.len(),
        scored_pairs: pairs.len(),
        ml2_pairs: ml2.len(),
        warnings,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug)]
pub struct ReportOutcome {
    pub groups: usize,
    pub rendered: Vec<PathBuf>,
}

/// Re-render the CSV artifacts from the stored metrics document.
pub fn run_report(config: &RunConfig) -> Result<ReportOutcome> {
    let paths = OutPaths::new(&config.output_dir);
    if !paths.metrics_json.exists() {
        return Err(Error::Config(format!(
            "metrics not found at {}; run the evaluate command first",
            paths.metrics_json.display()
        )));
    }
    let document = MetricsDocument::read_json(&paths.metrics_json)?;
    write_metrics_csv(&document, &paths.metrics_csv)?;
    write_accuracy_over_time_csv(&document, &paths.accuracy_over_time)?;
    write_country_period_accuracy_csv(&document, &paths.country_period_accuracy)?;
    write_confusion_by_period_csv(&document, &paths.confusion_by_period)?;
    let mut rendered = vec![
        paths.metrics_csv.clone(),
        paths.accuracy_over_time.clone(),
        paths.country_period_accuracy.clone(),
        paths.confusion_by_period.clone(),
    ];
    if paths.metrics_ml2_json.exists() {
        let ml2 = MetricsDocument::read_json(&paths.metrics_ml2_json)?;
        write_metrics_csv(&ml2, &paths.metrics_ml2_csv)?;
        rendered.push(paths.metrics_ml2_csv.clone());
    }
    Ok(ReportOutcome {
        groups: document.groupings.values().map(|g| g.len()).sum(),
        rendered,
    })
}
