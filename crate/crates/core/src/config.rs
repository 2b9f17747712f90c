//! Run configuration: a single TOML file drives every command.
//!
//! Relative paths in the file resolve against the directory containing the
//! config file, so a checked-in config travels with its fixture tree. The
//! `FSV_DATA_ROOT` environment variable and command-line flags override
//! individual fields after loading.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::PredictionSource;
use crate::error::{Error, Result};
use crate::ipc::LayerKind;
use crate::metrics::Grouping;
use crate::period::{PeriodId, PeriodRange};

/// Environment variable overriding the configured data root.
pub const DATA_ROOT_ENV: &str = "FSV_DATA_ROOT";

/// Default sliver threshold in square degrees.
pub const DEFAULT_AREA_THRESHOLD: f64 = 0.005;
/// Default minimum covered fraction for a classification to count.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.5;

/// Fully resolved, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory holding `<REGION>/<YYYYMM>/<KIND>.<ext>` trees.
    pub data_root: PathBuf,
    /// Directory all outputs are written under (created on demand).
    pub output_dir: PathBuf,
    /// Fixed admin base layer.
    pub admin_path: PathBuf,
    /// Fixed livelihood base layer.
    pub livelihood_path: PathBuf,
    /// Vintage date of the base layers, recorded in output metadata.
    pub base_as_of: String,
    /// Sliver filter threshold (square degrees, strict below).
    pub area_threshold: f64,
    /// Minimum covered fraction (inclusive at the threshold).
    pub coverage_threshold: f64,
    /// Apply the sliver filter after every overlay step, not only the last.
    pub filter_each_step: bool,
    /// IPC values treated as "no data" rather than classifications.
    pub sentinels: Vec<i64>,
    /// Attribute-name rules, first match wins; fallback is the kind name.
    pub ipc_attributes: Vec<AttributeRule>,
    /// Prediction sources to generate and score.
    pub sources: Vec<PredictionSource>,
    /// Groupings to report.
    pub groupings: Vec<Grouping>,
    /// Optional restriction of the periods considered.
    pub periods: Option<PeriodRange>,
    /// Also score ML2 against CS two cycles ahead.
    pub score_ml2: bool,
}

/// Maps a span of publication years to the attribute names carrying IPC
/// values in files from those years (names drifted across releases).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRule {
    /// First year the rule applies to (open start when absent).
    pub from_year: Option<u16>,
    /// Last year the rule applies to, inclusive (open end when absent).
    pub to_year: Option<u16>,
    pub cs: Option<String>,
    pub ml1: Option<String>,
    pub ml2: Option<String>,
}

impl AttributeRule {
    fn matches(&self, year: u16) -> bool {
        self.from_year.is_none_or(|y| year >= y) && self.to_year.is_none_or(|y| year <= y)
    }

    fn name_for(&self, kind: LayerKind) -> Option<&str> {
        match kind {
            LayerKind::Cs => self.cs.as_deref(),
            LayerKind::Ml1 => self.ml1.as_deref(),
            LayerKind::Ml2 => self.ml2.as_deref(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_root: Option<PathBuf>,
    pub periods: Option<PeriodRange>,
    pub sources: Option<Vec<PredictionSource>>,
    pub area_threshold: Option<f64>,
    pub coverage_threshold: Option<f64>,
}

// ---------------------------------------------------------------------------
// Raw TOML shape (everything optional with defaults, paths still relative).

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data_root: Option<String>,
    output_dir: Option<String>,
    #[serde(default)]
    base: RawBase,
    #[serde(default)]
    thresholds: RawThresholds,
    #[serde(default)]
    ipc: RawIpc,
    #[serde(default)]
    evaluation: RawEvaluation,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBase {
    admin: Option<String>,
    livelihood: Option<String>,
    as_of: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThresholds {
    area: Option<f64>,
    coverage: Option<f64>,
    filter_each_step: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIpc {
    sentinels: Option<Vec<i64>>,
    #[serde(default)]
    attributes: Vec<AttributeRule>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluation {
    sources: Option<Vec<String>>,
    groupings: Option<Vec<String>>,
    periods: Option<String>,
    score_ml2: Option<bool>,
}

impl RunConfig {
    /// Load a config file, resolve relative paths against its directory,
    /// apply the environment override, then the flag overrides, then
    /// validate.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut config = RunConfig::from_raw(raw, base_dir)?;

        if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
            if !root.is_empty() {
                config.data_root = PathBuf::from(root);
            }
        }
        if let Some(root) = &overrides.data_root {
            config.data_root = root.clone();
        }
        if let Some(p) = &overrides.periods {
            config.periods = Some(*p);
        }
        if let Some(s) = &overrides.sources {
            config.sources = s.clone();
        }
        if let Some(a) = overrides.area_threshold {
            config.area_threshold = a;
        }
        if let Some(c) = overrides.coverage_threshold {
            config.coverage_threshold = c;
        }
        config.validate()?;
        Ok(config)
    }

    fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<RunConfig> {
        let resolve = |p: &str| -> PathBuf {
            let path = Path::new(p);
            if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            }
        };
        let required = |field: &str, value: Option<String>| -> Result<String> {
            value.ok_or_else(|| Error::Config(format!("missing required config field `{field}`")))
        };

        let sources = match raw.evaluation.sources {
            None => PredictionSource::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<Vec<_>>>()?,
        };
        let groupings = match raw.evaluation.groupings {
            None => Grouping::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<Vec<_>>>()?,
        };
        let periods = raw
            .evaluation
            .periods
            .as_deref()
            .map(PeriodRange::parse)
            .transpose()?;

        Ok(RunConfig {
            data_root: resolve(&required("data_root", raw.data_root)?),
            output_dir: resolve(&required("output_dir", raw.output_dir)?),
            admin_path: resolve(&required("base.admin", raw.base.admin)?),
            livelihood_path: resolve(&required("base.livelihood", raw.base.livelihood)?),
            base_as_of: raw.base.as_of.unwrap_or_default(),
            area_threshold: raw.thresholds.area.unwrap_or(DEFAULT_AREA_THRESHOLD),
            coverage_threshold: raw.thresholds.coverage.unwrap_or(DEFAULT_COVERAGE_THRESHOLD),
            filter_each_step: raw.thresholds.filter_each_step.unwrap_or(true),
            sentinels: raw
                .ipc
                .sentinels
                .unwrap_or_else(|| crate::ingest::DEFAULT_SENTINELS.to_vec()),
            ipc_attributes: raw.ipc.attributes,
            sources,
            groupings,
            periods,
            score_ml2: raw.evaluation.score_ml2.unwrap_or(false),
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.area_threshold > 0.0) {
            return Err(Error::Config(format!(
                "area threshold must be positive, got {}",
                self.area_threshold
            )));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "coverage threshold must be in (0, 1], got {}",
                self.coverage_threshold
            )));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("no prediction sources selected".into()));
        }
        if self.groupings.is_empty() {
            return Err(Error::Config("no groupings selected".into()));
        }
        for (name, path) in [
            ("data root", &self.data_root),
            ("admin base layer", &self.admin_path),
            ("livelihood base layer", &self.livelihood_path),
        ] {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// The attribute carrying IPC values for a layer of this period and
    /// kind: first matching rule that names the kind, else the kind name.
    pub fn ipc_attribute(&self, period: PeriodId, kind: LayerKind) -> String {
        self.ipc_attributes
            .iter()
            .filter(|rule| rule.matches(period.year()))
            .find_map(|rule| rule.name_for(kind))
            .unwrap_or(kind.as_str())
            .to_string()
    }

    /// Serializable snapshot embedded in manifests: every effective value,
    /// with paths rendered as they resolved.
    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            data_root: self.data_root.display().to_string(),
            output_dir: self.output_dir.display().to_string(),
            admin_path: self.admin_path.display().to_string(),
            livelihood_path: self.livelihood_path.display().to_string(),
            base_as_of: self.base_as_of.clone(),
            area_threshold: self.area_threshold,
            coverage_threshold: self.coverage_threshold,
            filter_each_step: self.filter_each_step,
            sentinels: self.sentinels.clone(),
            ipc_attributes: self.ipc_attributes.clone(),
            sources: self.sources.iter().map(|s| s.to_string()).collect(),
            groupings: self.groupings.iter().map(|g| g.as_str().into()).collect(),
            periods: self.periods.map(|p| p.to_string()),
            score_ml2: self.score_ml2,
        }
    }
}

/// The effective configuration as recorded in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub data_root: String,
    pub output_dir: String,
    pub admin_path: String,
    pub livelihood_path: String,
    pub base_as_of: String,
    pub area_threshold: f64,
    pub coverage_threshold: f64,
    pub filter_each_step: bool,
    pub sentinels: Vec<i64>,
    pub ipc_attributes: Vec<AttributeRule>,
    pub sources: Vec<String>,
    pub groupings: Vec<String>,
    pub periods: Option<String>,
    pub score_ml2: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.toml");
        fs::write(&path, body).unwrap();
        path
    }

    fn scaffold(dir: &Path) {
        fs::create_dir_all(dir.join("tree")).unwrap();
        fs::create_dir_all(dir.join("base")).unwrap();
        fs::write(dir.join("base/admin.geojson"), "{}").unwrap();
        fs::write(dir.join("base/livelihood.geojson"), "{}").unwrap();
    }

    const MINIMAL: &str = r#"
data_root = "tree"
output_dir = "out"

[base]
admin = "base/admin.geojson"
livelihood = "base/livelihood.geojson"
as_of = "2023-09-01"
"#;

    #[test]
    fn minimal_config_gets_defaults_and_resolved_paths() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let path = write_config(dir.path(), MINIMAL);
        let config = RunConfig::load(&path, &Overrides::default()).unwrap();
        assert_eq!(config.data_root, dir.path().join("tree"));
        assert_eq!(config.output_dir, dir.path().join("out"));
        assert_eq!(config.area_threshold, DEFAULT_AREA_THRESHOLD);
        assert_eq!(config.coverage_threshold, DEFAULT_COVERAGE_THRESHOLD);
        assert!(config.filter_each_step);
        assert_eq!(config.sentinels, vec![0, 66, 88, 99]);
        assert_eq!(config.sources, PredictionSource::ALL.to_vec());
        assert_eq!(config.groupings, Grouping::ALL.to_vec());
        assert_eq!(config.periods, None);
        assert!(!config.score_ml2);
        assert_eq!(config.base_as_of, "2023-09-01");
    }

    #[test]
    fn full_config_round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let body = r#"
data_root = "tree"
output_dir = "out"

[base]
admin = "base/admin.geojson"
livelihood = "base/livelihood.geojson"
as_of = "2023-09-01"

[thresholds]
area = 0.01
coverage = 0.6
filter_each_step = false

[ipc]
sentinels = [99]

[[ipc.attributes]]
from_year = 2016
to_year = 2018
cs = "CS_OLD"

[evaluation]
sources = ["PPS", "max2pp"]
groupings = ["overall", "source"]
periods = "2019-02..2020-10"
score_ml2 = true
"#;
        let path = write_config(dir.path(), body);
        let config = RunConfig::load(&path, &Overrides::default()).unwrap();
        assert_eq!(config.area_threshold, 0.01);
        assert_eq!(config.coverage_threshold, 0.6);
        assert!(!config.filter_each_step);
        assert_eq!(config.sentinels, vec![99]);
        assert_eq!(
            config.sources,
            vec![PredictionSource::Pps, PredictionSource::Max2pp]
        );
        assert_eq!(config.groupings, vec![Grouping::Overall, Grouping::Source]);
        let range = config.periods.unwrap();
        assert!(range.contains(PeriodId::parse("2019-06").unwrap()));
        assert!(!range.contains(PeriodId::parse("2021-02").unwrap()));
        assert!(config.score_ml2);

        // Attribute rules: in range uses the override, out of range the kind.
        let p2017 = PeriodId::parse("2017-06").unwrap();
        let p2020 = PeriodId::parse("2020-06").unwrap();
        assert_eq!(config.ipc_attribute(p2017, LayerKind::Cs), "CS_OLD");
        assert_eq!(config.ipc_attribute(p2017, LayerKind::Ml1), "ML1");
        assert_eq!(config.ipc_attribute(p2020, LayerKind::Cs), "CS");
    }

    #[test]
    fn overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        fs::create_dir_all(dir.path().join("other")).unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let overrides = Overrides {
            data_root: Some(dir.path().join("other")),
            periods: Some(PeriodRange::parse("2020-02..2020-10").unwrap()),
            sources: Some(vec![PredictionSource::Pps]),
            area_threshold: Some(0.002),
            coverage_threshold: Some(0.75),
        };
        let config = RunConfig::load(&path, &overrides).unwrap();
        assert_eq!(config.data_root, dir.path().join("other"));
        assert_eq!(config.sources, vec![PredictionSource::Pps]);
        assert_eq!(config.area_threshold, 0.002);
        assert_eq!(config.coverage_threshold, 0.75);
        assert!(config.periods.is_some());
    }

    #[test]
    fn missing_paths_and_bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());

        // Nonexistent data root.
        let body = MINIMAL.replace("\"tree\"", "\"no-such-dir\"");
        let path = write_config(dir.path(), &body);
        let err = RunConfig::load(&path, &Overrides::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");

        // Zero area threshold.
        let clean = r#"
data_root = "tree"
output_dir = "out"

[base]
admin = "base/admin.geojson"
livelihood = "base/livelihood.geojson"

[thresholds]
area = 0.0
"#;
        let path = write_config(dir.path(), clean);
        let err = RunConfig::load(&path, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("area threshold"), "{err}");

        // Unknown source name.
        let clean = r#"
data_root = "tree"
output_dir = "out"

[base]
admin = "base/admin.geojson"
livelihood = "base/livelihood.geojson"

[evaluation]
sources = ["NOPE"]
"#;
        let path = write_config(dir.path(), clean);
        assert!(RunConfig::load(&path, &Overrides::default()).is_err());

        // Unknown top-level key is rejected (typo guard).
        let clean = r#"
data_root = "tree"
output_dir = "out"
surprise = 1

[base]
admin = "base/admin.geojson"
livelihood = "base/livelihood.geojson"
"#;
        let path = write_config(dir.path(), clean);
        assert!(RunConfig::load(&path, &Overrides::default()).is_err());
    }

    #[test]
    fn snapshot_serializes_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        scaffold(dir.path());
        let path = write_config(dir.path(), MINIMAL);
        let config = RunConfig::load(&path, &Overrides::default()).unwrap();
        let snapshot = config.snapshot();
        let json = serde_json::to_string_pretty(&snapshot).unwrap();
        let back: ConfigSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(back, snapshot);
        assert_eq!(back.sources, vec!["FEWSNET", "PPS", "SPLY", "Max-2PP"]);
    }
}
