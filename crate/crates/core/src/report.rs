//! Report rendering: a JSON metrics document that round-trips, a flat CSV
//! of every metric, and long-format plot-ready CSVs (accuracy over time,
//! country × period accuracy, confusion matrices per period).
//!
//! Numbers in the document are rounded to 9 decimals before serialization
//! so rendered artifacts are byte-stable; undefined metrics serialize as
//! null in JSON and as an empty value column in CSV.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

fn format_error(path: &Path, reason: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn round9_opt(x: Option<f64>) -> Option<f64> {
    x.map(round9)
}

/// Serializable metrics for one group of scored pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<String>,
    pub n: u64,
    pub accuracy: f64,
    /// Rows are actual classes 1..=5, columns predicted.
    pub confusion: [[u64; 5]; 5],
    /// Keyed "1".."5".
    pub per_class: BTreeMap<String, ClassReport>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroReport,
    /// within_band(k) for k = 0, 1, 2.
    pub within_band: [f64; 3],
    pub crisis: CrisisReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// Present classes skipped as undefined, for (precision, recall, f1).
    pub skipped: [u64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrisisReport {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

/// All rendered metrics: grouping name → group key → report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub groupings: BTreeMap<String, BTreeMap<String, GroupReport>>,
}

impl MetricsDocument {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Self {
        let mut doc = MetricsDocument::default();
        for r in reports {
            let per_class = (0..5)
                .map(|c| {
                    (
                        (c + 1).to_string(),
                        ClassReport {
                            precision: round9_opt(r.per_class[c].precision),
                            recall: round9_opt(r.per_class[c].recall),
                            f1: round9_opt(r.per_class[c].f1),
                        },
                    )
                })
                .collect();
            let group = GroupReport {
                source: r.parts.source.map(|s| s.to_string()),
                country: r.parts.country.clone(),
                period: r.parts.period.map(|p| p.to_string()),
                n: r.n,
                accuracy: round9(r.accuracy),
                confusion: r.confusion.counts,
                per_class,
                macro_avg: MacroReport {
                    precision: round9_opt(r.macro_avg.precision),
                    recall: round9_opt(r.macro_avg.recall),
                    f1: round9_opt(r.macro_avg.f1),
                    skipped: r.macro_avg.skipped,
                },
                within_band: r.within_band.map(round9),
                crisis: CrisisReport {
                    precision: round9_opt(r.crisis.precision),
                    recall: round9_opt(r.crisis.recall),
                    f1: round9_opt(r.crisis.f1),
                    accuracy: round9_opt(r.crisis.accuracy),
                },
            };
            doc.groupings
                .entry(r.grouping.as_str().to_string())
                .or_default()
                .insert(r.key.clone(), group);
        }
        doc
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| format_error(path, e))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<MetricsDocument> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| format_error(path, e))
    }
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

/// Flat metric table: one row per (group, metric), 26 metric rows per
/// group in a fixed order. Undefined metrics leave the value empty.
pub fn write_metrics_csv(doc: &MetricsDocument, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_error(path, e))?;
    w.write_record(["grouping", "key", "metric", "value", "n"])
        .map_err(|e| format_error(path, e))?;
    for (grouping, groups) in &doc.groupings {
        for (key, g) in groups {
            let mut rows: Vec<(String, Option<f64>)> = Vec::with_capacity(26);
            rows.push(("accuracy".into(), Some(g.accuracy)));
            for c in 1..=5 {
                let m = &g.per_class[&c.to_string()];
                rows.push((format!("precision_{c}"), m.precision));
                rows.push((format!("recall_{c}"), m.recall));
                rows.push((format!("f1_{c}"), m.f1));
            }
            rows.push(("macro_precision".into(), g.macro_avg.precision));
            rows.push(("macro_recall".into(), g.macro_avg.recall));
            rows.push(("macro_f1".into(), g.macro_avg.f1));
            for k in 0..3 {
                rows.push((format!("within_band_{k}"), Some(g.within_band[k])));
            }
            rows.push(("crisis_precision".into(), g.crisis.precision));
            rows.push(("crisis_recall".into(), g.crisis.recall));
            rows.push(("crisis_f1".into(), g.crisis.f1));
            rows.push(("crisis_accuracy".into(), g.crisis.accuracy));
            for (metric, value) in rows {
                w.write_record([
                    grouping.as_str(),
                    key.as_str(),
                    &metric,
                    &fmt_value(value),
                    &g.n.to_string(),
                ])
                .map_err(|e| format_error(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| format_error(path, e))?;
    Ok(())
}

/// Accuracy per source over time (long format for a line plot).
pub fn write_accuracy_over_time_csv(doc: &MetricsDocument, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_error(path, e))?;
    w.write_record(["source", "period", "accuracy", "n"])
        .map_err(|e| format_error(path, e))?;
    if let Some(groups) = doc.groupings.get("source_period") {
        for g in groups.values() {
            let (Some(source), Some(period)) = (&g.source, &g.period) else {
                continue;
            };
            w.write_record([
                source.as_str(),
                period.as_str(),
                &format!("{:.6}", g.accuracy),
                &g.n.to_string(),
            ])
            .map_err(|e| format_error(path, e))?;
        }
    }
    w.flush().map_err(|e| format_error(path, e))?;
    Ok(())
}

/// Accuracy per source × country × period (long format for a heat-map).
pub fn write_country_period_accuracy_csv(doc: &MetricsDocument, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_error(path, e))?;
    w.write_record(["source", "country", "period", "accuracy", "n"])
        .map_err(|e| format_error(path, e))?;
    if let Some(groups) = doc.groupings.get("source_country_period") {
        for g in groups.values() {
            let (Some(source), Some(country), Some(period)) = (&g.source, &g.country, &g.period)
            else {
                continue;
            };
            w.write_record([
                source.as_str(),
                country.as_str(),
                period.as_str(),
                &format!("{:.6}", g.accuracy),
                &g.n.to_string(),
            ])
            .map_err(|e| format_error(path, e))?;
        }
    }
    w.flush().map_err(|e| format_error(path, e))?;
    Ok(())
}

/// Full confusion matrices per source × period, one row per cell
/// (zero cells included so every matrix is complete).
pub fn write_confusion_by_period_csv(doc: &MetricsDocument, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format_error(path, e))?;
    w.write_record(["source", "period", "actual", "predicted", "count"])
        .map_err(|e| format_error(path, e))?;
    if let Some(groups) = doc.groupings.get("source_period") {
        for g in groups.values() {
            let (Some(source), Some(period)) = (&g.source, &g.period) else {
                continue;
            };
            for a in 0..5 {
                for p in 0..5 {
                    w.write_record([
                        source.as_str(),
                        period.as_str(),
                        &(a + 1).to_string(),
                        &(p + 1).to_string(),
                        &g.confusion[a][p].to_string(),
                    ])
                    .map_err(|e| format_error(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| format_error(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::PredictionSource;
    use crate::ipc::IpcClass;
    use crate::metrics::{score, Grouping, ScoredPair};
    use crate::period::PeriodId;

    fn pair(source: PredictionSource, period: &str, country: &str, p: u8, a: u8) -> ScoredPair {
        ScoredPair {
            atom_id: "x".into(),
            target_period: PeriodId::parse(period).unwrap(),
            source,
            predicted: IpcClass::new(p).unwrap(),
            actual: IpcClass::new(a).unwrap(),
            country: country.into(),
            partial: false,
        }
    }

    fn sample_pairs() -> Vec<ScoredPair> {
        vec![
            pair(PredictionSource::Fewsnet, "2021-02", "AAA", 1, 1),
            pair(PredictionSource::Fewsnet, "2021-02", "AAA", 2, 3),
            pair(PredictionSource::Fewsnet, "2021-06", "BBB", 3, 3),
            pair(PredictionSource::Pps, "2021-02", "AAA", 4, 4),
            pair(PredictionSource::Pps, "2021-06", "BBB", 5, 3),
        ]
    }

    fn sample_document() -> MetricsDocument {
        let pairs = sample_pairs();
        let mut reports = Vec::new();
        for grouping in Grouping::ALL {
            reports.extend(score(&pairs, grouping).unwrap());
        }
        MetricsDocument::from_reports(&reports)
    }

    #[test]
    fn document_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.json");
        let doc = sample_document();
        doc.write_json(&path).unwrap();
        let back = MetricsDocument::read_json(&path).unwrap();
        assert_eq!(back, doc);
        // Second write of the round-tripped document is byte-identical.
        let path2 = dir.path().join("metrics2.json");
        back.write_json(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn csv_has_26_rows_per_group_in_fixed_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let doc = sample_document();
        write_metrics_csv(&doc, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "grouping,key,metric,value,n");
        let group_count: usize = doc.groupings.values().map(|g| g.len()).sum();
        assert_eq!(lines.len(), 1 + 26 * group_count);

        // The overall block comes from grouping "overall", key "all".
        let overall: Vec<&&str> = lines.iter().filter(|l| l.starts_with("overall,")).collect();
        assert_eq!(overall.len(), 26);
        assert!(overall[0].starts_with("overall,all,accuracy,0.600000,5"));
        // Undefined metrics render as an empty value field.
        assert!(text.contains(",recall_5,,"), "class 5 never actual");
        let metrics: Vec<&str> = overall
            .iter()
            .map(|l| l.split(',').nth(2).unwrap())
            .collect();
        assert_eq!(metrics[0], "accuracy");
        assert_eq!(metrics[1], "precision_1");
        assert_eq!(metrics[16], "macro_precision");
        assert_eq!(metrics[19], "within_band_0");
        assert_eq!(metrics[22], "crisis_precision");
        assert_eq!(metrics[25], "crisis_accuracy");
    }

    #[test]
    fn plot_csvs_cover_expected_rows() {
        let dir = tempfile::tempdir().unwrap();
        let doc = sample_document();

        let path = dir.path().join("accuracy_over_time.csv");
        write_accuracy_over_time_csv(&doc, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "source,period,accuracy,n");
        // FEWSNET appears in two periods, PPS in two.
        assert_eq!(lines.len(), 1 + 4);
        assert_eq!(lines[1], "FEWSNET,2021-02,0.500000,2");
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 4));

        let path = dir.path().join("country_period_accuracy.csv");
        write_country_period_accuracy_csv(&doc, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "source,country,period,accuracy,n");
        assert_eq!(lines.len(), 1 + 4);
        assert_eq!(lines[1], "FEWSNET,AAA,2021-02,0.500000,2");

        let path = dir.path().join("confusion_by_period.csv");
        write_confusion_by_period_csv(&doc, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "source,period,actual,predicted,count");
        assert_eq!(lines.len(), 1 + 4 * 25);
        // FEWSNET 2021-02: actual 1 predicted 1 once; actual 3 predicted 2 once.
        assert!(lines.contains(&"FEWSNET,2021-02,1,1,1"));
        assert!(lines.contains(&"FEWSNET,2021-02,3,2,1"));
        assert!(lines.contains(&"FEWSNET,2021-02,5,5,0"));
        let total: u64 = lines
            .iter()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn rounding_is_applied_before_serialization() {
        let pairs = vec![
            pair(PredictionSource::Fewsnet, "2021-02", "AAA", 1, 1),
            pair(PredictionSource::Fewsnet, "2021-02", "AAA", 1, 1),
            pair(PredictionSource::Fewsnet, "2021-02", "AAA", 1, 2),
        ];
        let reports = score(&pairs, Grouping::Overall).unwrap();
        let doc = MetricsDocument::from_reports(&reports);
        let g = &doc.groupings["overall"]["all"];
        assert_eq!(g.accuracy, 0.666666667);
        assert_eq!(g.per_class["1"].precision, Some(0.666666667));
    }
}
