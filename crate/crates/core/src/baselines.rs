//! Prediction sources: the published near-term projection (FEWSNET ML1)
//! and three rule-based reference models scored against the same ground
//! truth.
//!
//! All four emit predictions for the period after the issuing one; the
//! scoring join against that period's current situation happens in the
//! metrics module. Missing history is never imputed: a source that cannot
//! form its rule for an atom skips it (counted, and for Max-2PP optionally
//! downgraded to a single-period fallback tagged `partial`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::atoms::Panel;
use crate::error::{Error, Result};
use crate::ipc::{IpcClass, LayerKind};
use crate::period::PeriodId;

/// Who produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredictionSource {
    /// The published ML1 projection itself.
    Fewsnet,
    /// Previous-period persistence: predict CS(t) for t+1.
    Pps,
    /// Same period last year: predict CS(target − 3 cycles).
    Sply,
    /// Worst of the last two periods: max(CS(t), CS(t−1)).
    Max2pp,
}

impl PredictionSource {
    pub const ALL: [PredictionSource; 4] = [
        PredictionSource::Fewsnet,
        PredictionSource::Pps,
        PredictionSource::Sply,
        PredictionSource::Max2pp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PredictionSource::Fewsnet => "FEWSNET",
            PredictionSource::Pps => "PPS",
            PredictionSource::Sply => "SPLY",
            PredictionSource::Max2pp => "Max-2PP",
        }
    }
}

impl fmt::Display for PredictionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<PredictionSource> {
        let normalized: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match normalized.as_str() {
            "FEWSNET" => Ok(PredictionSource::Fewsnet),
            "PPS" => Ok(PredictionSource::Pps),
            "SPLY" => Ok(PredictionSource::Sply),
            "MAX2PP" => Ok(PredictionSource::Max2pp),
            _ => Err(Error::Config(format!("unknown prediction source {s:?}"))),
        }
    }
}

/// One predicted IPC class for one atom at one target period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub atom_id: String,
    /// The period whose current situation serves as ground truth.
    pub target_period: PeriodId,
    pub source: PredictionSource,
    pub ipc: IpcClass,
    /// Max-2PP only: the rule fell back to a single available period.
    pub partial: bool,
}

/// Per-source bookkeeping for the run manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionStats {
    pub fewsnet_emitted: u64,
    pub pps_emitted: u64,
    pub sply_emitted: u64,
    /// Atoms with a CS row at the issuing period whose same-cycle
    /// previous-year CS was missing.
    pub sply_skipped_no_history: u64,
    pub max2pp_emitted: u64,
    pub max2pp_partial: u64,
}

/// Publishes ML1 at `p` as the prediction for `next(p)`.
pub fn predict_fewsnet(panel: &Panel, p: PeriodId) -> Vec<Prediction> {
    let target = p.next();
    panel
        .atoms_with(p, LayerKind::Ml1)
        .into_iter()
        .map(|atom_id| Prediction {
            atom_id: atom_id.to_string(),
            target_period: target,
            source: PredictionSource::Fewsnet,
            ipc: panel.get(atom_id, p, LayerKind::Ml1).unwrap(),
            partial: false,
        })
        .collect()
}

/// Previous-period persistence: CS at `p` predicts `next(p)` unchanged.
pub fn predict_pps(panel: &Panel, p: PeriodId) -> Vec<Prediction> {
    let target = p.next();
    panel
        .atoms_with(p, LayerKind::Cs)
        .into_iter()
        .map(|atom_id| Prediction {
            atom_id: atom_id.to_string(),
            target_period: target,
            source: PredictionSource::Pps,
            ipc: panel.cs(atom_id, p).unwrap(),
            partial: false,
        })
        .collect()
}

/// Same period last year: CS three cycles before the target. Returns the
/// predictions plus the number of atoms skipped for missing history.
pub fn predict_sply(panel: &Panel, p: PeriodId) -> (Vec<Prediction>, u64) {
    let target = p.next();
    let Some(source_period) = target.minus_cycles(3) else {
        // Whole target before the panel's scope floor: skip the cohort
        // that was classified at the issuing period.
        return (Vec::new(), panel.atoms_with(p, LayerKind::Cs).len() as u64);
    };
    let mut predictions = Vec::new();
    let mut skipped = 0u64;
    for atom_id in panel.atoms_with(p, LayerKind::Cs) {
        match panel.cs(atom_id, source_period) {
            Some(ipc) => predictions.push(Prediction {
                atom_id: atom_id.to_string(),
                target_period: target,
                source: PredictionSource::Sply,
                ipc,
                partial: false,
            }),
            None => skipped += 1,
        }
    }
    (predictions, skipped)
}

/// Worst of the two most recent assessments: max(CS(p), CS(prev(p))).
/// With only one of the two available, that one is used and the
/// prediction is tagged partial.
pub fn predict_max2pp(panel: &Panel, p: PeriodId) -> Vec<Prediction> {
    let target = p.next();
    let prev = p.prev();
    // Universe: atoms classified in either of the two lookback periods.
    let mut atom_ids: Vec<&str> = panel.atoms_with(p, LayerKind::Cs);
    if let Some(prev) = prev {
        atom_ids.extend(panel.atoms_with(prev, LayerKind::Cs));
    }
    atom_ids.sort_unstable();
    atom_ids.dedup();

    atom_ids
        .into_iter()
        .map(|atom_id| {
            let latest = panel.cs(atom_id, p);
            let older = prev.and_then(|q| panel.cs(atom_id, q));
            let (ipc, partial) = match (latest, older) {
                (Some(a), Some(b)) => (a.max(b), false),
                (Some(a), None) => (a, true),
                (None, Some(b)) => (b, true),
                (None, None) => unreachable!("atom came from one of the two cohorts"),
            };
            Prediction {
                atom_id: atom_id.to_string(),
                target_period: target,
                source: PredictionSource::Max2pp,
                ipc,
                partial,
            }
        })
        .collect()
}

/// Run the selected sources over every panel period. The result is sorted
/// by (source, target_period, atom_id) — the canonical table order.
pub fn generate(panel: &Panel, sources: &[PredictionSource]) -> (Vec<Prediction>, PredictionStats) {
    let mut all = Vec::new();
    let mut stats = PredictionStats::default();
    for p in panel.periods() {
        for source in sources {
            match source {
                PredictionSource::Fewsnet => {
                    let preds = predict_fewsnet(panel, p);
                    stats.fewsnet_emitted += preds.len() as u64;
                    all.extend(preds);
                }
                PredictionSource::Pps => {
                    let preds = predict_pps(panel, p);
                    stats.pps_emitted += preds.len() as u64;
                    all.extend(preds);
                }
                PredictionSource::Sply => {
                    let (preds, skipped) = predict_sply(panel, p);
                    stats.sply_emitted += preds.len() as u64;
                    stats.sply_skipped_no_history += skipped;
                    all.extend(preds);
                }
                PredictionSource::Max2pp => {
                    let preds = predict_max2pp(panel, p);
                    stats.max2pp_emitted += preds.len() as u64;
                    stats.max2pp_partial += preds.iter().filter(|x| x.partial).count() as u64;
                    all.extend(preds);
                }
            }
        }
    }
    all.sort_by(|a, b| {
        (a.source, a.target_period, &a.atom_id).cmp(&(b.source, b.target_period, &b.atom_id))
    });
    (all, stats)
}

/// Persist predictions as CSV: `atom_id,target_period,source,ipc,partial`.
pub fn write_predictions_csv(predictions: &[Prediction], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["atom_id", "target_period", "source", "ipc", "partial"])?;
    for p in predictions {
        w.write_record([
            p.atom_id.as_str(),
            &p.target_period.to_string(),
            p.source.as_str(),
            &p.ipc.to_string(),
            if p.partial { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions_jsonl(predictions: &[Prediction], path: &Path) -> Result<()> {
    let mut text = String::new();
    for p in predictions {
        let obj = json!({
            "atom_id": p.atom_id,
            "target_period": p.target_period.to_string(),
            "source": p.source.as_str(),
            "ipc": p.ipc.value(),
            "partial": p.partial,
        });
        text.push_str(&serde_json::to_string(&obj)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<Prediction>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 5 {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("prediction row with {} columns, expected 5", record.len()),
            });
        }
        let ipc_value: i64 = record[3].parse().map_err(|_| Error::Format {
            path: path.display().to_string(),
            reason: format!("bad ipc value {:?}", &record[3]),
        })?;
        out.push(Prediction {
            atom_id: record[0].to_string(),
            target_period: PeriodId::parse(&record[1])?,
            source: record[2].parse()?,
            ipc: IpcClass::try_from(ipc_value)?,
            partial: &record[4] == "true",
        });
    }
    Ok(out)
}
