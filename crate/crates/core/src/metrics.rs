//! Scoring: predictions against the target period's current situation.
//!
//! Pairs come from a strict inner join — an atom-period with a prediction
//! but no ground truth (or vice versa) is simply not scored. Every atom
//! counts equally. Metrics with a zero denominator are *undefined* and
//! reported as such, never coerced to 0 or 1; macro averages run over the
//! classes present in the grouping's actuals and skip (and count) the
//! undefined entries.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::atoms::Panel;
use crate::baselines::{Prediction, PredictionSource};
use crate::error::{Error, Result};
use crate::ipc::{IpcClass, LayerKind};
use crate::period::PeriodId;

/// One scored observation: what a source predicted for an atom-period and
/// what the next assessment actually said.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredPair {
    pub atom_id: String,
    pub target_period: PeriodId,
    pub source: PredictionSource,
    pub predicted: IpcClass,
    pub actual: IpcClass,
    /// Carried from the atom for grouping.
    pub country: String,
    pub partial: bool,
}

/// Inner join of a prediction table against the panel's CS rows.
pub fn join_pairs(predictions: &[Prediction], panel: &Panel) -> Vec<ScoredPair> {
    predictions
        .iter()
        .filter_map(|p| {
            let actual = panel.get(&p.atom_id, p.target_period, LayerKind::Cs)?;
            let country = panel
                .metas
                .get(&p.atom_id)
                .map(|m| m.country.clone())
                .unwrap_or_default();
            Some(ScoredPair {
                atom_id: p.atom_id.clone(),
                target_period: p.target_period,
                source: p.source,
                predicted: p.ipc,
                actual,
                country,
                partial: p.partial,
            })
        })
        .collect()
}

/// 5×5 contingency table; rows are actual classes, columns predicted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 5]; 5],
}

impl ConfusionMatrix {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a ScoredPair>) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for pair in pairs {
            cm.counts[pair.actual.index()][pair.predicted.index()] += 1;
        }
        cm
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for a in 0..5 {
            for p in 0..5 {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..5).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, actual_index: usize) -> u64 {
        self.counts[actual_index].iter().sum()
    }

    pub fn col_sum(&self, predicted_index: usize) -> u64 {
        (0..5).map(|a| self.counts[a][predicted_index]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.trace(), self.total())
    }

    /// Fraction of observations within ±k classes of the truth.
    pub fn within_band(&self, k: usize) -> Option<f64> {
        let mut hits = 0u64;
        for a in 0usize..5 {
            for p in 0usize..5 {
                if a.abs_diff(p) <= k {
                    hits += self.counts[a][p];
                }
            }
        }
        ratio(hits, self.total())
    }
}

fn ratio(numerator: u64, denominator: u64) -> Option<f64> {
    if denominator == 0 {
        None
    } else {
        Some(numerator as f64 / denominator as f64)
    }
}

/// Undefined-aware harmonic mean of precision and recall.
pub fn f1_from(precision: Option<f64>, recall: Option<f64>) -> Option<f64> {
    match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    }
}

/// One-vs-rest metrics for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Averages over classes present in the actuals, skipping (and counting)
/// entries that are undefined for a present class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MacroAverages {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    /// How many present classes were skipped for (precision, recall, f1).
    pub skipped: [u64; 3],
}

/// Binary crisis view: both sides thresholded at IPC ≥ 3, crisis positive.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CrisisMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

pub fn class_metrics(cm: &ConfusionMatrix, class_index: usize) -> ClassMetrics {
    let diag = cm.counts[class_index][class_index];
    let precision = ratio(diag, cm.col_sum(class_index));
    let recall = ratio(diag, cm.row_sum(class_index));
    ClassMetrics {
        precision,
        recall,
        f1: f1_from(precision, recall),
    }
}

pub fn macro_averages(cm: &ConfusionMatrix, per_class: &[ClassMetrics; 5]) -> MacroAverages {
    let mut sums = [0.0f64; 3];
    let mut counts = [0u64; 3];
    let mut skipped = [0u64; 3];
    for c in 0..5 {
        if cm.row_sum(c) == 0 {
            continue; // class absent from the actuals: not averaged over
        }
        for (slot, value) in [per_class[c].precision, per_class[c].recall, per_class[c].f1]
            .into_iter()
            .enumerate()
        {
            match value {
                Some(v) => {
                    sums[slot] += v;
                    counts[slot] += 1;
                }
                None => skipped[slot] += 1,
            }
        }
    }
    let avg = |slot: usize| {
        if counts[slot] == 0 {
            None
        } else {
            Some(sums[slot] / counts[slot] as f64)
        }
    };
    MacroAverages {
        precision: avg(0),
        recall: avg(1),
        f1: avg(2),
        skipped,
    }
}

pub fn crisis_metrics(cm: &ConfusionMatrix, threshold: IpcClass) -> CrisisMetrics {
    let t = threshold.index();
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let mut tn = 0u64;
    for a in 0..5 {
        for p in 0..5 {
            let n = cm.counts[a][p];
            match (a >= t, p >= t) {
                (true, true) => tp += n,
                (false, true) => fp += n,
                (true, false) => fn_ += n,
                (false, false) => tn += n,
            }
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    CrisisMetrics {
        precision,
        recall,
        f1: f1_from(precision, recall),
        accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
    }
}

/// Micro-averaged one-vs-rest precision and recall (pooled counts). Both
/// collapse to trace/total for a single-label confusion matrix; the
/// identity with accuracy is asserted in tests.
pub fn micro_precision_recall(cm: &ConfusionMatrix) -> (Option<f64>, Option<f64>) {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for c in 0..5 {
        let diag = cm.counts[c][c];
        tp += diag;
        fp += cm.col_sum(c) - diag;
        fn_ += cm.row_sum(c) - diag;
    }
    (ratio(tp, tp + fp), ratio(tp, tp + fn_))
}

/// How scored pairs are partitioned into report groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Grouping {
    Overall,
    Source,
    Period,
    Country,
    SourcePeriod,
    SourceCountry,
    SourceCountryPeriod,
}

impl Grouping {
    pub const ALL: [Grouping; 7] = [
        Grouping::Overall,
        Grouping::Source,
        Grouping::Period,
        Grouping::Country,
        Grouping::SourcePeriod,
        Grouping::SourceCountry,
        Grouping::SourceCountryPeriod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Overall => "overall",
            Grouping::Source => "source",
            Grouping::Period => "period",
            Grouping::Country => "country",
            Grouping::SourcePeriod => "source_period",
            Grouping::SourceCountry => "source_country",
            Grouping::SourceCountryPeriod => "source_country_period",
        }
    }

    /// The group a pair belongs to. Key parts are joined with `|`.
    fn parts_of(self, pair: &ScoredPair) -> GroupParts {
        let mut parts = GroupParts::default();
        match self {
            Grouping::Overall => {}
            Grouping::Source => parts.source = Some(pair.source),
            Grouping::Period => parts.period = Some(pair.target_period),
            Grouping::Country => parts.country = Some(pair.country.clone()),
            Grouping::SourcePeriod => {
                parts.source = Some(pair.source);
                parts.period = Some(pair.target_period);
            }
            Grouping::SourceCountry => {
                parts.source = Some(pair.source);
                parts.country = Some(pair.country.clone());
            }
            Grouping::SourceCountryPeriod => {
                parts.source = Some(pair.source);
                parts.country = Some(pair.country.clone());
                parts.period = Some(pair.target_period);
            }
        }
        parts
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Grouping> {
        Grouping::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown grouping {s:?}")))
    }
}

/// Structured group identity: source, then country, then period — rendered
/// in that order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupParts {
    pub source: Option<PredictionSource>,
    pub country: Option<String>,
    pub period: Option<PeriodId>,
}

impl GroupParts {
    pub fn key(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if let Some(s) = self.source {
            parts.push(s.to_string());
        }
        if let Some(c) = &self.country {
            parts.push(c.clone());
        }
        if let Some(p) = self.period {
            parts.push(p.to_string());
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join("|")
        }
    }
}

/// Confusion matrix plus every derived metric for one group of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub grouping: Grouping,
    pub parts: GroupParts,
    pub key: String,
    pub n: u64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: [ClassMetrics; 5],
    pub macro_avg: MacroAverages,
    /// Index k holds within_band(k) for k = 0, 1, 2.
    pub within_band: [f64; 3],
    pub crisis: CrisisMetrics,
}

/// Score one grouping. Groups are emitted in ascending key order. An empty
/// pair set is an `EmptyJoin` error — the caller decides whether that is
/// fatal (overall) or a warning (sub-groupings never produce empty groups
/// by construction).
pub fn score(pairs: &[ScoredPair], grouping: Grouping) -> Result<Vec<MetricsReport>> {
    if pairs.is_empty() {
        return Err(Error::EmptyJoin(format!(
            "no scored pairs for grouping {}",
            grouping.as_str()
        )));
    }
    let mut groups: BTreeMap<String, (GroupParts, Vec<&ScoredPair>)> = BTreeMap::new();
    for pair in pairs {
        let parts = grouping.parts_of(pair);
        groups
            .entry(parts.key())
            .or_insert_with(|| (parts, Vec::new()))
            .1
            .push(pair);
    }
    let reports = groups
        .into_iter()
        .map(|(key, (parts, members))| report_for(grouping, parts, key, &members))
        .collect();
    Ok(reports)
}

fn report_for(
    grouping: Grouping,
    parts: GroupParts,
    key: String,
    members: &[&ScoredPair],
) -> MetricsReport {
    let confusion = ConfusionMatrix::from_pairs(members.iter().copied());
    let per_class = std::array::from_fn(|c| class_metrics(&confusion, c));
    let macro_avg = macro_averages(&confusion, &per_class);
    let within_band =
        std::array::from_fn(|k| confusion.within_band(k).expect("group is non-empty"));
    MetricsReport {
        grouping,
        parts,
        key,
        n: confusion.total(),
        accuracy: confusion.accuracy().expect("group is non-empty"),
        per_class,
        macro_avg,
        within_band,
        crisis: crisis_metrics(&confusion, IpcClass::new(3).unwrap()),
        confusion,
    }
}
