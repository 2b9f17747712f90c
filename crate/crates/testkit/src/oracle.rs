//! Reference implementations: slow, simple, and independent of production code.

use fsv_core::geom::region::Region;
use rand::Rng;

/// Even-odd point-in-ring test casting a ray straight up (production casts
/// horizontally, so the two share no code path and few failure modes).
/// `ring` must be closed (first == last).
pub fn ray_up_in_ring(pt: [f64; 2], ring: &[[f64; 2]]) -> bool {
    let [px, py] = pt;
    let mut crossings = 0usize;
    for w in ring.windows(2) {
        let [x0, y0] = w[0];
        let [x1, y1] = w[1];
        // Does the edge cross the vertical line x = px above py?
        if (x0 > px) != (x1 > px) {
            let y_cross = y0 + (px - x0) / (x1 - x0) * (y1 - y0);
            if y_cross > py {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

/// Even-odd membership across every ring of a multi-polygon.
pub fn in_region(pt: [f64; 2], region: &Region) -> bool {
    let mut parity = false;
    for ring in region.rings() {
        if ray_up_in_ring(pt, ring) {
            parity = !parity;
        }
    }
    parity
}

/// Stratified Monte-Carlo area estimate: one jittered sample per cell of a
/// `grid` x `grid` lattice over `bbox`, times the bbox area.
pub fn mc_area<F>(bbox: [f64; 4], grid: usize, rng: &mut impl Rng, mut inside: F) -> f64
where
    F: FnMut([f64; 2]) -> bool,
{
    let [x0, y0, x1, y1] = bbox;
    let (w, h) = (x1 - x0, y1 - y0);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let (dx, dy) = (w / grid as f64, h / grid as f64);
    let mut hits = 0u64;
    for iy in 0..grid {
        for ix in 0..grid {
            let px = x0 + (ix as f64 + rng.random_range(0.0..1.0)) * dx;
            let py = y0 + (iy as f64 + rng.random_range(0.0..1.0)) * dy;
            if inside([px, py]) {
                hits += 1;
            }
        }
    }
    hits as f64 / (grid * grid) as f64 * w * h
}

/// Monte-Carlo estimate of a region's area over its own bounding box.
pub fn mc_region_area(region: &Region, grid: usize, rng: &mut impl Rng) -> f64 {
    match region.bbox() {
        Some(bbox) => mc_area(bbox, grid, rng, |pt| in_region(pt, region)),
        None => 0.0,
    }
}

/// Axis-aligned rectangle for the brute-force clipping oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            x0: self.x0.max(other.x0),
            y0: self.y0.max(other.y0),
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
        };
        (r.x1 > r.x0 && r.y1 > r.y0).then_some(r)
    }
}

/// Every positive-area pairwise overlap between two rectangle layers, as
/// (index into a, index into b, overlap). Direct interval arithmetic.
pub fn clip_rect_layers(a: &[Rect], b: &[Rect]) -> Vec<(usize, usize, Rect)> {
    let mut out = Vec::new();
    for (i, ra) in a.iter().enumerate() {
        for (j, rb) in b.iter().enumerate() {
            if let Some(r) = ra.intersect(rb) {
                out.push((i, j, r));
            }
        }
    }
    out
}

/// Per-class precision/recall/F1 from direct counting. None means the
/// denominator was zero (metric undefined, never reported as 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteClass {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Full metric suite computed by brute force over label vectors (1..=5).
#[derive(Debug, Clone)]
pub struct BruteMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub per_class: [BruteClass; 5],
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    /// Classes present in actuals whose metric was undefined and skipped,
    /// for (precision, recall, f1) respectively.
    pub macro_skipped: [usize; 3],
    /// Fraction with |pred - actual| <= k for k = 0, 1, 2.
    pub within: [f64; 3],
    pub crisis_precision: Option<f64>,
    pub crisis_recall: Option<f64>,
    pub crisis_f1: Option<f64>,
    pub crisis_accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1_of(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    }
}

/// Count every metric with straight loops over the two vectors.
/// Panics if the vectors differ in length, are empty, or hold values
/// outside 1..=5; oracle inputs are expected to be well-formed.
pub fn brute_metrics(pred: &[u8], actual: &[u8]) -> BruteMetrics {
    assert_eq!(pred.len(), actual.len());
    assert!(!pred.is_empty());
    let n = pred.len();
    assert!(pred.iter().chain(actual).all(|v| (1..=5).contains(v)));

    let count = |f: &dyn Fn(u8, u8) -> bool| -> u64 {
        pred.iter().zip(actual).filter(|&(&p, &a)| f(p, a)).count() as u64
    };

    let correct = count(&|p, a| p == a);
    let accuracy = correct as f64 / n as f64;

    let mut per_class = [BruteClass::default(); 5];
    for c in 1..=5u8 {
        let tp = count(&|p, a| p == c && a == c);
        let fp = count(&|p, a| p == c && a != c);
        let fn_ = count(&|p, a| a == c && p != c);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        per_class[(c - 1) as usize] = BruteClass {
            precision,
            recall,
            f1: f1_of(precision, recall),
        };
    }

    // Macro averages run over classes present in the actuals; undefined
    // entries are skipped and counted rather than treated as zero.
    let mut sums = [0.0f64; 3];
    let mut defined = [0usize; 3];
    let mut skipped = [0usize; 3];
    for c in 1..=5u8 {
        if count(&|_, a| a == c) == 0 {
            continue;
        }
        let m = per_class[(c - 1) as usize];
        for (slot, v) in [m.precision, m.recall, m.f1].into_iter().enumerate() {
            match v {
                Some(v) => {
                    sums[slot] += v;
                    defined[slot] += 1;
                }
                None => skipped[slot] += 1,
            }
        }
    }
    let macro_of = |slot: usize| (defined[slot] > 0).then(|| sums[slot] / defined[slot] as f64);

    let mut within = [0.0f64; 3];
    for (k, slot) in within.iter_mut().enumerate() {
        let ok = count(&|p, a| (p as i16 - a as i16).abs() <= k as i16);
        *slot = ok as f64 / n as f64;
    }

    let ctp = count(&|p, a| p >= 3 && a >= 3);
    let cfp = count(&|p, a| p >= 3 && a < 3);
    let cfn = count(&|p, a| p < 3 && a >= 3);
    let ctn = count(&|p, a| p < 3 && a < 3);
    let crisis_precision = ratio(ctp, ctp + cfp);
    let crisis_recall = ratio(ctp, ctp + cfn);

    // Micro metrics from per-class sums: both collapse to overall accuracy.
    let micro_tp: u64 = (1..=5u8).map(|c| count(&|p, a| p == c && a == c)).sum();
    let micro_tp_fp: u64 = (1..=5u8).map(|c| count(&|p, _| p == c)).sum();
    let micro_tp_fn: u64 = (1..=5u8).map(|c| count(&|_, a| a == c)).sum();

    BruteMetrics {
        n,
        accuracy,
        per_class,
        macro_precision: macro_of(0),
        macro_recall: macro_of(1),
        macro_f1: macro_of(2),
        macro_skipped: skipped,
        within,
        crisis_precision,
        crisis_recall,
        crisis_f1: f1_of(crisis_precision, crisis_recall),
        crisis_accuracy: (ctp + ctn) as f64 / n as f64,
        micro_precision: micro_tp as f64 / micro_tp_fp as f64,
        micro_recall: micro_tp as f64 / micro_tp_fn as f64,
    }
}
