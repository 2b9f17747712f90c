//! Seeded random fixtures: planar partitions free of T-junctions, and
//! correlated label vectors for the metric suite.
//!
//! Partition cells keep an exact invariant: any boundary shared by two
//! cells is present in both rings as the identical snapped vertex
//! sequence. Splits that introduce a vertex on a shared edge insert that
//! vertex into every cell carrying the edge, so float-exact comparisons
//! stay valid and downstream clipping sees perfectly coincident borders.

use fsv_core::geom::region::{signed_ring_area, Region};
use rand::Rng;

/// Fixture coordinate grid: 2^-9 degrees. Multiples of it are exactly
/// representable both on the production 1e-9 decimal snap grid and on any
/// power-of-two clipping grid, so fixtures flow through every geometry
/// path without a single rounding event and exact-equality checks hold.
pub const FIXTURE_GRID: f64 = 1.0 / 512.0;

pub fn quantize(v: f64) -> f64 {
    (v / FIXTURE_GRID).round() * FIXTURE_GRID
}

pub fn snap_pt(p: [f64; 2]) -> [f64; 2] {
    [quantize(p[0]), quantize(p[1])]
}

/// Sorted cut positions for `n` cells across [lo, hi]; interior cuts are
/// jittered by up to 30% of a cell so neighbours never collide.
fn jittered_cuts(rng: &mut impl Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    let mut cuts = Vec::with_capacity(n + 1);
    cuts.push(quantize(lo));
    for i in 1..n {
        let center = lo + step * i as f64;
        cuts.push(quantize(center + rng.random_range(-0.3..0.3) * step));
    }
    cuts.push(quantize(hi));
    cuts
}

/// Rectilinear partition of `bbox` into nx x ny cells along jittered,
/// shared cut lines. Cells tile the bbox exactly.
pub fn jittered_grid_partition(
    rng: &mut impl Rng,
    bbox: [f64; 4],
    nx: usize,
    ny: usize,
    prefix: &str,
) -> Vec<(String, Region)> {
    let xs = jittered_cuts(rng, bbox[0], bbox[2], nx);
    let ys = jittered_cuts(rng, bbox[1], bbox[3], ny);
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            out.push((
                format!("{prefix}{ix}_{iy}"),
                Region::rect(xs[ix], ys[iy], xs[ix + 1], ys[iy + 1]),
            ));
        }
    }
    out
}

/// Closed CCW ring on a circle with randomized angular gaps; always convex.
pub fn circle_ring(rng: &mut impl Rng, cx: f64, cy: f64, radius: f64, n: usize) -> Vec<[f64; 2]> {
    assert!(n >= 3);
    let gaps: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let start = rng.random_range(0.0..std::f64::consts::TAU);
    let mut ring = Vec::with_capacity(n + 1);
    let mut angle = start;
    for g in gaps {
        ring.push(snap_pt([cx + radius * angle.cos(), cy + radius * angle.sin()]));
        angle += g / total * std::f64::consts::TAU;
    }
    ring.push(ring[0]);
    ring
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Insert `v` between the consecutive pair (a, b) or (b, a) if present.
fn insert_on_edge(ring: &mut Vec<[f64; 2]>, a: [f64; 2], b: [f64; 2], v: [f64; 2]) {
    for t in 0..ring.len() - 1 {
        if (ring[t] == a && ring[t + 1] == b) || (ring[t] == b && ring[t + 1] == a) {
            ring.insert(t + 1, v);
            return;
        }
    }
}

/// Partition a convex closed ring into roughly `cells_target` convex cells
/// by repeated chord splits of the largest cell. Shared borders remain
/// identical vertex sequences across cells.
pub fn chord_partition(
    rng: &mut impl Rng,
    base: Vec<[f64; 2]>,
    cells_target: usize,
    prefix: &str,
) -> Vec<(String, Region)> {
    assert!(base.len() >= 4 && base.first() == base.last(), "closed ring required");
    let mut cells: Vec<Vec<[f64; 2]>> = vec![base];
    let mut guard = 0;
    while cells.len() < cells_target && guard < cells_target * 20 {
        guard += 1;
        let k = (0..cells.len())
            .max_by(|&a, &b| {
                signed_ring_area(&cells[a])
                    .abs()
                    .total_cmp(&signed_ring_area(&cells[b]).abs())
            })
            .unwrap();
        let ring = cells[k].clone();
        let ne = ring.len() - 1;
        if ne < 3 {
            break;
        }
        let i = rng.random_range(0..ne);
        let j = (i + 1 + rng.random_range(0..ne - 1)) % ne;
        let (i, j) = (i.min(j), i.max(j));
        // Lerp parameters are exact binary fractions and ring vertices lie on
        // a power-of-two grid, so the chord endpoints are computed without
        // rounding and sit exactly on the split edge: the union of the cells
        // stays exactly the original polygon.
        const CUTS: [f64; 3] = [0.375, 0.5, 0.625];
        let vi = lerp(ring[i], ring[i + 1], CUTS[rng.random_range(0..3)]);
        let vj = lerp(ring[j], ring[j + 1], CUTS[rng.random_range(0..3)]);
        if vi == ring[i] || vi == ring[i + 1] || vj == ring[j] || vj == ring[j + 1] || vi == vj {
            continue; // snapped onto an endpoint; try another chord
        }

        let mut a = vec![vi];
        a.extend_from_slice(&ring[i + 1..=j]);
        a.push(vj);
        a.push(vi);

        let mut b = vec![vj];
        b.extend_from_slice(&ring[j + 1..ne]);
        b.extend_from_slice(&ring[..=i]);
        b.push(vi);
        b.push(vj);

        if signed_ring_area(&a).abs() < 1e-12 || signed_ring_area(&b).abs() < 1e-12 {
            continue;
        }

        for (idx, cell) in cells.iter_mut().enumerate() {
            if idx != k {
                insert_on_edge(cell, ring[i], ring[i + 1], vi);
                insert_on_edge(cell, ring[j], ring[j + 1], vj);
            }
        }
        cells[k] = a;
        cells.push(b);
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(idx, ring)| (format!("{prefix}{idx}"), Region::from_rings(ring, Vec::new())))
        .collect()
}

/// Correlated (predicted, actual) label vectors in 1..=5. Class ranges are
/// randomized per call so absent classes (undefined metrics) occur often.
pub fn random_label_pair(rng: &mut impl Rng, n: usize) -> (Vec<u8>, Vec<u8>) {
    let act_hi: u8 = rng.random_range(2..=5);
    let pred_hi: u8 = rng.random_range(2..=5);
    let agree = rng.random_range(0.2..0.9);
    let mut pred = Vec::with_capacity(n);
    let mut actual = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.random_range(1..=act_hi);
        let p = if rng.random_range(0.0..1.0) < agree {
            a.min(pred_hi)
        } else {
            rng.random_range(1..=pred_hi)
        };
        actual.push(a);
        pred.push(p);
    }
    (pred, actual)
}
