//! Boolean overlay between polygon layers.
//!
//! Clipping runs on an exact integer grid: all inputs of one layer-pair
//! operation are converted through a single shared coordinate adapter, so
//! cut lines land on identical integer coordinates in every pairwise
//! intersection. That is what makes the output pieces of a partitioned
//! layer pair exactly interior-disjoint rather than merely nearly so.
//!
//! Validity repair resolves self-intersections with the even-odd rule (a
//! bowtie becomes two triangles) and refuses to proceed when repairing a
//! region that looked valid would change its area: that indicates kernel
//! damage, not data damage.

use i_overlay::core::fill_rule::FillRule;
use i_overlay::core::overlay::ShapeType;
use i_overlay::core::overlay_rule::OverlayRule;
use i_overlay::core::solver::Solver;
use i_overlay::float::overlay::{FloatOverlay, OverlayOptions};
use i_overlay::float::simplify::SimplifyShape;
use i_overlay::i_float::adapter::FloatPointAdapter;
use i_overlay::i_float::float::rect::FloatRect;

use crate::error::{Error, Result};

use super::region::{close_ring, point_in_ring, Point, Polygon, Region};

/// Relative area-change tolerance beyond which repairing a seemingly valid
/// region is treated as a kernel failure.
pub const REPAIR_AREA_TOLERANCE: f64 = 1e-6;

/// One positive-area intersection between a feature of the left layer and
/// a feature of the right layer.
#[derive(Debug, Clone)]
pub struct OverlayPiece {
    pub left_id: String,
    pub right_id: String,
    pub geometry: Region,
    pub area: f64,
}

/// All rings of a region as open contours (kernel input form).
fn open_contours(region: &Region) -> Vec<Vec<Point>> {
    region
        .rings()
        .map(|r| r[..r.len() - 1].to_vec())
        .filter(|r| r.len() >= 3)
        .collect()
}

/// Kernel output (first contour exterior, rest holes, per shape) to Region.
fn shapes_to_region(shapes: Vec<Vec<Vec<Point>>>) -> Region {
    let mut polygons = Vec::new();
    for shape in shapes {
        let mut contours = shape.into_iter();
        let Some(exterior) = contours.next() else { continue };
        if exterior.len() < 3 {
            continue;
        }
        polygons.push(Polygon {
            exterior: close_ring(exterior),
            holes: contours
                .filter(|h| h.len() >= 3)
                .map(close_ring)
                .collect(),
        });
    }
    Region::new(polygons)
}

/// Shared conversion grid covering `bbox` with a little slack.
///
/// The frame is expanded outward to multiples of 0.25 degrees. The grid
/// origin (frame center) then sits on an exactly representable coordinate
/// and the scale is a power of two, so coordinates that already lie on a
/// coarse power-of-two grid convert to integer space and back without any
/// rounding; everything else rounds reproducibly. A smaller bbox always
/// yields an equal-or-finer compatible grid, which keeps re-clipping of
/// previously clipped pieces exact.
fn adapter_for(bbox: [f64; 4]) -> FloatPointAdapter<Point, f64> {
    const Q: f64 = 0.25;
    let lo = |v: f64| ((v - 0.01) / Q).floor() * Q;
    let hi = |v: f64| ((v + 0.01) / Q).ceil() * Q;
    FloatPointAdapter::new(FloatRect::new(
        lo(bbox[0]),
        hi(bbox[2]),
        lo(bbox[1]),
        hi(bbox[3]),
    ))
}

fn union_bbox(regions: &mut dyn Iterator<Item = &Region>) -> Option<[f64; 4]> {
    let mut out: Option<[f64; 4]> = None;
    for r in regions {
        if let Some(b) = r.bbox() {
            let acc = out.get_or_insert(b);
            acc[0] = acc[0].min(b[0]);
            acc[1] = acc[1].min(b[1]);
            acc[2] = acc[2].max(b[2]);
            acc[3] = acc[3].max(b[3]);
        }
    }
    out
}

fn bboxes_touch(a: [f64; 4], b: [f64; 4]) -> bool {
    a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
}

/// Intersection of two regions through a shared adapter built from both.
pub fn intersect_regions(a: &Region, b: &Region) -> Region {
    let Some(bbox) = union_bbox(&mut [a, b].into_iter()) else {
        return Region::empty();
    };
    intersect_with_adapter(&adapter_for(bbox), &open_contours(a), &open_contours(b))
}

fn intersect_with_adapter(
    adapter: &FloatPointAdapter<Point, f64>,
    subj: &[Vec<Point>],
    clip: &[Vec<Point>],
) -> Region {
    if subj.is_empty() || clip.is_empty() {
        return Region::empty();
    }
    // Collinear vertices are load-bearing: a vertex of one feature that
    // lies on a straight stretch of a neighbour's shared border must
    // survive in both features' output, otherwise the two pieces render
    // the border as different polylines (one straight span between rounded
    // cut points, one bent through the vertex) and weave across each other
    // at the snapping scale. Preserving collinear points on both ends
    // keeps shared borders vertex-identical across pairwise operations.
    let options = OverlayOptions {
        preserve_input_collinear: true,
        preserve_output_collinear: true,
        ..OverlayOptions::default()
    };
    let capacity: usize = subj.iter().chain(clip).map(|c| c.len()).sum();
    let mut overlay = FloatOverlay::new_custom(adapter.clone(), options, Solver::default(), capacity)
        .unsafe_add_source(&subj.to_vec(), ShapeType::Subject)
        .unsafe_add_source(&clip.to_vec(), ShapeType::Clip);
    let shapes = overlay.overlay(OverlayRule::Intersect, FillRule::EvenOdd);
    shapes_to_region(shapes)
}

/// Repair a region into overlay-ready form.
///
/// Self-intersections are resolved even-odd; orientation and snapping are
/// normalized. Errors: `Degenerate` when nothing with positive area
/// remains, `Repair` when the input looked valid yet its area moved by
/// more than [`REPAIR_AREA_TOLERANCE`] (relative), `Topology` on
/// non-finite input.
pub fn make_valid(region: &Region) -> Result<Region> {
    if !region.all_finite() {
        return Err(Error::Topology("non-finite coordinate in input".into()));
    }
    let norm = region.normalized();
    if norm.is_empty() {
        return Err(Error::Degenerate {
            detail: "no ring survives snapping and closure".into(),
        });
    }
    let contours = open_contours(&norm);
    let out = shapes_to_region(contours.simplify_shape(FillRule::EvenOdd)).normalized();
    let out_area = out.area();
    if out.is_empty() || out_area <= 0.0 {
        return Err(Error::Degenerate {
            detail: "zero-area geometry after repair".into(),
        });
    }
    // The naive measure (shoelace with holes subtracted) equals the true
    // area exactly when the input is valid. A large disagreement is fine
    // for genuinely invalid input (that is the repair working) but must
    // not happen for valid input, so scan before accusing the kernel.
    let naive = norm.area();
    let rel = (out_area - naive).abs() / naive.max(out_area);
    if rel > REPAIR_AREA_TOLERANCE && looks_valid(&norm) {
        return Err(Error::Repair {
            before: naive,
            after: out_area,
        });
    }
    Ok(out)
}

/// Conservative validity scan: simple rings, no proper pairwise crossings,
/// holes inside their exterior, exteriors not nested. Only reached on the
/// rare area-mismatch path, so the quadratic cost is irrelevant.
fn looks_valid(region: &Region) -> bool {
    let rings: Vec<&Vec<Point>> = region.rings().collect();
    for ring in &rings {
        if ring_self_crosses(ring) {
            return false;
        }
    }
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            if rings_properly_cross(rings[i], rings[j]) {
                return false;
            }
        }
    }
    for poly in &region.polygons {
        for hole in &poly.holes {
            let probe = edge_midpoint(hole);
            if !point_in_ring(probe, &poly.exterior) {
                return false;
            }
        }
    }
    for i in 0..region.polygons.len() {
        for j in 0..region.polygons.len() {
            if i == j {
                continue;
            }
            let probe = edge_midpoint(&region.polygons[i].exterior);
            if point_in_ring(probe, &region.polygons[j].exterior) {
                return false; // nested or overlapping exteriors
            }
        }
    }
    true
}

fn edge_midpoint(ring: &[Point]) -> Point {
    let a = ring[0];
    let b = ring[1];
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Strict interior crossing; touches and collinear overlaps do not count
/// (they cannot change even-odd area).
fn segments_properly_cross(p1: Point, p2: Point, p3: Point, p4: Point) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn ring_self_crosses(ring: &[Point]) -> bool {
    let n = ring.len() - 1; // closed ring, n edges
    for i in 0..n {
        for j in i + 1..n {
            // Skip adjacent edges (shared endpoint), including the wrap pair.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_properly_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

fn rings_properly_cross(a: &[Point], b: &[Point]) -> bool {
    for i in 0..a.len() - 1 {
        for j in 0..b.len() - 1 {
            if segments_properly_cross(a[i], a[i + 1], b[j], b[j + 1]) {
                return true;
            }
        }
    }
    false
}

/// Pairwise intersection of two feature layers.
///
/// Every pairwise operation shares one integer-grid adapter spanning both
/// layers, so pieces inherit exactly coincident cut lines. Features whose
/// bounding boxes do not touch are skipped without kernel work. Pieces are
/// emitted in (left index, right index) order with the ids of their
/// parents; only positive-area pieces are kept.
pub fn intersect_layers(
    left: &[(String, Region)],
    right: &[(String, Region)],
) -> Result<Vec<OverlayPiece>> {
    for (id, region) in left.iter().chain(right.iter()) {
        if !region.all_finite() {
            return Err(Error::Topology(format!(
                "non-finite coordinate in feature {id}"
            )));
        }
    }
    let Some(bbox) = union_bbox(&mut left.iter().chain(right.iter()).map(|(_, r)| r)) else {
        return Ok(Vec::new());
    };
    let adapter = adapter_for(bbox);

    fn prepare(layer: &[(String, Region)]) -> Vec<(Option<[f64; 4]>, Vec<Vec<Point>>)> {
        layer
            .iter()
            .map(|(_, r)| (r.bbox(), open_contours(r)))
            .collect()
    }
    let lefts = prepare(left);
    let rights = prepare(right);

    let mut pieces = Vec::new();
    for (li, (lbox, lcontours)) in lefts.iter().enumerate() {
        let Some(lb) = lbox else { continue };
        for (ri, (rbox, rcontours)) in rights.iter().enumerate() {
            let Some(rb) = rbox else { continue };
            if !bboxes_touch(*lb, *rb) {
                continue;
            }
            let region = intersect_with_adapter(&adapter, lcontours, rcontours);
            let area = region.area();
            if area > 0.0 {
                pieces.push(OverlayPiece {
                    left_id: left[li].0.clone(),
                    right_id: right[ri].0.clone(),
                    geometry: region,
                    area,
                });
            }
        }
    }
    Ok(pieces)
}

/// Drop pieces with area strictly below `min_area`; report the removed
/// share of the total piece area (0 when there was nothing to begin with).
pub fn filter_small(pieces: Vec<OverlayPiece>, min_area: f64) -> (Vec<OverlayPiece>, f64) {
    let total: f64 = pieces.iter().map(|p| p.area).sum();
    let mut removed = 0.0;
    let kept: Vec<OverlayPiece> = pieces
        .into_iter()
        .filter(|p| {
            if p.area < min_area {
                removed += p.area;
                false
            } else {
                true
            }
        })
        .collect();
    let fraction = if total > 0.0 { removed / total } else { 0.0 };
    (kept, fraction)
}

/// Debug dump of overlay pieces as a GeoJSON feature collection string.
pub fn pieces_to_geojson(pieces: &[OverlayPiece]) -> String {
    let features: Vec<serde_json::Value> = pieces
        .iter()
        .map(|p| {
            serde_json::json!({
                "type": "Feature",
                "properties": {
                    "left": p.left_id,
                    "right": p.right_id,
                    "area": p.area,
                },
                "geometry": p.geometry.to_geojson_geometry(),
            })
        })
        .collect();
    serde_json::json!({ "type": "FeatureCollection", "features": features }).to_string()
}
