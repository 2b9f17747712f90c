//! Planar polygon model in geographic (lon, lat) coordinates.
//!
//! Geometry is treated as planar: areas come straight from the shoelace
//! formula in squared degrees, with no spherical correction. A [`Region`] is
//! a multi-polygon; every ring is stored closed (first point repeated at the
//! end) with at least four points. Exterior rings wind counter-clockwise and
//! holes clockwise once normalized.
//!
//! Coordinates are snapped to a fixed 1e-9 degree grid when a region is
//! normalized, which makes downstream clipping and serialization
//! reproducible across runs and platforms.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

/// Snapping grid for coordinates, in degrees. About 0.1 mm on the ground;
/// far below any data precision, but coarse enough to absorb float noise.
pub const SNAP_GRID: f64 = 1e-9;

/// Round one coordinate onto the snapping grid.
pub fn snap_coord(v: f64) -> f64 {
    (v / SNAP_GRID).round() * SNAP_GRID
}

/// Signed area of a closed ring (shoelace). Counter-clockwise is positive.
pub fn signed_ring_area(ring: &[Point]) -> f64 {
    if ring.len() < 4 {
        return 0.0;
    }
    let mut acc = 0.0;
    for w in ring.windows(2) {
        let [x0, y0] = w[0];
        let [x1, y1] = w[1];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// Even-odd point-in-ring test via horizontal ray casting.
/// Points exactly on the boundary may land on either side.
pub fn point_in_ring(pt: Point, ring: &[Point]) -> bool {
    let [px, py] = pt;
    let mut inside = false;
    for w in ring.windows(2) {
        let [x0, y0] = w[0];
        let [x1, y1] = w[1];
        if (y0 > py) != (y1 > py) {
            let x_cross = x0 + (py - y0) / (y1 - y0) * (x1 - x0);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// One exterior ring with zero or more holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    /// Unsigned area: exterior minus holes, floored at zero.
    pub fn area(&self) -> f64 {
        let ext = signed_ring_area(&self.exterior).abs();
        let holes: f64 = self
            .holes
            .iter()
            .map(|h| signed_ring_area(h).abs())
            .sum();
        (ext - holes).max(0.0)
    }
}

/// A multi-polygon region. May be empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Region {
    pub polygons: Vec<Polygon>,
}

impl Region {
    pub fn new(polygons: Vec<Polygon>) -> Region {
        Region { polygons }
    }

    pub fn empty() -> Region {
        Region { polygons: Vec::new() }
    }

    /// Single polygon from raw rings; rings are closed if they are not.
    pub fn from_rings(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Region {
        let polygon = Polygon {
            exterior: close_ring(exterior),
            holes: holes.into_iter().map(close_ring).collect(),
        };
        Region { polygons: vec![polygon] }
    }

    /// Axis-aligned rectangle, a frequent building block in tests.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::from_rings(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]], Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        self.polygons.iter().flat_map(|p| p.rings())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(|r| r.len().saturating_sub(1)).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.rings().all(|r| r.iter().all(|p| p[0].is_finite() && p[1].is_finite()))
    }

    /// Planar area in squared degrees.
    pub fn area(&self) -> f64 {
        self.polygons.iter().map(|p| p.area()).sum()
    }

    /// (min_x, min_y, max_x, max_y), or None when empty.
    pub fn bbox(&self) -> Option<[f64; 4]> {
        let mut out: Option<[f64; 4]> = None;
        for ring in self.rings() {
            for &[x, y] in ring {
                let b = out.get_or_insert([x, y, x, y]);
                b[0] = b[0].min(x);
                b[1] = b[1].min(y);
                b[2] = b[2].max(x);
                b[3] = b[3].max(y);
            }
        }
        out
    }

    /// Even-odd containment across all rings of all polygons.
    pub fn contains_point(&self, pt: Point) -> bool {
        let mut crossings = 0usize;
        for ring in self.rings() {
            if point_in_ring(pt, ring) {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }

    /// GeoJSON geometry value: Polygon for one polygon, else MultiPolygon.
    pub fn to_geojson_geometry(&self) -> serde_json::Value {
        let poly_coords = |p: &Polygon| -> serde_json::Value {
            let rings: Vec<serde_json::Value> = p
                .rings()
                .map(|r| serde_json::json!(r))
                .collect();
            serde_json::Value::Array(rings)
        };
        if self.polygons.len() == 1 {
            serde_json::json!({ "type": "Polygon", "coordinates": poly_coords(&self.polygons[0]) })
        } else {
            let coords: Vec<serde_json::Value> = self.polygons.iter().map(poly_coords).collect();
            serde_json::json!({ "type": "MultiPolygon", "coordinates": coords })
        }
    }

    /// Snap to the grid, close rings, drop consecutive duplicate points and
    /// rings that collapse, and orient exteriors CCW / holes CW.
    ///
    /// This is mechanical cleanup, not validity repair: self-intersections
    /// survive it (see `make_valid`).
    pub fn normalized(&self) -> Region {
        let mut polygons = Vec::with_capacity(self.polygons.len());
        for poly in &self.polygons {
            let Some(mut exterior) = clean_ring(&poly.exterior) else {
                continue;
            };
            if signed_ring_area(&exterior) < 0.0 {
                exterior.reverse();
            }
            let mut holes = Vec::with_capacity(poly.holes.len());
            for hole in &poly.holes {
                let Some(mut h) = clean_ring(hole) else { continue };
                if signed_ring_area(&h) > 0.0 {
                    h.reverse();
                }
                holes.push(h);
            }
            polygons.push(Polygon { exterior, holes });
        }
        Region { polygons }
    }
}

/// Append the first point if the ring is not closed yet.
pub fn close_ring(mut ring: Vec<Point>) -> Vec<Point> {
    if ring.len() >= 2 && ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    ring
}

/// Snap, close, dedup; None when the ring degenerates below a triangle.
fn clean_ring(ring: &[Point]) -> Option<Vec<Point>> {
    let mut out: Vec<Point> = Vec::with_capacity(ring.len() + 1);
    for &[x, y] in ring {
        let p = [snap_coord(x), snap_coord(y)];
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    // Drop a duplicated closing point before re-closing, then close.
    while out.len() >= 2 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return None;
    }
    out.push(out[0]);
    Some(out)
}
