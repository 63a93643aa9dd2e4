//! Triangulations: the periodic unit cell and boundary-fitted planar domains.

mod domain;
mod locate;
mod torus;

use std::sync::atomic::{AtomicU64, Ordering};

pub use domain::{BoundaryEdge, DomainMesh, Shape};
pub use locate::EdgeLocator;
pub use torus::TorusMesh;

pub use crate::coefficients::Point;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn next_mesh_id() -> u64 {
    NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed)
}

/// Common view of a P1 triangulation.
///
/// `vertices` returns coordinates in a single chart; on the torus this means
/// triangles crossing the cell boundary are returned unwrapped.
pub trait Triangulation: Sync {
    /// Identity shared by clones; fields carry it to detect mesh mismatch.
    fn id(&self) -> u64;
    fn node_count(&self) -> usize;
    fn triangle_count(&self) -> usize;
    fn triangle(&self, t: usize) -> [usize; 3];
    fn vertices(&self, t: usize) -> [Point; 3];

    /// `∫ φ_k` for every P1 hat function, i.e. the lumped mass. Weighted sums
    /// against these are exact integrals of P1 fields.
    fn node_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.node_count()];
        for t in 0..self.triangle_count() {
            let area = Element::new(&self.vertices(t)).area;
            for &k in &self.triangle(t) {
                w[k] += area / 3.0;
            }
        }
        w
    }

    fn total_area(&self) -> f64 {
        (0..self.triangle_count()).map(|t| Element::new(&self.vertices(t)).area).sum()
    }
}

/// Geometry of one linear triangle.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    /// Signed area (positive for counter-clockwise vertices).
    pub area: f64,
    /// Constant gradients of the three barycentric hat functions.
    pub grads: [[f64; 2]; 3],
}

impl Element {
    #[inline]
    pub fn new(v: &[Point; 3]) -> Self {
        let (x0, y0) = (v[0][0], v[0][1]);
        let (x1, y1) = (v[1][0], v[1][1]);
        let (x2, y2) = (v[2][0], v[2][1]);
        let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
        let inv = 1.0 / det;
        Element {
            area: 0.5 * det,
            grads: [
                [(y1 - y2) * inv, (x2 - x1) * inv],
                [(y2 - y0) * inv, (x0 - x2) * inv],
                [(y0 - y1) * inv, (x1 - x0) * inv],
            ],
        }
    }
}

/// Edge midpoints, the three-point quadrature nodes used throughout.
#[inline]
pub fn edge_midpoints(v: &[Point; 3]) -> [Point; 3] {
    [
        [0.5 * (v[0][0] + v[1][0]), 0.5 * (v[0][1] + v[1][1])],
        [0.5 * (v[1][0] + v[2][0]), 0.5 * (v[1][1] + v[2][1])],
        [0.5 * (v[2][0] + v[0][0]), 0.5 * (v[2][1] + v[0][1])],
    ]
}

#[inline]
pub fn centroid(v: &[Point; 3]) -> Point {
    [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
}

/// Smallest interior angle, in degrees.
pub fn min_angle_deg(v: &[Point; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let p = v[k];
        let a = v[(k + 1) % 3];
        let b = v[(k + 2) % 3];
        let u = [a[0] - p[0], a[1] - p[1]];
        let w = [b[0] - p[0], b[1] - p[1]];
        let cos = (u[0] * w[0] + u[1] * w[1]) / ((u[0].hypot(u[1])) * (w[0].hypot(w[1])));
        best = best.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    best
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance from `p` to the segment `[a, b]`.
#[inline]
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}
