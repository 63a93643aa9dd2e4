use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use super::{centroid, dist, min_angle_deg, next_mesh_id, Element, EdgeLocator, Point, Triangulation};
use crate::error::{Error, Result};

/// Builtin smooth domains. Both are star-shaped about the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Unit disk.
    Disk,
    /// `r(θ) = 1 + 0.1 sin 3θ`.
    Flower,
}

impl Shape {
    pub fn parse(s: &str) -> Result<Shape> {
        match s {
            "disk" => Ok(Shape::Disk),
            "flower" => Ok(Shape::Flower),
            other => Err(Error::InvalidParameter(format!("unknown domain shape `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Disk => "disk",
            Shape::Flower => "flower",
        }
    }

    /// Boundary radius at polar angle `theta`.
    pub fn radius(&self, theta: f64) -> f64 {
        match self {
            Shape::Disk => 1.0,
            Shape::Flower => 1.0 + 0.1 * (3.0 * theta).sin(),
        }
    }

    fn place(&self, rho: f64, theta: f64) -> Point {
        let r = rho * self.radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }
}

/// Straight boundary edge of the polygonal domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in counter-clockwise order.
    pub nodes: [usize; 2],
    /// Adjacent triangle.
    pub triangle: usize,
    /// Outward unit normal.
    pub normal: [f64; 2],
    pub length: f64,
    pub midpoint: Point,
}

/// Boundary-fitted triangulation of a smooth planar domain.
///
/// Nodes are placed on concentric rings (mapped radially for the flower);
/// the outermost ring lies exactly on the analytic boundary curve.
#[derive(Clone, Debug)]
pub struct DomainMesh {
    id: u64,
    shape: Shape,
    n: usize,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    boundary_edges: Vec<BoundaryEdge>,
    on_boundary: Vec<bool>,
    delta: Vec<f64>,
    locator: EdgeLocator,
}

impl DomainMesh {
    pub const MIN_RESOLUTION: usize = 8;

    /// Builds a mesh with `n` boundary nodes (nominal mesh size `2π/n`).
    pub fn new(shape: Shape, n: usize) -> Result<Self> {
        if n < Self::MIN_RESOLUTION {
            return Err(Error::ResolutionTooSmall { n, min: Self::MIN_RESOLUTION });
        }
        let rings = ((n as f64 / 6.0).round() as usize).max(1);
        let mut nodes = vec![[0.0, 0.0]];
        let mut ring_start = vec![0usize];
        let mut ring_count = vec![1usize];
        for k in 1..=rings {
            let count = if k == rings { n } else { ((n * k) as f64 / rings as f64).round().max(6.0) as usize };
            // alternate half-step offsets; the boundary ring starts at θ = 0
            let offset = if (rings - k) % 2 == 1 { 0.5 } else { 0.0 };
            let rho = k as f64 / rings as f64;
            ring_start.push(nodes.len());
            ring_count.push(count);
            for i in 0..count {
                let theta = TAU * (i as f64 + offset) / count as f64;
                let p = if k == rings { shape.place(1.0, theta) } else { shape.place(rho, theta) };
                nodes.push(p);
            }
        }

        let mut triangles = Vec::new();
        // center fan
        let (s1, c1) = (ring_start[1], ring_count[1]);
        for i in 0..c1 {
            triangles.push([0, s1 + i, s1 + (i + 1) % c1]);
        }
        for k in 1..rings {
            zip_rings(
                &nodes,
                (ring_start[k], ring_count[k]),
                (ring_start[k + 1], ring_count[k + 1]),
                &mut triangles,
            );
        }
        for tri in triangles.iter_mut() {
            let v = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            if Element::new(&v).area < 0.0 {
                tri.swap(1, 2);
            }
        }

        let bstart = ring_start[rings];
        let boundary_nodes: Vec<usize> = (bstart..bstart + n).collect();
        let mut on_boundary = vec![false; nodes.len()];
        for &b in &boundary_nodes {
            on_boundary[b] = true;
        }

        let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(n);
        for k in 0..n {
            let (a, b) = (boundary_nodes[k], boundary_nodes[(k + 1) % n]);
            edge_owner.insert((a.min(b), a.max(b)), usize::MAX);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if let Some(owner) = edge_owner.get_mut(&(a.min(b), a.max(b))) {
                    *owner = t;
                }
            }
        }
        let mut boundary_edges = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (boundary_nodes[k], boundary_nodes[(k + 1) % n]);
            let (pa, pb) = (nodes[a], nodes[b]);
            let length = dist(pa, pb);
            let tangent = [(pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length];
            boundary_edges.push(BoundaryEdge {
                nodes: [a, b],
                triangle: edge_owner[&(a.min(b), a.max(b))],
                normal: [tangent[1], -tangent[0]],
                length,
                midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
            });
        }
        if boundary_edges.iter().any(|e| e.triangle == usize::MAX) {
            return Err(Error::Inconsistent("boundary edge without adjacent triangle".into()));
        }

        let locator = EdgeLocator::new(boundary_edges.iter().map(|e| (nodes[e.nodes[0]], nodes[e.nodes[1]])).collect());
        let delta = nodes
            .iter()
            .zip(&on_boundary)
            .map(|(&p, &b)| if b { 0.0 } else { locator.distance(p) })
            .collect();

        Ok(DomainMesh {
            id: next_mesh_id(),
            shape,
            n,
            nodes,
            triangles,
            boundary_nodes,
            boundary_edges,
            on_boundary,
            delta,
            locator,
        })
    }

    /// Smallest `n` whose nominal mesh size `2π/n` is at most `h`.
    pub fn resolution_for(h: f64) -> usize {
        ((TAU / h) - 1e-9).ceil().max(Self::MIN_RESOLUTION as f64) as usize
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Boundary node count.
    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Nominal mesh size `2π/n`.
    pub fn h(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary nodes in counter-clockwise order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    /// `δ(x) = dist(x, ∂Ω)` per node, measured to the polygonal boundary.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Distance from an arbitrary point to the polygonal boundary.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.locator.distance(p)
    }

    /// `δ` at every triangle centroid.
    pub fn centroid_delta(&self) -> Vec<f64> {
        (0..self.triangles.len()).map(|t| self.distance_to_boundary(centroid(&self.vertices(t)))).collect()
    }

    /// Polygonal perimeter `|∂Ω_h|`.
    pub fn perimeter(&self) -> f64 {
        self.boundary_edges.iter().map(|e| e.length).sum()
    }

    /// Node nearest the origin (the normalization anchor).
    pub fn anchor_node(&self) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, p) in self.nodes.iter().enumerate() {
            let r = p[0].hypot(p[1]);
            if r < best.0 {
                best = (r, k);
            }
        }
        best.1
    }

    /// Node nearest an arbitrary point.
    pub fn nearest_node(&self, p: Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, &q) in self.nodes.iter().enumerate() {
            let r = dist(p, q);
            if r < best.0 {
                best = (r, k);
            }
        }
        best.1
    }

    /// Per-edge `(normal, length, midpoint)`.
    pub fn boundary_geometry(&self) -> Vec<([f64; 2], f64, Point)> {
        self.boundary_edges.iter().map(|e| (e.normal, e.length, e.midpoint)).collect()
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.triangles.len()).map(|t| min_angle_deg(&self.vertices(t))).fold(f64::INFINITY, f64::min)
    }

    /// Polar angle of a point, used by angular boundary data.
    pub fn polar_angle(p: Point) -> f64 {
        let t = p[1].atan2(p[0]);
        if t < 0.0 {
            t + TAU
        } else {
            t
        }
    }

    /// Plain-text dump for debugging: one `# section count` header per array.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# hlab domain mesh dump")?;
        writeln!(w, "# shape {} n {} h {:.17e}", self.shape.name(), self.n, self.h())?;
        writeln!(w, "# nodes {}  (x y delta)", self.nodes.len())?;
        for (p, d) in self.nodes.iter().zip(&self.delta) {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], d)?;
        }
        writeln!(w, "# triangles {}  (a b c)", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "# boundary_edges {}  (a b triangle nx ny length)", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(
                w,
                "{} {} {} {:.17e} {:.17e} {:.17e}",
                e.nodes[0], e.nodes[1], e.triangle, e.normal[0], e.normal[1], e.length
            )?;
        }
        Ok(())
    }

    /// Area enclosed by the boundary polygon (shoelace formula).
    pub fn polygon_area(&self) -> f64 {
        let b = &self.boundary_nodes;
        let mut s = 0.0;
        for k in 0..b.len() {
            let p = self.nodes[b[k]];
            let q = self.nodes[b[(k + 1) % b.len()]];
            s += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * s
    }

    /// Analytic domain area, for geometric-defect checks.
    pub fn analytic_area(&self) -> f64 {
        match self.shape {
            Shape::Disk => PI,
            // ½∫(1 + 0.1 sin 3θ)² dθ = π(1 + 0.005)
            Shape::Flower => PI * 1.005,
        }
    }
}

/// Triangulates the annulus between two node rings by always adding the
/// shorter of the two candidate diagonals.
fn zip_rings(nodes: &[Point], inner: (usize, usize), outer: (usize, usize), out: &mut Vec<[usize; 3]>) {
    let (sa, na) = inner;
    let (sb, nb) = outer;
    let a = |i: usize| sa + i % na;
    let b = |j: usize| sb + j % nb;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let advance_outer = if i == na {
            true
        } else if j == nb {
            false
        } else {
            dist(nodes[a(i)], nodes[b(j + 1)]) <= dist(nodes[b(j)], nodes[a(i + 1)])
        };
        if advance_outer {
            out.push([a(i), b(j), b(j + 1)]);
            j += 1;
        } else {
            out.push([a(i), b(j), a(i + 1)]);
            i += 1;
        }
    }
}

impl Triangulation for DomainMesh {
    fn id(&self) -> u64 {
        self.id
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    #[inline]
    fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }
}
