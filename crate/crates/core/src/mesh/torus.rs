use super::{next_mesh_id, Point, Triangulation};
use crate::error::{Error, Result};

/// Uniform triangulation of the periodic unit cell `[0,1)²`.
///
/// Node `(i, j)` sits at `(i/n, j/n)` with index `i + n·j`; each grid square
/// is split along its main diagonal into `(p00, p10, p11)` and `(p00, p11, p01)`.
#[derive(Clone, Debug)]
pub struct TorusMesh {
    id: u64,
    n: usize,
}

impl TorusMesh {
    pub const MIN_RESOLUTION: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_RESOLUTION {
            return Err(Error::ResolutionTooSmall { n, min: Self::MIN_RESOLUTION });
        }
        Ok(TorusMesh { id: next_mesh_id(), n })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        (i % self.n) + self.n * (j % self.n)
    }

    pub fn node_coords(&self, k: usize) -> Point {
        let n = self.n as f64;
        [(k % self.n) as f64 / n, (k / self.n) as f64 / n]
    }

    /// Triangle containing the periodic point `y` and its barycentric
    /// coordinates there.
    #[inline]
    pub fn locate(&self, y: Point) -> (usize, [f64; 3]) {
        let n = self.n as f64;
        let sx = (y[0] - y[0].floor()) * n;
        let sy = (y[1] - y[1].floor()) * n;
        let i = (sx.floor() as usize).min(self.n - 1);
        let j = (sy.floor() as usize).min(self.n - 1);
        let fx = sx - i as f64;
        let fy = sy - j as f64;
        let square = i + self.n * j;
        if fx >= fy {
            // (p00, p10, p11)
            (2 * square, [1.0 - fx, fx - fy, fy])
        } else {
            // (p00, p11, p01)
            (2 * square + 1, [1.0 - fy, fx, fy - fx])
        }
    }

    /// P1 interpolation of a nodal torus field (component stride `m`).
    #[inline]
    pub fn interpolate(&self, values: &[f64], m: usize, comp: usize, y: Point) -> f64 {
        let (t, bary) = self.locate(y);
        let nodes = self.triangle(t);
        bary[0] * values[nodes[0] * m + comp] + bary[1] * values[nodes[1] * m + comp] + bary[2] * values[nodes[2] * m + comp]
    }
}

impl Triangulation for TorusMesh {
    fn id(&self) -> u64 {
        self.id
    }

    fn node_count(&self) -> usize {
        self.n * self.n
    }

    fn triangle_count(&self) -> usize {
        2 * self.n * self.n
    }

    #[inline]
    fn triangle(&self, t: usize) -> [usize; 3] {
        let s = t / 2;
        let (i, j) = (s % self.n, s / self.n);
        let p00 = self.node(i, j);
        let p10 = self.node(i + 1, j);
        let p11 = self.node(i + 1, j + 1);
        let p01 = self.node(i, j + 1);
        if t % 2 == 0 {
            [p00, p10, p11]
        } else {
            [p00, p11, p01]
        }
    }

    #[inline]
    fn vertices(&self, t: usize) -> [Point; 3] {
        let s = t / 2;
        let n = self.n as f64;
        let (i, j) = ((s % self.n) as f64, (s / self.n) as f64);
        let p00 = [i / n, j / n];
        let p10 = [(i + 1.0) / n, j / n];
        let p11 = [(i + 1.0) / n, (j + 1.0) / n];
        let p01 = [i / n, (j + 1.0) / n];
        if t % 2 == 0 {
            [p00, p10, p11]
        } else {
            [p00, p11, p01]
        }
    }
}
