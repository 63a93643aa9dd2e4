//! Compressed sparse rows with a mesh-derived pattern.

use crate::mesh::Triangulation;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the P1 block pattern: dof `(k, α) = k·m + α` couples
    /// to every component of every node sharing a triangle with node `k`.
    pub fn p1_pattern<M: Triangulation + ?Sized>(mesh: &M, m: usize) -> Self {
        let nn = mesh.node_count();
        let nt = mesh.triangle_count();
        // node -> incident triangles
        let mut start = vec![0usize; nn + 1];
        for t in 0..nt {
            for &k in &mesh.triangle(t) {
                start[k + 1] += 1;
            }
        }
        for k in 0..nn {
            start[k + 1] += start[k];
        }
        let mut fill = start.clone();
        let mut incident = vec![0usize; start[nn]];
        for t in 0..nt {
            for &k in &mesh.triangle(t) {
                incident[fill[k]] = t;
                fill[k] += 1;
            }
        }

        let rows = nn * m;
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        let mut cols: Vec<u32> = Vec::with_capacity(rows * 7 * m);
        let mut nbrs: Vec<usize> = Vec::with_capacity(16);
        for k in 0..nn {
            nbrs.clear();
            for &t in &incident[start[k]..start[k + 1]] {
                nbrs.extend_from_slice(&mesh.triangle(t));
            }
            nbrs.sort_unstable();
            nbrs.dedup();
            for _alpha in 0..m {
                for &nb in &nbrs {
                    for beta in 0..m {
                        cols.push((nb * m + beta) as u32);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        let vals = vec![0.0; cols.len()];
        CsrMatrix { rows, row_ptr, cols, vals }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Adds `v` at `(r, c)`; the entry must be in the pattern.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        let pos = self.cols[lo..hi]
            .binary_search(&(c as u32))
            .unwrap_or_else(|_| panic!("entry ({r}, {c}) outside the sparsity pattern"));
        self.vals[lo + pos] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[lo..hi].binary_search(&(c as u32)) {
            Ok(pos) => self.vals[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, r)).collect()
    }

    #[inline]
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut s = 0.0;
            for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                s += v * x[*c as usize];
            }
            *out = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_into(x, &mut y);
        y
    }

    /// SSOR preconditioner `z = M⁻¹ r` with
    /// `M = ω/(2−ω) (D/ω + L) D⁻¹ (D/ω + U)`.
    pub fn ssor_solve(&self, diag: &[f64], omega: f64, r: &[f64], z: &mut [f64]) {
        for i in 0..self.rows {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = r[i];
            for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                let c = *c as usize;
                if c >= i {
                    break;
                }
                s -= v * z[c];
            }
            z[i] = s * omega / diag[i];
        }
        let scale = (2.0 - omega) / omega;
        for i in 0..self.rows {
            z[i] *= diag[i] * scale;
        }
        for i in (0..self.rows).rev() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = z[i];
            for (c, v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).rev() {
                let c = *c as usize;
                if c <= i {
                    break;
                }
                s -= v * z[c];
            }
            z[i] = s * omega / diag[i];
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |K_rc − K_cr|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TorusMesh;

    #[test]
    fn torus_pattern_has_seven_point_rows() {
        let mesh = TorusMesh::new(6).unwrap();
        let k = CsrMatrix::p1_pattern(&mesh, 1);
        assert_eq!(k.rows(), 36);
        assert_eq!(k.nnz(), 36 * 7);
        let k2 = CsrMatrix::p1_pattern(&mesh, 2);
        assert_eq!(k2.nnz(), 72 * 14);
    }

    #[test]
    #[should_panic(expected = "outside the sparsity pattern")]
    fn add_outside_pattern_panics() {
        let mesh = TorusMesh::new(8).unwrap();
        let mut k = CsrMatrix::p1_pattern(&mesh, 1);
        k.add(0, 30, 1.0);
    }
}
