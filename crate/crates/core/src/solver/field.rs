use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::{Element, Triangulation};

/// Per-triangle constant gradients of a P1 field, `m` components.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    m: usize,
    data: Vec<[f64; 2]>,
}

impl Gradient {
    pub fn new(m: usize, data: Vec<[f64; 2]>) -> Self {
        assert_eq!(data.len() % m, 0);
        Gradient { m, data }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn triangle_count(&self) -> usize {
        self.data.len() / self.m
    }

    /// `∇u^α` on triangle `t`.
    #[inline]
    pub fn get(&self, t: usize, alpha: usize) -> [f64; 2] {
        self.data[t * self.m + alpha]
    }

    /// Frobenius magnitude `|∇u|` over all components on triangle `t`.
    #[inline]
    pub fn magnitude(&self, t: usize) -> f64 {
        let mut s = 0.0;
        for alpha in 0..self.m {
            let g = self.data[t * self.m + alpha];
            s += g[0] * g[0] + g[1] * g[1];
        }
        s.sqrt()
    }

    pub fn raw(&self) -> &[[f64; 2]] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Gradient { m: self.m, data: self.data.iter().map(|g| [c * g[0], c * g[1]]).collect() }
    }
}

/// Nodal P1 field with `m` components, values ordered `node·m + α`.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    mesh_id: u64,
    nodes: usize,
    m: usize,
    values: Vec<f64>,
    gradient: OnceLock<Gradient>,
}

impl PartialEq for DiscreteField {
    fn eq(&self, other: &Self) -> bool {
        self.mesh_id == other.mesh_id && self.m == other.m && self.values == other.values
    }
}

impl DiscreteField {
    pub(crate) fn from_values(mesh_id: u64, nodes: usize, m: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), nodes * m);
        DiscreteField { mesh_id, nodes, m, values, gradient: OnceLock::new() }
    }

    /// Wraps nodal values defined on `mesh`.
    pub fn new<M: Triangulation + ?Sized>(mesh: &M, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() * m {
            return Err(Error::MeshMismatch);
        }
        Ok(Self::from_values(mesh.id(), mesh.node_count(), m, values))
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn<M, F>(mesh: &M, nodes: &[[f64; 2]], m: usize, f: F) -> Self
    where
        M: Triangulation + ?Sized,
        F: Fn([f64; 2]) -> [f64; 2],
    {
        let mut values = Vec::with_capacity(nodes.len() * m);
        for &p in nodes {
            let v = f(p);
            values.extend_from_slice(&v[..m]);
        }
        Self::from_values(mesh.id(), mesh.node_count(), m, values)
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn value(&self, node: usize, alpha: usize) -> f64 {
        self.values[node * self.m + alpha]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn check_mesh<M: Triangulation + ?Sized>(&self, mesh: &M) -> Result<()> {
        if self.mesh_id != mesh.id() || self.nodes != mesh.node_count() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// Applies `f` to the values in place and drops the cached gradient.
    pub fn map_values(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.values);
        self.gradient = OnceLock::new();
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_values(self.mesh_id, self.nodes, self.m, self.values.iter().map(|v| c * v).collect())
    }

    /// Adds `c[α]` to component `α` at every node.
    pub fn shifted(&self, c: &[f64]) -> Self {
        let m = self.m;
        Self::from_values(
            self.mesh_id,
            self.nodes,
            m,
            self.values.iter().enumerate().map(|(k, v)| v + c[k % m]).collect(),
        )
    }

    /// Mass-weighted mean `∫u^α / |Ω|` per component.
    pub fn weighted_mean<M: Triangulation + ?Sized>(&self, mesh: &M) -> Vec<f64> {
        let w = mesh.node_weights();
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; self.m];
        for (k, v) in self.values.iter().enumerate() {
            mean[k % self.m] += w[k / self.m] * v;
        }
        mean.iter().map(|s| s / total).collect()
    }

    /// Copy shifted to mass-weighted mean zero per component.
    pub fn mean_aligned<M: Triangulation + ?Sized>(&self, mesh: &M) -> Self {
        let mean = self.weighted_mean(mesh);
        self.shifted(&mean.iter().map(|v| -v).collect::<Vec<_>>())
    }

    /// Exact per-triangle P1 gradient; computed once and cached.
    pub fn gradient<M: Triangulation + ?Sized>(&self, mesh: &M) -> Result<&Gradient> {
        self.check_mesh(mesh)?;
        Ok(self.gradient.get_or_init(|| compute_gradient(mesh, &self.values, self.m)))
    }
}

pub(crate) fn compute_gradient<M: Triangulation + ?Sized>(mesh: &M, values: &[f64], m: usize) -> Gradient {
    let nt = mesh.triangle_count();
    let mut data = Vec::with_capacity(nt * m);
    for t in 0..nt {
        let el = Element::new(&mesh.vertices(t));
        let tri = mesh.triangle(t);
        for alpha in 0..m {
            let mut g = [0.0, 0.0];
            for (a, &k) in tri.iter().enumerate() {
                let u = values[k * m + alpha];
                g[0] += u * el.grads[a][0];
                g[1] += u * el.grads[a][1];
            }
            data.push(g);
        }
    }
    Gradient { m, data }
}
