//! Discrete Neumann functions `N_ε(·, y)`.
//!
//! A column solves `L_ε N = e^β δ_y` with the constant conormal flux
//! `−e^β/|∂Ω|` and is normalized to boundary arclength mean zero. The Dirac
//! mass is the raw nodal load and `|∂Ω|` is the polygonal perimeter, so the
//! total load vanishes to rounding.

use std::io::Write;

use crate::coefficients::MAX_M;
use crate::error::{Error, Result};
use crate::mesh::{centroid, dist, DomainMesh, Triangulation};
use crate::neumann::NeumannOperator;
use crate::solver::{DiscreteField, SolveStats};

/// Minimum source distance to the boundary, in mesh sizes.
pub const SOURCE_MARGIN: f64 = 4.0;
/// Minimum `|x − y|` of profile samples, in mesh sizes.
pub const SAMPLE_MARGIN: f64 = 8.0;
/// Gradient weight exponent `1 + γ` of the planar decay statistic.
pub const GRADIENT_EXPONENT: f64 = 1.1;

#[derive(Clone, Debug)]
pub struct KernelColumn {
    pub source: usize,
    pub beta: usize,
    pub field: DiscreteField,
    /// Per-component total load of the defining solve.
    pub total_load: Vec<f64>,
    /// Boundary mean per component after normalization.
    pub boundary_mean: Vec<f64>,
    pub stats: SolveStats,
}

/// Arclength mean of every component over the polygonal boundary.
pub fn boundary_mean(mesh: &DomainMesh, field: &DiscreteField) -> Vec<f64> {
    let m = field.m();
    let mut s = vec![0.0; m];
    for e in mesh.boundary_edges() {
        for (alpha, v) in s.iter_mut().enumerate() {
            *v += 0.5 * e.length * (field.value(e.nodes[0], alpha) + field.value(e.nodes[1], alpha));
        }
    }
    let p = mesh.perimeter();
    s.iter().map(|v| v / p).collect()
}

impl KernelColumn {
    /// Shifts the column to boundary mean zero again.
    pub fn renormalize(&mut self, mesh: &DomainMesh) {
        let mean = boundary_mean(mesh, &self.field);
        self.field = self.field.shifted(&mean.iter().map(|v| -v).collect::<Vec<_>>());
        self.boundary_mean = boundary_mean(mesh, &self.field);
    }

    /// `N^{αβ}(x, y)` at node `x`.
    pub fn value(&self, node: usize, alpha: usize) -> f64 {
        self.field.value(node, alpha)
    }
}

/// Column `N_ε^{·β}(·, y)` for the source node `y`.
pub fn neumann_function_column(op: &NeumannOperator, source: usize, beta: usize) -> Result<KernelColumn> {
    let mesh = op.mesh();
    let m = op.m();
    if beta >= m || source >= mesh.node_count() {
        return Err(Error::InvalidParameter(format!("no unknown ({source}, {beta})")));
    }
    let delta = mesh.delta()[source];
    let min = SOURCE_MARGIN * mesh.h();
    if delta < min {
        return Err(Error::SourceTooClose { node: source, delta, min });
    }
    let load = column_load(mesh, m, &[(source, beta, 1.0)]);
    let total_load = component_totals(&load, m);
    let sol = op.solve_load(&load, None)?;
    let mut col = KernelColumn { source, beta, field: sol.field, total_load, boundary_mean: vec![0.0; m], stats: sol.stats };
    col.renormalize(mesh);
    Ok(col)
}

/// Load of a weighted sum of unit sources with their balancing boundary
/// fluxes.
pub fn column_load(mesh: &DomainMesh, m: usize, sources: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut load = vec![0.0; mesh.node_count() * m];
    let p = mesh.perimeter();
    for &(node, beta, weight) in sources {
        load[node * m + beta] += weight;
        for e in mesh.boundary_edges() {
            let w = -weight * 0.5 * e.length / p;
            load[e.nodes[0] * m + beta] += w;
            load[e.nodes[1] * m + beta] += w;
        }
    }
    load
}

fn component_totals(load: &[f64], m: usize) -> Vec<f64> {
    let mut s = vec![0.0; m];
    for (k, v) in load.iter().enumerate() {
        s[k % m] += v;
    }
    s
}

/// `max |N^{αβ}(x, y) − N^{βα}(y, x)|` over the node pairs and every
/// component combination.
pub fn symmetry_check(op: &NeumannOperator, pairs: &[(usize, usize)]) -> Result<f64> {
    let m = op.m();
    let mut sources: Vec<usize> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
    sources.sort_unstable();
    sources.dedup();
    let mut columns = std::collections::HashMap::new();
    for &s in &sources {
        for beta in 0..m {
            columns.insert((s, beta), neumann_function_column(op, s, beta)?);
        }
    }
    let mut worst = 0.0f64;
    for &(x, y) in pairs {
        for alpha in 0..m {
            for beta in 0..m {
                let a = columns[&(y, beta)].value(x, alpha);
                let b = columns[&(x, alpha)].value(y, beta);
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

/// One decay sample: triangle centroid at distance `r` from the source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecaySample {
    pub r: f64,
    pub abs_n: f64,
    pub abs_grad_n: f64,
}

impl DecaySample {
    /// `|N| / (1 + |ln r|)`
    pub fn log_normalized(&self) -> f64 {
        self.abs_n / (1.0 + self.r.ln().abs())
    }

    /// `|∇N| · r^{1.1}`
    pub fn r_weighted_gradient(&self) -> f64 {
        self.abs_grad_n * self.r.powf(GRADIENT_EXPONENT)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelProfile {
    pub samples: Vec<DecaySample>,
    /// `sup |N| / (1 + |ln r|)`
    pub log_normalized_sup: f64,
    /// `sup |∇N| · r^{1.1}`
    pub r_weighted_gradient_sup: f64,
    /// Samples dropped for lying within `8h` of their source.
    pub excluded: usize,
}

/// Decay table of the columns over triangle centroids (or the given
/// triangles) at least `8h` from each source.
pub fn kernel_profile(mesh: &DomainMesh, columns: &[KernelColumn], triangles: Option<&[usize]>) -> Result<KernelProfile> {
    let all: Vec<usize>;
    let tris = match triangles {
        Some(t) => t,
        None => {
            all = (0..mesh.triangle_count()).collect();
            &all
        }
    };
    let min_r = SAMPLE_MARGIN * mesh.h();
    let nodes = mesh.nodes();
    let mut samples = Vec::new();
    let mut excluded = 0;
    for col in columns {
        let y = nodes[col.source];
        let grad = col.field.gradient(mesh)?;
        let m = col.field.m();
        for &t in tris {
            let c = centroid(&mesh.vertices(t));
            let r = dist(c, y);
            if r < min_r {
                excluded += 1;
                continue;
            }
            let tri = mesh.triangle(t);
            let mut n2 = 0.0;
            for alpha in 0..m.min(MAX_M) {
                let v = tri.iter().map(|&k| col.field.value(k, alpha)).sum::<f64>() / 3.0;
                n2 += v * v;
            }
            samples.push(DecaySample { r, abs_n: n2.sqrt(), abs_grad_n: grad.magnitude(t) });
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let log_normalized_sup = samples.iter().map(DecaySample::log_normalized).fold(0.0, f64::max);
    let r_weighted_gradient_sup = samples.iter().map(DecaySample::r_weighted_gradient).fold(0.0, f64::max);
    Ok(KernelProfile { samples, log_normalized_sup, r_weighted_gradient_sup, excluded })
}

/// Classical Neumann function of `−Δ` on the unit disk with conormal flux
/// `−1/2π` and an unspecified additive constant.
pub fn disk_laplace_neumann(x: [f64; 2], y: [f64; 2]) -> f64 {
    let ry = y[0].hypot(y[1]);
    let d = dist(x, y);
    let image = if ry == 0.0 {
        1.0
    } else {
        let yhat = [y[0] / ry, y[1] / ry];
        dist([ry * x[0], ry * x[1]], yhat)
    };
    -(d.ln() + image.ln()) / (2.0 * std::f64::consts::PI)
}

/// Writes decay rows `eps, r, absN, absGradN, logNormalizedN, rWeightedGradN`
/// with the samples binned by `r` into `bins` equal-width bins (the bin
/// maximum of each column is kept).
pub fn write_decay_csv<W: Write>(mut w: W, rows: &[(f64, &KernelProfile)], bins: usize) -> Result<()> {
    writeln!(w, "eps,r,absN,absGradN,logNormalizedN,rWeightedGradN")?;
    for &(eps, profile) in rows {
        let rmax = profile.samples.iter().map(|s| s.r).fold(0.0, f64::max);
        let rmin = profile.samples.iter().map(|s| s.r).fold(f64::INFINITY, f64::min);
        let width = ((rmax - rmin) / bins as f64).max(f64::MIN_POSITIVE);
        let mut binned: Vec<Option<[f64; 5]>> = vec![None; bins];
        for s in &profile.samples {
            let b = (((s.r - rmin) / width) as usize).min(bins - 1);
            let row = [s.r, s.abs_n, s.abs_grad_n, s.log_normalized(), s.r_weighted_gradient()];
            let slot = binned[b].get_or_insert([rmin + (b as f64 + 0.5) * width, 0.0, 0.0, 0.0, 0.0]);
            for k in 1..5 {
                slot[k] = slot[k].max(row[k]);
            }
        }
        for row in binned.into_iter().flatten() {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", eps, row[0], row[1], row[2], row[3], row[4])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientTensor;
    use crate::mesh::Shape;
    use crate::solver::SolveOptions;

    fn laplace(mesh: &DomainMesh) -> NeumannOperator<'_> {
        let a = CoefficientTensor::builtin("constant", &[1.0]).unwrap();
        NeumannOperator::eps(&a, 1.0, mesh, SolveOptions::default()).unwrap()
    }

    #[test]
    fn column_is_normalized() {
        let mesh = DomainMesh::new(Shape::Disk, 64).unwrap();
        let op = laplace(&mesh);
        let mut col = neumann_function_column(&op, mesh.anchor_node(), 0).unwrap();
        assert!(col.total_load[0].abs() <= 1e-12);
        assert!(col.boundary_mean[0].abs() <= 1e-10);
        let before = col.field.clone();
        col.renormalize(&mesh);
        for (a, b) in before.values().iter().zip(col.field.values()) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn boundary_source_is_rejected() {
        let mesh = DomainMesh::new(Shape::Disk, 64).unwrap();
        let op = laplace(&mesh);
        let b = mesh.boundary_nodes()[0];
        assert!(matches!(neumann_function_column(&op, b, 0), Err(Error::SourceTooClose { .. })));
    }

    #[test]
    fn oracle_satisfies_its_boundary_condition() {
        // radial derivative on the unit circle is −1/2π for any source
        let y = [0.3, -0.2];
        let h = 1e-6;
        for k in 0..12 {
            let th = k as f64 * 0.5;
            let (c, s) = (th.cos(), th.sin());
            let d = (disk_laplace_neumann([c * (1.0 + h), s * (1.0 + h)], y) - disk_laplace_neumann([c * (1.0 - h), s * (1.0 - h)], y)) / (2.0 * h);
            assert!((d + 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-6);
        }
        // symmetric in its arguments
        let x = [-0.5, 0.1];
        assert!((disk_laplace_neumann(x, y) - disk_laplace_neumann(y, x)).abs() < 1e-14);
    }

    #[test]
    fn empty_profile_is_an_error() {
        let mesh = DomainMesh::new(Shape::Disk, 32).unwrap();
        let op = laplace(&mesh);
        let col = neumann_function_column(&op, mesh.anchor_node(), 0).unwrap();
        assert!(matches!(kernel_profile(&mesh, &[col], Some(&[])), Err(Error::EmptySamples)));
    }
}
