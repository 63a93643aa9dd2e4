//! P1 Galerkin discretization of `−div(A(x/ε)∇u)` and the mean-zero
//! conjugate-gradient solve of the resulting singular systems.

mod field;
mod load;
mod sparse;

pub use field::{DiscreteField, Gradient};
pub use load::{load_vector, Boundary, Body, BoundaryFn, Flux, FluxFn, Load, NeumannData, VecFn};
pub use sparse::CsrMatrix;

use crate::coefficients::{flat, CoeffMatrix, CoefficientTensor, Point, DIM, MAX_M};
use crate::error::{Error, Result};
use crate::mesh::{edge_midpoints, Element, Triangulation};

/// How coefficients are sampled during assembly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    /// `A(x/ε)` on a domain mesh.
    Eps(f64),
    /// `A(y)` on the periodic cell.
    Cell,
    /// `A(x)` with no oscillation constraint (constant homogenized tensors).
    Unscaled,
}

impl Scale {
    #[inline]
    pub fn apply(&self, x: Point) -> Point {
        match *self {
            Scale::Eps(eps) => [x[0] / eps, x[1] / eps],
            Scale::Cell | Scale::Unscaled => x,
        }
    }
}

/// Mesh-size rule and tolerances for oscillatory solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `‖r‖/‖L‖`.
    pub tol: f64,
    /// Allowed compatibility residual, relative to `‖L‖₁`.
    pub ctol: f64,
    /// Iteration cap is `maxiter_factor · √unknowns`.
    pub maxiter_factor: f64,
    /// Subtract the per-component load mean instead of rejecting
    /// incompatible data.
    pub project: bool,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            ctol: 1e-10,
            maxiter_factor: 20.0,
            project: false,
            preconditioner: PreconditionerKind::default(),
        }
    }
}

impl SolveOptions {
    pub fn projected(mut self) -> Self {
        self.project = true;
        self
    }
}

/// Assembled stiffness matrix with its nullspace bookkeeping.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    matrix: CsrMatrix,
    m: usize,
    scale: Scale,
    mesh_id: u64,
    node_weights: Vec<f64>,
}

/// Quadrature used for both stiffness and coefficient averages.
pub const QUADRATURE: &str = "edge-midpoint-3";

/// Mesh size must not exceed `eps / HARD_RESOLUTION`.
pub const HARD_RESOLUTION: f64 = 2.0;
/// A warning is logged when the mesh size exceeds `eps / SOFT_RESOLUTION`.
pub const SOFT_RESOLUTION: f64 = 4.0;

/// Average of `A` over the three edge midpoints of triangle `v`.
#[inline]
pub fn element_coefficient(a: &CoefficientTensor, scale: Scale, v: &[Point; 3]) -> Result<CoeffMatrix> {
    let mids = edge_midpoints(v);
    let mut avg = CoeffMatrix::zeros(a.m());
    for q in mids {
        let y = scale.apply(q);
        let val = a.evaluate(y);
        if !val.is_finite() {
            return Err(Error::NonFiniteCoefficient(y));
        }
        avg.add_scaled(&val, 1.0 / 3.0);
    }
    Ok(avg)
}

/// Checks the `h ≤ ε/2` floor and warns above `ε/4`.
pub fn check_resolution(h: f64, eps: f64) -> Result<()> {
    if h > eps / HARD_RESOLUTION {
        return Err(Error::OscillationUnresolved { h, half_eps: eps / HARD_RESOLUTION });
    }
    if h > eps / SOFT_RESOLUTION {
        log::warn!("mesh size {h:.3e} exceeds eps/4 = {:.3e}; oscillations are poorly resolved", eps / SOFT_RESOLUTION);
    }
    Ok(())
}

/// Assembles `∫ a_ij^{αβ}(x/ε) ∂_j φ^β ∂_i φ^α` with dof ordering `node·m + α`.
///
/// `h` is the nominal mesh size used for the resolution check when `scale`
/// is [`Scale::Eps`].
pub fn assemble<M: Triangulation + ?Sized>(a: &CoefficientTensor, scale: Scale, mesh: &M, h: f64) -> Result<LinearSystem> {
    if let Scale::Eps(eps) = scale {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        check_resolution(h, eps)?;
    }
    let m = a.m();
    let mut matrix = CsrMatrix::p1_pattern(mesh, m);
    for t in 0..mesh.triangle_count() {
        let v = mesh.vertices(t);
        let el = Element::new(&v);
        let coef = element_coefficient(a, scale, &v)?;
        let nodes = mesh.triangle(t);
        for (ra, &na) in nodes.iter().enumerate() {
            for (cb, &nb) in nodes.iter().enumerate() {
                for alpha in 0..m {
                    for beta in 0..m {
                        let mut s = 0.0;
                        for i in 0..DIM {
                            for j in 0..DIM {
                                s += coef.entry(flat(i, alpha), flat(j, beta)) * el.grads[cb][j] * el.grads[ra][i];
                            }
                        }
                        matrix.add(na * m + alpha, nb * m + beta, el.area * s);
                    }
                }
            }
        }
    }
    Ok(LinearSystem { matrix, m, scale, mesh_id: mesh.id(), node_weights: mesh.node_weights() })
}

impl LinearSystem {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn quadrature(&self) -> &'static str {
        QUADRATURE
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.rows()
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    /// One constant vector per component spans the nullspace.
    pub fn nullspace(&self) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|alpha| {
                let mut v = vec![0.0; self.unknowns()];
                for k in 0..self.unknowns() / self.m {
                    v[k * self.m + alpha] = 1.0;
                }
                v
            })
            .collect()
    }

    /// `½xᵀKx − Lᵀx`
    pub fn energy(&self, x: &[f64], load: &[f64]) -> f64 {
        let kx = self.matrix.mul(x);
        x.iter().zip(&kx).zip(load).map(|((xi, ki), li)| 0.5 * xi * ki - li * xi).sum()
    }
}

/// Diagnostics of a mean-zero solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖L − Ku‖₂ / ‖L‖₂` of the returned field (after any projection).
    pub relative_residual: f64,
    /// Per-component `Σ_k L_k^β` before projection.
    pub compatibility: Vec<f64>,
    pub projected: bool,
    pub energy_initial: f64,
    pub energy_final: f64,
}

fn component_sums(v: &[f64], m: usize) -> Vec<f64> {
    let mut s = vec![0.0; m];
    for (k, x) in v.iter().enumerate() {
        s[k % m] += x;
    }
    s
}

/// Removes the Euclidean per-component mean, projecting onto `range(K)`.
fn project_range(v: &mut [f64], m: usize) {
    let nodes = (v.len() / m) as f64;
    let s = component_sums(v, m);
    for (k, x) in v.iter_mut().enumerate() {
        *x -= s[k % m] / nodes;
    }
}

/// Removes the mass-weighted per-component mean.
pub(crate) fn remove_weighted_mean(v: &mut [f64], weights: &[f64], m: usize) {
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; m];
    for (k, x) in v.iter().enumerate() {
        mean[k % m] += weights[k / m] * x;
    }
    for x in mean.iter_mut() {
        *x /= total;
    }
    for (k, x) in v.iter_mut().enumerate() {
        *x -= mean[k % m];
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `K u = L` for the mean-zero representative.
///
/// Preconditioned CG; every residual is projected onto the range of `K` and
/// every preconditioned direction has its mass-weighted mean removed, so
/// iterates never drift along the constant nullspace.
pub fn solve_mean_zero(system: &LinearSystem, load: &[f64], opts: &SolveOptions) -> Result<(DiscreteField, SolveStats)> {
    solve_mean_zero_from(system, load, None, opts)
}

/// As [`solve_mean_zero`], starting from `initial` when given.
pub fn solve_mean_zero_from(
    system: &LinearSystem,
    load: &[f64],
    initial: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(DiscreteField, SolveStats)> {
    let n = system.unknowns();
    let m = system.m;
    if load.len() != n {
        return Err(Error::MeshMismatch);
    }
    let nodes = n / m;
    let compatibility = component_sums(load, m);
    let l1: f64 = load.iter().map(|x| x.abs()).sum();
    let zero = |compatibility: Vec<f64>, projected: bool| {
        let stats = SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            compatibility,
            projected,
            energy_initial: 0.0,
            energy_final: 0.0,
        };
        Ok((DiscreteField::from_values(system.mesh_id, nodes, m, vec![0.0; n]), stats))
    };
    if l1 == 0.0 {
        return zero(compatibility, false);
    }
    let incompatible = compatibility.iter().any(|r| r.abs() > opts.ctol * l1);
    if incompatible && !opts.project {
        return Err(Error::IncompatibleData { residual: compatibility });
    }
    let mut b = load.to_vec();
    if opts.project {
        project_range(&mut b, m);
    }
    let bnorm = dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        return zero(compatibility, opts.project);
    }

    let k = &system.matrix;
    let w = &system.node_weights;
    let total_weight: f64 = w.iter().sum();
    let precond = Preconditioner::new(k, opts.preconditioner);
    let mut x = match initial {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(Error::MeshMismatch),
        None => vec![0.0; n],
    };
    remove_weighted_mean(&mut x, w, m);
    let energy_initial = system.energy(&x, &b);

    let mut r = vec![0.0; n];
    k.mul_into(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&b) {
        *ri = bi - *ri;
    }
    project_range(&mut r, m);
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    remove_weighted_mean(&mut z, w, m);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = (opts.maxiter_factor * (n as f64).sqrt()).ceil() as usize;
    let mut iterations = 0;
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    while rel > opts.tol {
        if iterations >= max_iter {
            return Err(Error::NoConvergence { iterations, residual: rel });
        }
        k.mul_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::NoConvergence { iterations, residual: rel });
        }
        let alpha = rz / pq;
        let mut rr = 0.0;
        for (((xi, ri), pi), qi) in x.iter_mut().zip(r.iter_mut()).zip(&p).zip(&q) {
            *xi += alpha * pi;
            *ri -= alpha * qi;
            rr += *ri * *ri;
        }
        if iterations % 16 == 15 {
            project_range(&mut r, m);
        }
        precond.apply(&r, &mut z);
        // mass-weighted mean of z and the sums needed to correct r·z for it
        let mut zmean = [0.0; MAX_M];
        let mut rsum = [0.0; MAX_M];
        let mut rz_raw = 0.0;
        for ((zc, rc), wk) in z.chunks_exact(m).zip(r.chunks_exact(m)).zip(w) {
            for alpha in 0..m {
                zmean[alpha] += wk * zc[alpha];
                rsum[alpha] += rc[alpha];
                rz_raw += rc[alpha] * zc[alpha];
            }
        }
        let mut rz_new = rz_raw;
        for alpha in 0..m {
            zmean[alpha] /= total_weight;
            rz_new -= zmean[alpha] * rsum[alpha];
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (zc, pc) in z.chunks_exact(m).zip(p.chunks_exact_mut(m)) {
            for alpha in 0..m {
                pc[alpha] = (zc[alpha] - zmean[alpha]) + beta * pc[alpha];
            }
        }
        iterations += 1;
        rel = rr.sqrt() / bnorm;
    }
    remove_weighted_mean(&mut x, w, m);

    // true residual of the returned field
    k.mul_into(&x, &mut q);
    let res: f64 = q.iter().zip(&b).map(|(kx, bi)| (bi - kx).powi(2)).sum::<f64>().sqrt();
    let energy_final = system.energy(&x, &b);
    let stats = SolveStats {
        iterations,
        relative_residual: res / bnorm,
        compatibility,
        projected: opts.project,
        energy_initial,
        energy_final,
    };
    Ok((DiscreteField::from_values(system.mesh_id, nodes, m, x), stats))
}

/// Preconditioner choice for [`solve_mean_zero`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PreconditionerKind {
    /// Diagonal scaling.
    Jacobi,
    /// Symmetric successive over-relaxation with relaxation factor `omega`.
    Ssor { omega: f64 },
}

impl Default for PreconditionerKind {
    fn default() -> Self {
        PreconditionerKind::Ssor { omega: 1.9 }
    }
}

enum Preconditioner<'a> {
    Jacobi(Vec<f64>),
    Ssor { k: &'a CsrMatrix, diag: Vec<f64>, omega: f64 },
}

impl<'a> Preconditioner<'a> {
    fn new(k: &'a CsrMatrix, kind: PreconditionerKind) -> Self {
        let diag = k.diagonal();
        match kind {
            PreconditionerKind::Jacobi => {
                Preconditioner::Jacobi(diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 }).collect())
            }
            PreconditionerKind::Ssor { omega } => Preconditioner::Ssor { k, diag, omega },
        }
    }

    /// `z = M⁻¹ r`
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Preconditioner::Ssor { k, diag, omega } => k.ssor_solve(diag, *omega, r, z),
        }
    }
}
