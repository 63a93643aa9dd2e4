//! Oscillatory and homogenized Neumann problems on planar domains, the
//! two-scale remainder, boundary correctors `Φ_ε` and remainders `Ψ_ε`.

mod data;

pub use data::{BodySpec, BoundarySpec, DataSpec, FluxSpec};

use crate::cell::CorrectorSet;
use crate::coefficients::{flat, CoeffMatrix, CoefficientTensor, DIM, MAX_M};
use crate::error::{Error, Result};
use crate::mesh::{centroid, DomainMesh, Element, Triangulation};
use crate::solver::{
    assemble, load_vector, solve_mean_zero_from, DiscreteField, LinearSystem, NeumannData, Scale, SolveOptions, SolveStats,
};

/// Which operator a [`SolveSpec`] discretizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Oscillation {
    /// `A(x/ε)`.
    Eps(f64),
    /// The constant tensor itself, no resolution constraint.
    Homogenized,
}

/// A complete Neumann problem.
#[derive(Clone, Debug)]
pub struct SolveSpec<'m> {
    pub tensor: CoefficientTensor,
    pub oscillation: Oscillation,
    pub mesh: &'m DomainMesh,
    pub data: NeumannData,
    pub options: SolveOptions,
}

/// A solved field with its solver diagnostics.
#[derive(Clone, Debug)]
pub struct Solution {
    pub field: DiscreteField,
    pub stats: SolveStats,
}

/// Assembled operator on a domain mesh, reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct NeumannOperator<'m> {
    mesh: &'m DomainMesh,
    tensor: CoefficientTensor,
    scale: Scale,
    system: LinearSystem,
    options: SolveOptions,
}

impl<'m> NeumannOperator<'m> {
    /// `−div(A(x/ε)∇·)`; fails when `h > ε/2`.
    pub fn eps(a: &CoefficientTensor, eps: f64, mesh: &'m DomainMesh, options: SolveOptions) -> Result<Self> {
        let scale = Scale::Eps(eps);
        let system = assemble(a, scale, mesh, mesh.h())?;
        Ok(NeumannOperator { mesh, tensor: a.clone(), scale, system, options })
    }

    /// `−div(Â∇·)` for a constant tensor.
    pub fn homogenized(hat: &CoeffMatrix, mesh: &'m DomainMesh, options: SolveOptions) -> Result<Self> {
        let tensor = CoefficientTensor::constant_matrix(*hat)?;
        Self::from_spec(&tensor, Oscillation::Homogenized, mesh, options)
    }

    fn from_spec(a: &CoefficientTensor, osc: Oscillation, mesh: &'m DomainMesh, options: SolveOptions) -> Result<Self> {
        match osc {
            Oscillation::Eps(eps) => Self::eps(a, eps, mesh, options),
            Oscillation::Homogenized => {
                if !a.is_constant() {
                    return Err(Error::InvalidParameter("homogenized solves need a constant tensor".into()));
                }
                let system = assemble(a, Scale::Unscaled, mesh, mesh.h())?;
                Ok(NeumannOperator { mesh, tensor: a.clone(), scale: Scale::Unscaled, system, options })
            }
        }
    }

    pub fn mesh(&self) -> &'m DomainMesh {
        self.mesh
    }

    pub fn tensor(&self) -> &CoefficientTensor {
        &self.tensor
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn options(&self) -> &SolveOptions {
        &self.options
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    pub fn solve(&self, data: &NeumannData) -> Result<Solution> {
        self.solve_from(data, None)
    }

    /// Solves starting from `initial` (nodal values), e.g. a homogenized
    /// approximation.
    pub fn solve_from(&self, data: &NeumannData, initial: Option<&[f64]>) -> Result<Solution> {
        let load = load_vector(self.mesh, self.m(), data)?;
        self.solve_load(&load.values, initial)
    }

    pub fn solve_load(&self, load: &[f64], initial: Option<&[f64]>) -> Result<Solution> {
        let (field, stats) = solve_mean_zero_from(&self.system, load, initial, &self.options)?;
        Ok(Solution { field, stats })
    }
}

/// Solves the problem with coefficients `A(x/ε)`.
pub fn solve_eps(spec: &SolveSpec) -> Result<Solution> {
    if !matches!(spec.oscillation, Oscillation::Eps(_)) {
        return Err(Error::InvalidParameter("solve_eps needs a finite eps".into()));
    }
    NeumannOperator::from_spec(&spec.tensor, spec.oscillation, spec.mesh, spec.options)?.solve(&spec.data)
}

/// Solves the constant-coefficient problem `−div(Â∇u) = …`.
pub fn solve_homogenized(hat: &CoeffMatrix, mesh: &DomainMesh, data: &NeumannData, options: SolveOptions) -> Result<Solution> {
    NeumannOperator::homogenized(hat, mesh, options)?.solve(data)
}

/// Strong conormal derivative `n_i a_ij^{αβ}(mid/ε) ∂_j u^β` on every
/// boundary edge, from the gradient of the adjacent triangle.
pub fn conormal_trace(a: &CoefficientTensor, scale: Scale, mesh: &DomainMesh, field: &DiscreteField) -> Result<Vec<[f64; MAX_M]>> {
    let m = field.m();
    if m != a.m() {
        return Err(Error::MeshMismatch);
    }
    let grad = field.gradient(mesh)?;
    Ok(mesh
        .boundary_edges()
        .iter()
        .map(|e| {
            let coef = a.evaluate(scale.apply(e.midpoint));
            let mut out = [0.0; MAX_M];
            for (alpha, o) in out.iter_mut().enumerate().take(m) {
                for i in 0..DIM {
                    for j in 0..DIM {
                        for beta in 0..m {
                            *o += e.normal[i] * coef.get(i, j, alpha, beta) * grad.get(e.triangle, beta)[j];
                        }
                    }
                }
            }
            out
        })
        .collect())
}

/// Field that is linear on each triangle but may jump across edges; values
/// are stored per `(triangle, component)` at the three vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenField {
    m: usize,
    values: Vec<[f64; 3]>,
}

impl BrokenField {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Vertex values of component `α` on triangle `t`.
    pub fn get(&self, t: usize, alpha: usize) -> [f64; 3] {
        self.values[t * self.m + alpha]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `(‖w‖²_{L²}, ‖∇w‖²_{L²})` with exact integration of the linear pieces.
    pub fn squared_norms(&self, mesh: &DomainMesh) -> (f64, f64) {
        let (mut l2, mut h1) = (0.0, 0.0);
        for t in 0..mesh.triangle_count() {
            let el = Element::new(&mesh.vertices(t));
            for alpha in 0..self.m {
                let v = self.get(t, alpha);
                l2 += linear_square_integral(el.area, v);
                let mut g = [0.0; 2];
                for a in 0..3 {
                    g[0] += v[a] * el.grads[a][0];
                    g[1] += v[a] * el.grads[a][1];
                }
                h1 += el.area * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        (l2, h1)
    }
}

/// `∫_T v²` for the linear function with vertex values `v`.
#[inline]
fn linear_square_integral(area: f64, v: [f64; 3]) -> f64 {
    area / 6.0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[0] * v[1] + v[1] * v[2] + v[2] * v[0])
}

/// `‖u − v‖_{L²}` of two P1 fields, exactly integrated.
pub fn l2_difference(mesh: &DomainMesh, u: &DiscreteField, v: &DiscreteField) -> Result<f64> {
    u.check_mesh(mesh)?;
    v.check_mesh(mesh)?;
    if u.m() != v.m() {
        return Err(Error::MeshMismatch);
    }
    let mut s = 0.0;
    for t in 0..mesh.triangle_count() {
        let area = Element::new(&mesh.vertices(t)).area;
        let tri = mesh.triangle(t);
        for alpha in 0..u.m() {
            let d = tri.map(|k| u.value(k, alpha) - v.value(k, alpha));
            s += linear_square_integral(area, d);
        }
    }
    Ok(s.sqrt())
}

/// `w_ε = u_ε − u₀ − εχ(x/ε)∇u₀` together with its summary norms.
#[derive(Clone, Debug)]
pub struct TwoScale {
    pub remainder: BrokenField,
    /// `‖u_ε − u₀‖_{L²}` after mean alignment.
    pub l2_difference: f64,
    /// `‖w_ε‖_{W^{1,2}}`.
    pub w12: f64,
}

/// Two-scale expansion remainder. Both solutions are shifted to mass-weighted
/// mean zero first; `∇u₀` is the raw per-triangle gradient and `χ(x/ε)` is
/// sampled at the vertices of each triangle.
pub fn two_scale_remainder(
    mesh: &DomainMesh,
    u_eps: &DiscreteField,
    u0: &DiscreteField,
    cs: &CorrectorSet,
    eps: f64,
) -> Result<TwoScale> {
    u_eps.check_mesh(mesh)?;
    u0.check_mesh(mesh)?;
    let m = u0.m();
    if u_eps.m() != m || cs.m() != m {
        return Err(Error::MeshMismatch);
    }
    let ue = u_eps.mean_aligned(mesh);
    let uh = u0.mean_aligned(mesh);
    let g0 = uh.gradient(mesh)?;
    let nodes = mesh.nodes();
    let mut values = Vec::with_capacity(mesh.triangle_count() * m);
    for t in 0..mesh.triangle_count() {
        let tri = mesh.triangle(t);
        for alpha in 0..m {
            let mut w = [0.0; 3];
            for (a, &k) in tri.iter().enumerate() {
                let y = [nodes[k][0] / eps, nodes[k][1] / eps];
                let mut corr = 0.0;
                for j in 0..DIM {
                    for beta in 0..m {
                        corr += cs.chi_at(j, alpha, beta, y) * g0.get(t, beta)[j];
                    }
                }
                w[a] = ue.value(k, alpha) - uh.value(k, alpha) - eps * corr;
            }
            values.push(w);
        }
    }
    let remainder = BrokenField { m, values };
    let (l2, h1) = remainder.squared_norms(mesh);
    Ok(TwoScale { remainder, l2_difference: l2_difference(mesh, &ue, &uh)?, w12: (l2 + h1).sqrt() })
}

/// Boundary correctors `Φ_{ε,j}^β` and the data they were built from.
#[derive(Clone, Debug)]
pub struct BoundaryCorrectorSet {
    eps: f64,
    anchor: usize,
    homogenized: CoeffMatrix,
    phi: Vec<DiscreteField>,
    compatibility: Vec<f64>,
    stats: Vec<SolveStats>,
}

impl BoundaryCorrectorSet {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn homogenized(&self) -> &CoeffMatrix {
        &self.homogenized
    }

    pub fn m(&self) -> usize {
        self.homogenized.m()
    }

    /// Column `(j, β)`: component `α` is `Φ_{ε,j}^{αβ}`.
    pub fn phi(&self, j: usize, beta: usize) -> &DiscreteField {
        &self.phi[flat(j, beta)]
    }

    /// Largest per-component data compatibility residual over all columns.
    pub fn compatibility(&self) -> f64 {
        self.compatibility.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn stats(&self) -> &[SolveStats] {
        &self.stats
    }
}

/// Solves `L_ε Φ = 0`, `∂Φ/∂ν_ε = n_i â_ij^{αβ}` for every `(j, β)` and
/// shifts each column to vanish at the node nearest the origin.
pub fn boundary_corrector(op: &NeumannOperator, hat: &CoeffMatrix) -> Result<BoundaryCorrectorSet> {
    let Scale::Eps(eps) = op.scale() else {
        return Err(Error::InvalidParameter("boundary correctors need an eps operator".into()));
    };
    let mesh = op.mesh();
    let m = op.m();
    if hat.m() != m {
        return Err(Error::MeshMismatch);
    }
    let anchor = mesh.anchor_node();
    let nodes = mesh.nodes();
    let mut phi = vec![None; DIM * m];
    let mut compatibility = vec![0.0; DIM * m];
    let mut stats = vec![None; DIM * m];
    for beta in 0..m {
        for j in 0..DIM {
            let mut gradient = [[0.0; DIM]; MAX_M];
            gradient[beta][j] = 1.0;
            let data = NeumannData::conormal_of_linear(*hat, gradient);
            let load = load_vector(mesh, m, &data)?;
            // P_j^β is the homogenized profile of the column
            let mut start = vec![0.0; mesh.node_count() * m];
            for (k, p) in nodes.iter().enumerate() {
                start[k * m + beta] = p[j];
            }
            let sol = op.solve_load(&load.values, Some(&start))?;
            let shift: Vec<f64> = (0..m).map(|alpha| -sol.field.value(anchor, alpha)).collect();
            let col = flat(j, beta);
            compatibility[col] = load.compatibility.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            phi[col] = Some(sol.field.shifted(&shift));
            stats[col] = Some(sol.stats);
        }
    }
    Ok(BoundaryCorrectorSet {
        eps,
        anchor,
        homogenized: *hat,
        phi: phi.into_iter().map(|p| p.expect("column solved")).collect(),
        compatibility,
        stats: stats.into_iter().map(|s| s.expect("column solved")).collect(),
    })
}

/// `Ψ_ε` columns and the decay profile `ρ = |∇Ψ_ε|·δ/ε`.
#[derive(Clone, Debug)]
pub struct PsiRemainder {
    psi: Vec<DiscreteField>,
    /// `(triangle, δ(centroid), |∇Ψ|, ρ)` over admissible triangles, where
    /// `|∇Ψ|` is the largest Frobenius norm over the columns.
    pub profile: Vec<(usize, f64, f64, f64)>,
    pub max_rho: f64,
    /// Triangles with `δ < 4h`, left out of the profile.
    pub excluded: usize,
}

impl PsiRemainder {
    /// Column `(j, β)` of `Ψ_ε`.
    pub fn psi(&self, j: usize, beta: usize) -> &DiscreteField {
        &self.psi[flat(j, beta)]
    }

    /// `max_t |∇Ψ|` over every triangle, including those near the boundary.
    pub fn max_gradient(&self, mesh: &DomainMesh) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in &self.psi {
            let g = p.gradient(mesh)?;
            for t in 0..mesh.triangle_count() {
                worst = worst.max(g.magnitude(t));
            }
        }
        Ok(worst)
    }
}

/// Minimum boundary distance, in mesh sizes, of triangles in the Ψ profile.
pub const PSI_MARGIN: f64 = 4.0;

/// `Ψ_{ε,j}^{αβ} = Φ_{ε,j}^{αβ} − x_j δ_{αβ} − εχ_j^{αβ}(x/ε)` at the nodes.
pub fn psi_remainder(mesh: &DomainMesh, bcs: &BoundaryCorrectorSet, cs: &CorrectorSet) -> Result<PsiRemainder> {
    let m = bcs.m();
    let eps = bcs.eps;
    if cs.m() != m {
        return Err(Error::MeshMismatch);
    }
    let nodes = mesh.nodes();
    let mut psi = Vec::with_capacity(DIM * m);
    for beta in 0..m {
        for j in 0..DIM {
            let phi = bcs.phi(j, beta);
            phi.check_mesh(mesh)?;
            let mut values = Vec::with_capacity(mesh.node_count() * m);
            for (k, p) in nodes.iter().enumerate() {
                let y = [p[0] / eps, p[1] / eps];
                for alpha in 0..m {
                    let linear = if alpha == beta { p[j] } else { 0.0 };
                    values.push(phi.value(k, alpha) - linear - eps * cs.chi_at(j, alpha, beta, y));
                }
            }
            psi.push(DiscreteField::new(mesh, m, values)?);
        }
    }
    // columns were pushed in (β, j) order, which is flat(j, β)
    let grads = psi.iter().map(|p| p.gradient(mesh)).collect::<Result<Vec<_>>>()?;
    let min_delta = PSI_MARGIN * mesh.h();
    let mut profile = Vec::new();
    let mut excluded = 0;
    let mut max_rho = 0.0f64;
    for t in 0..mesh.triangle_count() {
        let delta = mesh.distance_to_boundary(centroid(&mesh.vertices(t)));
        if delta < min_delta {
            excluded += 1;
            continue;
        }
        let g = grads.iter().map(|g| g.magnitude(t)).fold(0.0f64, f64::max);
        let rho = g * delta / eps;
        max_rho = max_rho.max(rho);
        profile.push((t, delta, g, rho));
    }
    Ok(PsiRemainder { psi, profile, max_rho, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Boundary;
    use std::sync::Arc;

    fn disk(n: usize) -> DomainMesh {
        DomainMesh::new(Shape::Disk, n).unwrap()
    }

    use crate::mesh::Shape;

    #[test]
    fn constant_tensor_reproduces_linear_solution() {
        let mesh = disk(64);
        let a = CoefficientTensor::builtin("constant", &[1.0]).unwrap();
        let data = NeumannData::conormal_of_linear(CoeffMatrix::scalar(1, 1.0), [[1.0, 0.0], [0.0, 0.0]]);
        let spec = SolveSpec { tensor: a, oscillation: Oscillation::Eps(0.5), mesh: &mesh, data, options: SolveOptions::default() };
        let u = solve_eps(&spec).unwrap().field;
        let exact = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |p| [p[0], 0.0]).mean_aligned(&mesh);
        for k in 0..mesh.node_count() {
            assert!((u.value(k, 0) - exact.value(k, 0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_eps_and_homogenized_paths_agree_bitwise() {
        let mesh = disk(48);
        let a = CoefficientTensor::builtin("constant", &[2.5]).unwrap();
        let data = NeumannData::boundary(Boundary::Analytic(Arc::new(|p, _| [p[0] * p[1], 0.0])));
        let spec = SolveSpec {
            tensor: a.clone(),
            oscillation: Oscillation::Eps(1.0),
            mesh: &mesh,
            data: data.clone(),
            options: SolveOptions::default(),
        };
        let ue = solve_eps(&spec).unwrap().field;
        let u0 = solve_homogenized(&a.evaluate([0.0, 0.0]), &mesh, &data, SolveOptions::default()).unwrap().field;
        assert_eq!(ue.values(), u0.values());
    }

    #[test]
    fn incompatible_data_carries_residual() {
        let mesh = disk(64);
        let data = NeumannData::boundary(Boundary::Nodal(vec![1.0; 64]));
        match solve_homogenized(&CoeffMatrix::scalar(1, 1.0), &mesh, &data, SolveOptions::default()) {
            Err(Error::IncompatibleData { residual }) => assert!((residual[0] - mesh.perimeter()).abs() < 1e-12),
            other => panic!("expected incompatibility, got {other:?}"),
        }
    }

    #[test]
    fn linear_conormal_trace() {
        let mesh = disk(32);
        let a = CoefficientTensor::builtin("constant", &[1.0]).unwrap();
        let u = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |p| [p[0], 0.0]);
        let tr = conormal_trace(&a, Scale::Unscaled, &mesh, &u).unwrap();
        for (e, v) in mesh.boundary_edges().iter().zip(&tr) {
            assert!((v[0] - e.normal[0]).abs() <= 1e-12);
        }
        let c = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |_| [3.0, 0.0]);
        assert!(conormal_trace(&a, Scale::Unscaled, &mesh, &c).unwrap().iter().all(|v| v[0].abs() < 1e-12));
    }

    #[test]
    fn broken_norms_of_linear_field() {
        let mesh = disk(64);
        let u = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |p| [p[0], 0.0]);
        let zero = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |_| [0.0, 0.0]);
        // ∫x₁² over the polygon approaches π/4
        let l2 = l2_difference(&mesh, &u, &zero).unwrap();
        assert!((l2 * l2 - std::f64::consts::FRAC_PI_4).abs() < 1e-2);
    }
}
