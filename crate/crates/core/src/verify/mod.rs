//! Discrete norms and the statistics that turn uniform-in-ε estimates into
//! checks: Hölder seminorms, nontangential maximal functions, Rellich
//! ratios and rate fits. Sweeps are driven by [`run_experiment`].

mod config;
mod experiment;

pub use config::{Config, Profile};
pub use experiment::{
    closed_form_homogenized, flux_lp, kernel_sources, run_experiment, run_experiments, Check, ExperimentKind, Fit, Record,
    SweepReport, HOLDER_SPREAD, KERNEL_SPREAD, LIPSCHITZ_SPREAD, NTMF_SPREAD, PSI_SPREAD, RELLICH_SPREAD, REPORT_SCHEMA,
    TWO_SCALE_RESIDUAL, TWO_SCALE_SLOPE, W1P_SPREAD,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coefficients::MAX_M;
use crate::error::{Error, Result};
use crate::mesh::{centroid, dist, edge_midpoints, DomainMesh, Element, Triangulation};
use crate::neumann::{conormal_trace, NeumannOperator};
use crate::solver::{DiscreteField, Gradient};

/// What to measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    /// `‖u‖_{L^p(Ω)}`
    Lp(f64),
    /// `(‖u‖^p_{L^p} + ‖∇u‖^p_{L^p})^{1/p}`
    W1p(f64),
    /// `‖∇u‖_{L^p(Ω)}`
    GradientLp(f64),
    /// `max_T |∇u|`
    SupGradient,
    /// Sampled `C^{0,γ}` seminorm.
    Holder { gamma: f64, samples: usize, seed: u64 },
    /// `‖u‖_{L^p(∂Ω)}` of a nodal field's boundary values or of edge values.
    LpBoundary(f64),
    /// `‖(∇u)*‖_{L^p(∂Ω)}` with aperture `c0`.
    NtmfLp { p: f64, c0: f64 },
}

/// Field or boundary data a norm is applied to.
#[derive(Clone, Copy, Debug)]
pub enum NormInput<'a> {
    Field { mesh: &'a DomainMesh, field: &'a DiscreteField },
    /// One value per boundary edge (e.g. a conormal trace), `m` components.
    EdgeValues { mesh: &'a DomainMesh, values: &'a [[f64; MAX_M]], m: usize },
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")))
    }
}

/// Evaluates `kind` on `input`.
pub fn norm(input: NormInput, kind: NormKind) -> Result<f64> {
    match (kind, input) {
        (NormKind::Lp(p), NormInput::Field { mesh, field }) => {
            check_p(p)?;
            field.check_mesh(mesh)?;
            Ok(domain_power(mesh, field, p).powf(1.0 / p))
        }
        (NormKind::W1p(p), NormInput::Field { mesh, field }) => {
            check_p(p)?;
            let g = gradient_power(mesh, field.gradient(mesh)?, p);
            Ok((domain_power(mesh, field, p) + g).powf(1.0 / p))
        }
        (NormKind::GradientLp(p), NormInput::Field { mesh, field }) => {
            check_p(p)?;
            Ok(gradient_power(mesh, field.gradient(mesh)?, p).powf(1.0 / p))
        }
        (NormKind::SupGradient, NormInput::Field { mesh, field }) => {
            let g = field.gradient(mesh)?;
            Ok((0..mesh.triangle_count()).map(|t| g.magnitude(t)).fold(0.0, f64::max))
        }
        (NormKind::Holder { gamma, samples, seed }, NormInput::Field { mesh, field }) => {
            holder_seminorm(mesh, field, gamma, samples, seed)
        }
        (NormKind::LpBoundary(p), NormInput::Field { mesh, field }) => {
            check_p(p)?;
            field.check_mesh(mesh)?;
            let m = field.m();
            let values: Vec<f64> = mesh
                .boundary_nodes()
                .iter()
                .map(|&k| (0..m).map(|a| field.value(k, a).powi(2)).sum::<f64>().sqrt())
                .collect();
            Ok(boundary_linear_lp(mesh, &values, p))
        }
        (NormKind::LpBoundary(p), NormInput::EdgeValues { mesh, values, m }) => {
            check_p(p)?;
            if values.len() != mesh.boundary_edges().len() {
                return Err(Error::MeshMismatch);
            }
            let s: f64 = mesh
                .boundary_edges()
                .iter()
                .zip(values)
                .map(|(e, v)| e.length * v[..m].iter().map(|x| x * x).sum::<f64>().sqrt().powf(p))
                .sum();
            Ok(s.powf(1.0 / p))
        }
        (NormKind::NtmfLp { p, c0 }, NormInput::Field { mesh, field }) => {
            check_p(p)?;
            let ntmf = nontangential_max(mesh, field.gradient(mesh)?, c0)?;
            Ok(boundary_linear_lp(mesh, &ntmf.values, p))
        }
        (kind, _) => Err(Error::IncompatibleNorm(format!("{kind:?}"))),
    }
}

/// `∫|u|^p` with the edge-midpoint rule (exact for `p = 2`).
fn domain_power(mesh: &DomainMesh, field: &DiscreteField, p: f64) -> f64 {
    let m = field.m();
    let mut s = 0.0;
    for t in 0..mesh.triangle_count() {
        let area = Element::new(&mesh.vertices(t)).area;
        let tri = mesh.triangle(t);
        for q in 0..3 {
            let (a, b) = (tri[q], tri[(q + 1) % 3]);
            let mut v2 = 0.0;
            for alpha in 0..m {
                let v = 0.5 * (field.value(a, alpha) + field.value(b, alpha));
                v2 += v * v;
            }
            s += area / 3.0 * v2.sqrt().powf(p);
        }
    }
    s
}

fn gradient_power(mesh: &DomainMesh, g: &Gradient, p: f64) -> f64 {
    (0..mesh.triangle_count()).map(|t| Element::new(&mesh.vertices(t)).area * g.magnitude(t).powf(p)).sum()
}

/// `‖v‖_{L^p(∂Ω)}` for values at the boundary nodes, linear along edges,
/// integrated with Simpson's rule per edge.
pub fn boundary_linear_lp(mesh: &DomainMesh, values: &[f64], p: f64) -> f64 {
    let nb = values.len();
    let s: f64 = mesh
        .boundary_edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let (a, b) = (values[k].abs(), values[(k + 1) % nb].abs());
            e.length / 6.0 * (a.powf(p) + 4.0 * (0.5 * (a + b)).powf(p) + b.powf(p))
        })
        .sum();
    s.powf(1.0 / p)
}

/// Minimum number of admissible pairs for a Hölder estimate.
pub const MIN_HOLDER_PAIRS: usize = 10;
/// Cap on the number of pairs examined.
pub const MAX_HOLDER_PAIRS: usize = 1_000_000;

/// `max |u(x) − u(y)| / |x − y|^γ` over pairs of `sample_count` seeded
/// random nodes with separation at least `2h`.
///
/// Nodes are taken as a prefix of one seeded permutation, so the estimate
/// never decreases when `sample_count` grows.
pub fn holder_seminorm(mesh: &DomainMesh, field: &DiscreteField, gamma: f64, sample_count: usize, seed: u64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("Hölder exponent must lie in (0, 1], got {gamma}")));
    }
    field.check_mesh(mesh)?;
    let mut order: Vec<usize> = (0..mesh.node_count()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.truncate(sample_count);
    let nodes = mesh.nodes();
    let min_sep = 2.0 * mesh.h();
    let m = field.m();
    let mut pairs = 0usize;
    let mut best = 0.0f64;
    'outer: for (i, &a) in order.iter().enumerate() {
        for &b in &order[..i] {
            let d = dist(nodes[a], nodes[b]);
            if d < min_sep {
                continue;
            }
            if pairs == MAX_HOLDER_PAIRS {
                break 'outer;
            }
            pairs += 1;
            let du = (0..m).map(|al| (field.value(a, al) - field.value(b, al)).powi(2)).sum::<f64>().sqrt();
            best = best.max(du / d.powf(gamma));
        }
    }
    if pairs < MIN_HOLDER_PAIRS {
        return Err(Error::TooFewPairs { found: pairs, needed: MIN_HOLDER_PAIRS });
    }
    Ok(best)
}

/// `(∇u)*` at the boundary nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Ntmf {
    /// One value per boundary node, in boundary order.
    pub values: Vec<f64>,
    /// Boundary nodes whose cone held no triangle centroid.
    pub fallbacks: Vec<usize>,
}

/// `(∇u)*(P) = max{|∇u(x)| : |x − P| < c0·δ(x)}` over triangle centroids
/// `x`. A node whose cone is empty takes the value of its nearest
/// boundary-edge triangle and is listed in `fallbacks`.
pub fn nontangential_max(mesh: &DomainMesh, grad: &Gradient, c0: f64) -> Result<Ntmf> {
    if !(c0 > 1.0) {
        return Err(Error::InvalidParameter(format!("aperture must exceed 1, got {c0}")));
    }
    let nt = mesh.triangle_count();
    if grad.triangle_count() != nt {
        return Err(Error::MeshMismatch);
    }
    // centroids by decreasing |∇u|: the first hit in a cone is its maximum
    let mut order: Vec<(f64, usize)> = (0..nt).map(|t| (grad.magnitude(t), t)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let cents: Vec<([f64; 2], f64)> = order
        .iter()
        .map(|&(_, t)| {
            let c = centroid(&mesh.vertices(t));
            (c, mesh.distance_to_boundary(c))
        })
        .collect();
    let nodes = mesh.nodes();
    let edges = mesh.boundary_edges();
    let mut values = Vec::with_capacity(mesh.boundary_nodes().len());
    let mut fallbacks = Vec::new();
    for (k, &node) in mesh.boundary_nodes().iter().enumerate() {
        let p = nodes[node];
        let hit = order.iter().zip(&cents).find(|(_, (c, delta))| dist(*c, p) < c0 * delta);
        match hit {
            Some((&(g, _), _)) => values.push(g),
            None => {
                fallbacks.push(node);
                values.push(grad.magnitude(edges[k].triangle));
            }
        }
    }
    Ok(Ntmf { values, fallbacks })
}

/// Largest `|∇u|` over the triangles touching boundary node `k` whose
/// centroid lies in the node's cone; `None` if there is none.
pub fn boundary_trace_in_cone(mesh: &DomainMesh, grad: &Gradient, c0: f64, k: usize) -> Option<f64> {
    let p = mesh.nodes()[mesh.boundary_nodes()[k]];
    let edges = mesh.boundary_edges();
    let nb = edges.len();
    [edges[k].triangle, edges[(k + nb - 1) % nb].triangle]
        .iter()
        .filter(|&&t| {
            let c = centroid(&mesh.vertices(t));
            dist(c, p) < c0 * mesh.distance_to_boundary(c)
        })
        .map(|&t| grad.magnitude(t))
        .reduce(f64::max)
}

/// Allowed interior residual of `L_ε u = 0`, relative to the largest entry
/// of `K u`.
pub const RELLICH_RESIDUAL: f64 = 1e-8;

/// `∫_{∂Ω}|∇u|² / ∫_{∂Ω}|∂u/∂ν_ε|²` with both integrands taken from the
/// boundary-edge triangles.
pub fn rellich_ratio(op: &NeumannOperator, field: &DiscreteField) -> Result<f64> {
    let mesh = op.mesh();
    field.check_mesh(mesh)?;
    let m = field.m();
    let ku = op.system().matrix().mul(field.values());
    // rounding floor of K u, so that fields with K u ≈ 0 reach the ratio check
    let floor = 1e-12 * op.system().matrix().max_abs() * field.max_abs();
    let scale = ku.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let interior = (0..mesh.node_count())
        .filter(|&k| !mesh.is_boundary(k))
        .flat_map(|k| (0..m).map(move |a| k * m + a))
        .fold(0.0f64, |a, i| a.max(ku[i].abs()));
    if interior > RELLICH_RESIDUAL * scale + floor {
        return Err(Error::InvalidParameter(format!(
            "field does not solve the homogeneous equation: interior residual {interior:.3e} vs {scale:.3e}"
        )));
    }
    let grad = field.gradient(mesh)?;
    let trace = conormal_trace(op.tensor(), op.scale(), mesh, field)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, c) in mesh.boundary_edges().iter().zip(&trace) {
        num += e.length * grad.magnitude(e.triangle).powi(2);
        den += e.length * c[..m].iter().map(|v| v * v).sum::<f64>();
    }
    if den < 1e-14 {
        return Err(Error::UndefinedRatio(den));
    }
    Ok(num / den)
}

/// Least-squares slope of `ln value` against `ln ε` and the RMS residual.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { found: points.len(), needed: 3 });
    }
    for &(e, v) in points {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue(v));
        }
        if !(e > 0.0) {
            return Err(Error::NonPositiveValue(e));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct eps values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, rms))
}

/// `max / min` of positive values.
pub fn spread(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositiveValue(min));
    }
    Ok(max / min)
}

/// Edge-midpoint quadrature points of every triangle, used by tests that
/// need samples of analytic functions with the norm's own rule.
pub fn quadrature_points(mesh: &DomainMesh) -> Vec<[f64; 2]> {
    (0..mesh.triangle_count()).flat_map(|t| edge_midpoints(&mesh.vertices(t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientTensor;
    use crate::mesh::Shape;
    use crate::solver::SolveOptions;

    fn disk(n: usize) -> DomainMesh {
        DomainMesh::new(Shape::Disk, n).unwrap()
    }

    fn x1(mesh: &DomainMesh) -> DiscreteField {
        DiscreteField::from_fn(mesh, mesh.nodes(), 1, |p| [p[0], 0.0])
    }

    #[test]
    fn constant_field_l2() {
        let mesh = disk(64);
        let one = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |_| [1.0, 0.0]);
        let v = norm(NormInput::Field { mesh: &mesh, field: &one }, NormKind::Lp(2.0)).unwrap();
        assert!((v - mesh.total_area().sqrt()).abs() < 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-2);
    }

    #[test]
    fn linear_field_norms() {
        let mesh = disk(64);
        let u = x1(&mesh);
        let input = NormInput::Field { mesh: &mesh, field: &u };
        assert!((norm(input, NormKind::SupGradient).unwrap() - 1.0).abs() <= 1e-13);
        let b = norm(input, NormKind::LpBoundary(2.0)).unwrap();
        assert!((b - std::f64::consts::PI.sqrt()).abs() < 1e-2);
        let ntmf = nontangential_max(&mesh, u.gradient(&mesh).unwrap(), 2.0).unwrap();
        assert!(ntmf.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let h = holder_seminorm(&mesh, &u, 1.0, 400, 7).unwrap();
        assert!((0.95..=1.0 + 1e-12).contains(&h));
    }

    #[test]
    fn constant_field_statistics_vanish() {
        let mesh = disk(32);
        let c = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |_| [2.0, 0.0]);
        assert_eq!(holder_seminorm(&mesh, &c, 0.5, 100, 1).unwrap(), 0.0);
        let ntmf = nontangential_max(&mesh, c.gradient(&mesh).unwrap(), 2.0).unwrap();
        assert!(ntmf.values.iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn holder_needs_pairs() {
        let mesh = disk(32);
        let u = x1(&mesh);
        assert!(matches!(holder_seminorm(&mesh, &u, 0.5, 3, 0), Err(Error::TooFewPairs { .. })));
    }

    #[test]
    fn rellich_linear_and_constant() {
        let mesh = disk(256);
        let a = CoefficientTensor::builtin("constant", &[1.0]).unwrap();
        let op = NeumannOperator::eps(&a, 1.0, &mesh, SolveOptions::default()).unwrap();
        let r = rellich_ratio(&op, &x1(&mesh)).unwrap();
        assert!((r - 2.0).abs() <= 5e-2);
        let c = DiscreteField::from_fn(&mesh, mesh.nodes(), 1, |_| [1.0, 0.0]);
        assert!(matches!(rellich_ratio(&op, &c), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn fit_rate_examples() {
        let (s, r) = fit_rate(&[(0.125, 0.1), (0.0625, 0.05), (0.03125, 0.025)]).unwrap();
        assert!((s - 1.0).abs() < 1e-12 && r < 1e-12);
        let (s, _) = fit_rate(&[(0.125, 0.04), (0.0625, 0.01), (0.03125, 0.0025)]).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        let (s, _) = fit_rate(&[(0.125, 3.0), (0.0625, 3.0), (0.03125, 3.0)]).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(matches!(fit_rate(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]), Err(Error::NonPositiveValue(_))));
    }

    #[test]
    fn incompatible_inputs_are_rejected() {
        let mesh = disk(32);
        let vals = vec![[1.0, 0.0]; mesh.boundary_edges().len()];
        let input = NormInput::EdgeValues { mesh: &mesh, values: &vals, m: 1 };
        assert!(matches!(norm(input, NormKind::SupGradient), Err(Error::IncompatibleNorm(_))));
        let l = norm(input, NormKind::LpBoundary(2.0)).unwrap();
        assert!((l - mesh.perimeter().sqrt()).abs() < 1e-12);
    }
}
