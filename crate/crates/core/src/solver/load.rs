use std::fmt;
use std::sync::Arc;

use crate::coefficients::{flat, CoeffMatrix, Point, DIM, MAX_M};
use crate::error::{Error, Result};
use crate::mesh::{edge_midpoints, DomainMesh, Element, Triangulation};

/// Divergence-form flux `f_i^β(x)`, indexed `[β][i]`.
pub type FluxFn = Arc<dyn Fn(Point) -> [[f64; DIM]; MAX_M] + Send + Sync>;
/// Body force `F^β(x)`.
pub type VecFn = Arc<dyn Fn(Point) -> [f64; MAX_M] + Send + Sync>;
/// Boundary flux `g^β(x, n)` given the point and the outward edge normal.
pub type BoundaryFn = Arc<dyn Fn(Point, [f64; 2]) -> [f64; MAX_M] + Send + Sync>;

#[derive(Clone, Default)]
pub enum Flux {
    #[default]
    Zero,
    Analytic(FluxFn),
    /// `f_i^β` per triangle, laid out `(t·m + β)·2 + i`.
    PerTriangle(Vec<f64>),
}

#[derive(Clone, Default)]
pub enum Body {
    #[default]
    Zero,
    Analytic(VecFn),
    /// P1 nodal values `node·m + β`.
    Nodal(Vec<f64>),
}

#[derive(Clone, Default)]
pub enum Boundary {
    #[default]
    Zero,
    Analytic(BoundaryFn),
    /// Values at boundary nodes (in boundary order), `k·m + β`, linear along edges.
    Nodal(Vec<f64>),
    /// Conormal derivative `n_i T_ij^{αβ} G_j^β` of the linear map `x ↦ Gx`
    /// under a constant tensor `T`; `gradient` is indexed `[β][j]`.
    ConormalOfLinear { tensor: CoeffMatrix, gradient: [[f64; DIM]; MAX_M] },
}

/// Right-hand sides of the Neumann problem
/// `−div(A∇u) = div f + F`, `∂u/∂ν = g − n·f`.
#[derive(Clone, Default)]
pub struct NeumannData {
    pub flux: Flux,
    pub body: Body,
    pub boundary: Boundary,
}

impl fmt::Debug for NeumannData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = |s: &str| s.to_string();
        f.debug_struct("NeumannData")
            .field(
                "flux",
                &kind(match self.flux {
                    Flux::Zero => "zero",
                    Flux::Analytic(_) => "analytic",
                    Flux::PerTriangle(_) => "per-triangle",
                }),
            )
            .field(
                "body",
                &kind(match self.body {
                    Body::Zero => "zero",
                    Body::Analytic(_) => "analytic",
                    Body::Nodal(_) => "nodal",
                }),
            )
            .field(
                "boundary",
                &kind(match self.boundary {
                    Boundary::Zero => "zero",
                    Boundary::Analytic(_) => "analytic",
                    Boundary::Nodal(_) => "nodal",
                    Boundary::ConormalOfLinear { .. } => "conormal-of-linear",
                }),
            )
            .finish()
    }
}

impl NeumannData {
    pub fn boundary(g: Boundary) -> Self {
        NeumannData { boundary: g, ..Default::default() }
    }

    /// Conormal data of `x ↦ Gx` for the constant tensor `tensor`.
    pub fn conormal_of_linear(tensor: CoeffMatrix, gradient: [[f64; DIM]; MAX_M]) -> Self {
        Self::boundary(Boundary::ConormalOfLinear { tensor, gradient })
    }
}

/// Assembled load with its per-component compatibility residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub values: Vec<f64>,
    /// `Σ_k L_k^β`, the discrete `∫F^β + ∫g^β`.
    pub compatibility: Vec<f64>,
}

const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// `L(φ) = ∫(−f·∇φ + F·φ) + ∫_{∂Ω} g·φ dσ` for every P1 test function.
///
/// Area terms use the edge-midpoint rule, boundary terms two-point Gauss on
/// each straight edge.
pub fn load_vector(mesh: &DomainMesh, m: usize, data: &NeumannData) -> Result<Load> {
    let nn = mesh.node_count();
    let mut l = vec![0.0; nn * m];

    match &data.flux {
        Flux::Zero => {}
        Flux::Analytic(f) => {
            for t in 0..mesh.triangle_count() {
                let v = mesh.vertices(t);
                let el = Element::new(&v);
                let mut avg = [[0.0; DIM]; MAX_M];
                for q in edge_midpoints(&v) {
                    let fq = f(q);
                    for beta in 0..m {
                        for i in 0..DIM {
                            avg[beta][i] += fq[beta][i] / 3.0;
                        }
                    }
                }
                scatter_flux(&mut l, m, &mesh.triangle(t), &el, |beta, i| avg[beta][i]);
            }
        }
        Flux::PerTriangle(vals) => {
            if vals.len() != mesh.triangle_count() * m * DIM {
                return Err(Error::MeshMismatch);
            }
            for t in 0..mesh.triangle_count() {
                let el = Element::new(&mesh.vertices(t));
                scatter_flux(&mut l, m, &mesh.triangle(t), &el, |beta, i| vals[(t * m + beta) * DIM + i]);
            }
        }
    }

    match &data.body {
        Body::Zero => {}
        Body::Analytic(fb) => {
            for t in 0..mesh.triangle_count() {
                let v = mesh.vertices(t);
                let area = Element::new(&v).area;
                let tri = mesh.triangle(t);
                let mids = edge_midpoints(&v);
                // midpoint q sits on edge (q, q+1): hat functions there are ½
                for (q, &mq) in mids.iter().enumerate() {
                    let fq = fb(mq);
                    for beta in 0..m {
                        let c = area / 3.0 * 0.5 * fq[beta];
                        l[tri[q] * m + beta] += c;
                        l[tri[(q + 1) % 3] * m + beta] += c;
                    }
                }
            }
        }
        Body::Nodal(vals) => {
            if vals.len() != nn * m {
                return Err(Error::MeshMismatch);
            }
            for t in 0..mesh.triangle_count() {
                let area = Element::new(&mesh.vertices(t)).area;
                let tri = mesh.triangle(t);
                for q in 0..3 {
                    let (a, b) = (tri[q], tri[(q + 1) % 3]);
                    for beta in 0..m {
                        let fq = 0.5 * (vals[a * m + beta] + vals[b * m + beta]);
                        let c = area / 3.0 * 0.5 * fq;
                        l[a * m + beta] += c;
                        l[b * m + beta] += c;
                    }
                }
            }
        }
    }

    let nodes = mesh.nodes();
    match &data.boundary {
        Boundary::Zero => {}
        Boundary::Analytic(g) => {
            for e in mesh.boundary_edges() {
                let (pa, pb) = (nodes[e.nodes[0]], nodes[e.nodes[1]]);
                for &s in &GAUSS2 {
                    let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let gv = g(p, e.normal);
                    for beta in 0..m {
                        let w = 0.5 * e.length * gv[beta];
                        l[e.nodes[0] * m + beta] += w * (1.0 - s);
                        l[e.nodes[1] * m + beta] += w * s;
                    }
                }
            }
        }
        Boundary::Nodal(vals) => {
            let nb = mesh.boundary_nodes().len();
            if vals.len() != nb * m {
                return Err(Error::MeshMismatch);
            }
            for (k, e) in mesh.boundary_edges().iter().enumerate() {
                let kn = (k + 1) % nb;
                for beta in 0..m {
                    let (ga, gb) = (vals[k * m + beta], vals[kn * m + beta]);
                    // exact ∫ (linear g)(hat) along the edge
                    l[e.nodes[0] * m + beta] += e.length * (2.0 * ga + gb) / 6.0;
                    l[e.nodes[1] * m + beta] += e.length * (ga + 2.0 * gb) / 6.0;
                }
            }
        }
        Boundary::ConormalOfLinear { tensor, gradient } => {
            if tensor.m() != m {
                return Err(Error::InvalidParameter(format!("tensor has m = {}, load has m = {m}", tensor.m())));
            }
            for e in mesh.boundary_edges() {
                for alpha in 0..m {
                    let mut g = 0.0;
                    for i in 0..DIM {
                        for j in 0..DIM {
                            for beta in 0..m {
                                g += e.normal[i] * tensor.entry(flat(i, alpha), flat(j, beta)) * gradient[beta][j];
                            }
                        }
                    }
                    let w = 0.5 * e.length * g;
                    l[e.nodes[0] * m + alpha] += w;
                    l[e.nodes[1] * m + alpha] += w;
                }
            }
        }
    }

    let mut compatibility = vec![0.0; m];
    for (k, v) in l.iter().enumerate() {
        compatibility[k % m] += v;
    }
    Ok(Load { values: l, compatibility })
}

#[inline]
fn scatter_flux(l: &mut [f64], m: usize, tri: &[usize; 3], el: &Element, f: impl Fn(usize, usize) -> f64) {
    for (a, &k) in tri.iter().enumerate() {
        for beta in 0..m {
            let mut s = 0.0;
            for i in 0..DIM {
                s += f(beta, i) * el.grads[a][i];
            }
            l[k * m + beta] -= el.area * s;
        }
    }
}
