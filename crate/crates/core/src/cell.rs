//! Periodic cell problem: correctors `χ`, the homogenized tensor `Â` and
//! the flux correctors `H`, `U`, `F = ∇U`.
//!
//! Column `(j, β)` of the corrector matrix is stored at index
//! [`flat`]`(j, β)` as an `m`-component torus field whose component `γ` is
//! `χ_j^{γβ}`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{flat, CoeffMatrix, CoefficientTensor, Point, DIM};
use crate::error::{Error, Result};
use crate::mesh::{Element, TorusMesh, Triangulation};
use crate::solver::{assemble, element_coefficient, solve_mean_zero, DiscreteField, Scale, SolveOptions};

/// Relative bound on `|mean H|` beyond which the quadratures disagree.
pub const FLUX_MEAN_TOLERANCE: f64 = 1e-8;

const MAGIC: &[u8; 8] = b"HLAB-CS1";

/// Cell-problem solutions for one coefficient tensor.
#[derive(Clone, Debug)]
pub struct CorrectorSet {
    tensor: CoefficientTensor,
    mesh: TorusMesh,
    chi: Vec<DiscreteField>,
    homogenized: CoeffMatrix,
    residuals: Vec<f64>,
    flux: Option<FluxCorrectors>,
}

/// `H` per triangle and the periodic potentials `U` with `ΔU = H`.
#[derive(Clone, Debug)]
pub struct FluxCorrectors {
    h: Vec<CoeffMatrix>,
    u: Vec<DiscreteField>,
    residuals: Vec<f64>,
    mean_h: f64,
}

/// Per-triangle element data shared by every cell computation.
struct CellGeometry {
    elements: Vec<Element>,
    coefficients: Vec<CoeffMatrix>,
}

impl CellGeometry {
    fn new(a: &CoefficientTensor, mesh: &TorusMesh) -> Result<Self> {
        let nt = mesh.triangle_count();
        let mut elements = Vec::with_capacity(nt);
        let mut coefficients = Vec::with_capacity(nt);
        for t in 0..nt {
            let v = mesh.vertices(t);
            elements.push(Element::new(&v));
            coefficients.push(element_coefficient(a, Scale::Cell, &v)?);
        }
        Ok(CellGeometry { elements, coefficients })
    }
}

/// Solves the cell problems `L₁χ_j^β = −L₁P_j^β` on an `n × n` torus mesh
/// and computes `Â`.
pub fn solve_correctors(a: &CoefficientTensor, n: usize, opts: &SolveOptions) -> Result<CorrectorSet> {
    let mesh = TorusMesh::new(n)?;
    let m = a.m();
    let geometry = CellGeometry::new(a, &mesh)?;
    let system = assemble(a, Scale::Cell, &mesh, mesh.h())?;

    let columns: Vec<(usize, usize)> = (0..m).flat_map(|beta| (0..DIM).map(move |j| (j, beta))).collect();
    let solved: Vec<Result<(DiscreteField, f64)>> = columns
        .par_iter()
        .map(|&(j, beta)| {
            // periodicity makes the load compatible; only rounding is projected
            let load = corrector_load(&mesh, &geometry, m, j, beta);
            let (chi, stats) = solve_mean_zero(&system, &load, &opts.projected())?;
            Ok((chi, stats.relative_residual))
        })
        .collect();
    let mut chi = vec![None; DIM * m];
    let mut residuals = vec![0.0; DIM * m];
    for (&(j, beta), res) in columns.iter().zip(solved) {
        let (field, r) = res?;
        chi[flat(j, beta)] = Some(field);
        residuals[flat(j, beta)] = r;
    }
    let chi: Vec<DiscreteField> = chi.into_iter().map(|c| c.expect("every column solved")).collect();
    let homogenized = homogenized_from(&mesh, &geometry, &chi, m)?;
    Ok(CorrectorSet { tensor: a.clone(), mesh, chi, homogenized, residuals, flux: None })
}

/// Nodal load `−∫ a_ij^{αβ} ∂_i φ^α` of the cell problem for column `(j, β)`.
fn corrector_load(mesh: &TorusMesh, geometry: &CellGeometry, m: usize, j: usize, beta: usize) -> Vec<f64> {
    let mut load = vec![0.0; mesh.node_count() * m];
    for t in 0..mesh.triangle_count() {
        let el = &geometry.elements[t];
        let coef = &geometry.coefficients[t];
        for (a, &node) in mesh.triangle(t).iter().enumerate() {
            for alpha in 0..m {
                let mut s = 0.0;
                for i in 0..DIM {
                    s += coef.get(i, j, alpha, beta) * el.grads[a][i];
                }
                load[node * m + alpha] -= el.area * s;
            }
        }
    }
    load
}

/// `â_ij^{αβ} = Σ_T |T| [ā_ij^{αβ} + ā_iℓ^{αγ} ∂_ℓ χ_j^{γβ}]`.
fn homogenized_from(mesh: &TorusMesh, geometry: &CellGeometry, chi: &[DiscreteField], m: usize) -> Result<CoeffMatrix> {
    let grads = chi.iter().map(|c| c.gradient(mesh)).collect::<Result<Vec<_>>>()?;
    let mut hat = CoeffMatrix::zeros(m);
    for t in 0..mesh.triangle_count() {
        let area = geometry.elements[t].area;
        let coef = &geometry.coefficients[t];
        for i in 0..DIM {
            for alpha in 0..m {
                for j in 0..DIM {
                    for beta in 0..m {
                        let g = grads[flat(j, beta)];
                        let mut s = coef.get(i, j, alpha, beta);
                        for l in 0..DIM {
                            for gamma in 0..m {
                                s += coef.get(i, l, alpha, gamma) * g.get(t, gamma)[l];
                            }
                        }
                        *hat.entry_mut(flat(i, alpha), flat(j, beta)) += area * s;
                    }
                }
            }
        }
    }
    Ok(hat)
}

/// Recomputes `Â` from the stored correctors with the assembly quadrature.
pub fn homogenized_tensor(cs: &CorrectorSet) -> Result<CoeffMatrix> {
    let geometry = CellGeometry::new(&cs.tensor, &cs.mesh)?;
    homogenized_from(&cs.mesh, &geometry, &cs.chi, cs.m())
}

/// Builds `H`, solves `ΔU = H` on the torus for every `(i, ℓ, α, γ)` and
/// attaches the result.
pub fn flux_correctors(mut cs: CorrectorSet, opts: &SolveOptions) -> Result<CorrectorSet> {
    let m = cs.m();
    let dm = DIM * m;
    let mesh = &cs.mesh;
    let geometry = CellGeometry::new(&cs.tensor, mesh)?;
    let grads = cs.chi.iter().map(|c| c.gradient(mesh)).collect::<Result<Vec<_>>>()?;
    let nt = mesh.triangle_count();

    let mut h = Vec::with_capacity(nt);
    let mut mean = CoeffMatrix::zeros(m);
    let mut scale = cs.homogenized.max_abs();
    for t in 0..nt {
        let coef = &geometry.coefficients[t];
        let mut ht = cs.homogenized;
        for i in 0..DIM {
            for alpha in 0..m {
                for l in 0..DIM {
                    for gamma in 0..m {
                        let g = grads[flat(l, gamma)];
                        let mut s = coef.get(i, l, alpha, gamma);
                        for j in 0..DIM {
                            for beta in 0..m {
                                s += coef.get(i, j, alpha, beta) * g.get(t, beta)[j];
                            }
                        }
                        *ht.entry_mut(flat(i, alpha), flat(l, gamma)) -= s;
                    }
                }
            }
        }
        mean.add_scaled(&ht, geometry.elements[t].area);
        scale = scale.max(ht.max_abs());
        h.push(ht);
    }
    let mean_h = if scale > 0.0 { mean.max_abs() / scale } else { 0.0 };
    if mean_h > FLUX_MEAN_TOLERANCE {
        return Err(Error::Inconsistent(format!("mean of H is {mean_h:.3e} relative to its size")));
    }

    let laplace = CoefficientTensor::builtin("constant", &[1.0])?;
    let system = assemble(&laplace, Scale::Cell, mesh, mesh.h())?;
    let entries: Vec<(usize, usize)> = (0..dm).flat_map(|r| (0..dm).map(move |c| (r, c))).collect();
    let solved: Vec<Result<(DiscreteField, f64)>> = entries
        .par_iter()
        .map(|&(r, c)| {
            // weak form of ΔU = H: ∫∇U·∇φ = −∫Hφ
            let mut load = vec![0.0; mesh.node_count()];
            for (t, ht) in h.iter().enumerate() {
                let v = -ht.entry(r, c) * geometry.elements[t].area / 3.0;
                for node in mesh.triangle(t) {
                    load[node] += v;
                }
            }
            let (u, stats) = solve_mean_zero(&system, &load, &opts.projected())?;
            Ok((u, stats.relative_residual))
        })
        .collect();
    let mut u = Vec::with_capacity(dm * dm);
    let mut residuals = Vec::with_capacity(dm * dm);
    for res in solved {
        let (field, r) = res?;
        u.push(field);
        residuals.push(r);
    }
    cs.flux = Some(FluxCorrectors { h, u, residuals, mean_h });
    Ok(cs)
}

impl CorrectorSet {
    pub fn tensor(&self) -> &CoefficientTensor {
        &self.tensor
    }

    pub fn mesh(&self) -> &TorusMesh {
        &self.mesh
    }

    pub fn resolution(&self) -> usize {
        self.mesh.resolution()
    }

    pub fn m(&self) -> usize {
        self.tensor.m()
    }

    /// `Â`, indexed like the coefficient values.
    pub fn homogenized(&self) -> &CoeffMatrix {
        &self.homogenized
    }

    /// Relative residuals of the corrector solves, indexed by `flat(j, β)`.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Column `(j, β)`: an `m`-component field with component `γ = χ_j^{γβ}`.
    pub fn chi(&self, j: usize, beta: usize) -> &DiscreteField {
        &self.chi[flat(j, beta)]
    }

    /// `χ_j^{γβ}(y)` by periodic P1 interpolation.
    #[inline]
    pub fn chi_at(&self, j: usize, gamma: usize, beta: usize, y: Point) -> f64 {
        self.mesh.interpolate(self.chi[flat(j, beta)].values(), self.m(), gamma, y)
    }

    pub fn flux(&self) -> Option<&FluxCorrectors> {
        self.flux.as_ref()
    }

    /// Writes the set in the `HLAB-CS1` format: the 8-byte magic, a
    /// little-endian `u64` header length, the JSON header, then the arrays
    /// listed in the header as little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.m();
        let dm = DIM * m;
        let mut arrays = vec![ArrayInfo { name: "chi".into(), len: self.chi.len() * self.mesh.node_count() * m }];
        if let Some(f) = &self.flux {
            arrays.push(ArrayInfo { name: "H".into(), len: f.h.len() * dm * dm });
            arrays.push(ArrayInfo { name: "U".into(), len: f.u.len() * self.mesh.node_count() });
        }
        let header = Header {
            format: "HLAB-CS1".into(),
            tensor: self.tensor.name().into(),
            n: self.resolution(),
            m,
            homogenized: self.homogenized.to_rows(),
            residuals: self.residuals.clone(),
            flux_residuals: self.flux.as_ref().map(|f| f.residuals.clone()),
            flux_mean: self.flux.as_ref().map(|f| f.mean_h),
            arrays,
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        let mut put = |v: f64| w.write_all(&v.to_le_bytes());
        for c in &self.chi {
            for &v in c.values() {
                put(v)?;
            }
        }
        if let Some(f) = &self.flux {
            for ht in &f.h {
                for r in 0..dm {
                    for c in 0..dm {
                        put(ht.entry(r, c))?;
                    }
                }
            }
            for u in &f.u {
                for &v in u.values() {
                    put(v)?;
                }
            }
        }
        Ok(())
    }

    /// Reads a set written by [`CorrectorSet::write_to`]; `tensor` must be
    /// the tensor it was computed from.
    pub fn read_from<R: Read>(mut r: R, tensor: &CoefficientTensor) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing HLAB-CS1 magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.tensor != tensor.name() || header.m != tensor.m() {
            return Err(Error::Format(format!(
                "file holds `{}` with m = {}, expected `{}` with m = {}",
                header.tensor,
                header.m,
                tensor.name(),
                tensor.m()
            )));
        }
        let m = header.m;
        let dm = DIM * m;
        let mesh = TorusMesh::new(header.n)?;
        let nn = mesh.node_count();
        let mut take = |len: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; len * 8];
            r.read_exact(&mut bytes)?;
            Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        };
        let mut chi = Vec::new();
        let mut flux_h = None;
        let mut flux_u = None;
        for info in &header.arrays {
            let data = take(info.len)?;
            match info.name.as_str() {
                "chi" if info.len == dm * nn * m => {
                    chi = data.chunks_exact(nn * m).map(|c| DiscreteField::new(&mesh, m, c.to_vec())).collect::<Result<_>>()?;
                }
                "H" if info.len == mesh.triangle_count() * dm * dm => {
                    flux_h = Some(
                        data.chunks_exact(dm * dm)
                            .map(|c| CoeffMatrix::from_rows(m, c))
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                "U" if info.len == dm * dm * nn => {
                    flux_u =
                        Some(data.chunks_exact(nn).map(|c| DiscreteField::new(&mesh, 1, c.to_vec())).collect::<Result<Vec<_>>>()?);
                }
                other => return Err(Error::Format(format!("unexpected array `{other}` of length {}", info.len))),
            }
        }
        if chi.len() != dm {
            return Err(Error::Format("corrector array missing".into()));
        }
        let flux = match (flux_h, flux_u) {
            (Some(h), Some(u)) => Some(FluxCorrectors {
                h,
                u,
                residuals: header.flux_residuals.unwrap_or_default(),
                mean_h: header.flux_mean.unwrap_or(0.0),
            }),
            (None, None) => None,
            _ => return Err(Error::Format("incomplete flux corrector arrays".into())),
        };
        Ok(CorrectorSet {
            tensor: tensor.clone(),
            mesh,
            chi,
            homogenized: CoeffMatrix::from_rows(m, &header.homogenized)?,
            residuals: header.residuals,
            flux,
        })
    }
}

impl FluxCorrectors {
    /// `H_iℓ^{αγ}` on triangle `t`.
    pub fn h(&self, t: usize, i: usize, l: usize, alpha: usize, gamma: usize) -> f64 {
        self.h[t].get(i, l, alpha, gamma)
    }

    /// Per-triangle `H` values, indexed like the coefficient values.
    pub fn h_values(&self) -> &[CoeffMatrix] {
        &self.h
    }

    /// Potential `U_iℓ^{αγ}` as a scalar torus field.
    pub fn u(&self, i: usize, l: usize, alpha: usize, gamma: usize) -> &DiscreteField {
        let dm = self.dm();
        &self.u[flat(i, alpha) * dm + flat(l, gamma)]
    }

    /// `F_iℓk^{αγ} = ∂_k U_iℓ^{αγ}` on triangle `t`.
    pub fn f(&self, mesh: &TorusMesh, t: usize, i: usize, l: usize, k: usize, alpha: usize, gamma: usize) -> Result<f64> {
        Ok(self.u(i, l, alpha, gamma).gradient(mesh)?.get(t, 0)[k])
    }

    /// Relative size of `∫H` against `max(|Â|, |H|)`.
    pub fn mean_h(&self) -> f64 {
        self.mean_h
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    fn dm(&self) -> usize {
        (self.u.len() as f64).sqrt().round() as usize
    }
}

/// A smooth periodic test function `φ(y) = cos 2π(k·y)` or `sin 2π(k·y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicMode {
    pub k: [i32; 2],
    pub sine: bool,
}

impl PeriodicMode {
    fn phase(&self, y: Point) -> f64 {
        2.0 * std::f64::consts::PI * (self.k[0] as f64 * y[0] + self.k[1] as f64 * y[1])
    }

    pub fn value(&self, y: Point) -> f64 {
        let p = self.phase(y);
        if self.sine {
            p.sin()
        } else {
            p.cos()
        }
    }

    /// `‖φ‖_{W^{1,2}}` over the unit cell.
    pub fn w12_norm(&self) -> f64 {
        let k2 = (self.k[0] * self.k[0] + self.k[1] * self.k[1]) as f64;
        (0.5 * (1.0 + 4.0 * std::f64::consts::PI.powi(2) * k2)).sqrt()
    }

    /// The first `count` non-constant modes ordered by frequency.
    pub fn family(count: usize) -> Vec<PeriodicMode> {
        let mut ks = Vec::new();
        for r in 1..=4i32 {
            for a in -r..=r {
                for b in 0..=r {
                    let k = [a, b];
                    if a.abs().max(b) == r && (b > 0 || a > 0) {
                        ks.push(k);
                    }
                }
            }
        }
        ks.iter()
            .flat_map(|&k| [PeriodicMode { k, sine: false }, PeriodicMode { k, sine: true }])
            .take(count)
            .collect()
    }
}

/// Largest `|Σ_i ∫ F_iℓk^{αγ} ∂_i φ| / ‖φ‖_{W^{1,2}}` over the modes and all
/// index combinations; the discrete witness of `∂_i F_iℓk^{αγ} = 0`.
///
/// `∫_T ∂_i φ` is evaluated through the divergence theorem with three-point
/// Gauss quadrature on the triangle edges.
pub fn weak_divergence(cs: &CorrectorSet, modes: &[PeriodicMode]) -> Result<f64> {
    let flux = cs.flux().ok_or_else(|| Error::Inconsistent("flux correctors not computed".into()))?;
    let mesh = &cs.mesh;
    let m = cs.m();
    let nt = mesh.triangle_count();
    // ∫_T ∂_i φ for every triangle, mode and direction
    let gauss = [(0.5 - 0.15f64.sqrt() / 2.0, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.15f64.sqrt() / 2.0, 5.0 / 18.0)];
    let mut dphi = vec![[0.0; 2]; nt * modes.len()];
    for t in 0..nt {
        let v = mesh.vertices(t);
        for e in 0..3 {
            let (p, q) = (v[e], v[(e + 1) % 3]);
            // outward normal times length for counter-clockwise triangles
            let nl = [q[1] - p[1], p[0] - q[0]];
            for (mi, mode) in modes.iter().enumerate() {
                let mut s = 0.0;
                for &(x, w) in &gauss {
                    s += w * mode.value([p[0] + x * (q[0] - p[0]), p[1] + x * (q[1] - p[1])]);
                }
                let slot = &mut dphi[t * modes.len() + mi];
                slot[0] += s * nl[0];
                slot[1] += s * nl[1];
            }
        }
    }
    let mut worst = 0.0f64;
    let grads: Vec<_> = flux.u.iter().map(|u| u.gradient(mesh)).collect::<Result<_>>()?;
    let dm = DIM * m;
    for l in 0..DIM {
        for k in 0..DIM {
            for alpha in 0..m {
                for gamma in 0..m {
                    for (mi, mode) in modes.iter().enumerate() {
                        let mut s = 0.0;
                        for i in 0..DIM {
                            let g = grads[flat(i, alpha) * dm + flat(l, gamma)];
                            for t in 0..nt {
                                s += g.get(t, 0)[k] * dphi[t * modes.len() + mi][i];
                            }
                        }
                        worst = worst.max(s.abs() / mode.w12_norm());
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Serialize, Deserialize)]
struct ArrayInfo {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    tensor: String,
    n: usize,
    m: usize,
    homogenized: Vec<f64>,
    residuals: Vec<f64>,
    flux_residuals: Option<Vec<f64>>,
    flux_mean: Option<f64>,
    arrays: Vec<ArrayInfo>,
}
