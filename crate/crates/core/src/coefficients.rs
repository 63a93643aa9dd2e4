//! Periodic coefficient tensors `a_ij^{αβ}(y)`.
//!
//! Spatial indices `i, j` run over the two coordinates, component indices
//! `α, β` over the `m` unknowns of the system. A tensor is flattened into a
//! `(2m) × (2m)` matrix whose row `(i, α)` sits at `α * 2 + i`, so the
//! quadratic form `a_ij^{αβ} ξ_i^α ξ_j^β` is an ordinary `ξᵀ A ξ`.
//!
//! The builtin catalog is smooth and trigonometric, so the Hölder data carried
//! on each tensor is informational only.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Spatial dimension.
pub const DIM: usize = 2;
/// Largest supported system size.
pub const MAX_M: usize = 2;
/// Largest flattened size `d·m`.
pub const MAX_DM: usize = DIM * MAX_M;

pub type Point = [f64; 2];

#[inline]
pub fn flat(i: usize, alpha: usize) -> usize {
    alpha * DIM + i
}

/// A single value of the tensor, i.e. a `(d·m) × (d·m)` matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoeffMatrix {
    m: usize,
    a: [[f64; MAX_DM]; MAX_DM],
}

impl CoeffMatrix {
    pub fn zeros(m: usize) -> Self {
        assert!((1..=MAX_M).contains(&m), "system size must be 1 or 2");
        CoeffMatrix { m, a: [[0.0; MAX_DM]; MAX_DM] }
    }

    /// `c · δ_ij δ_αβ`
    pub fn scalar(m: usize, c: f64) -> Self {
        let mut out = Self::zeros(m);
        for k in 0..DIM * m {
            out.a[k][k] = c;
        }
        out
    }

    /// Builds from a row-major `(2m)²` slice in flattened ordering.
    pub fn from_rows(m: usize, rows: &[f64]) -> Result<Self> {
        let dm = DIM * m;
        if rows.len() != dm * dm {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for m = {m}, got {}",
                dm * dm,
                rows.len()
            )));
        }
        let mut out = Self::zeros(m);
        for r in 0..dm {
            for c in 0..dm {
                out.a[r][c] = rows[r * dm + c];
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn size(&self) -> usize {
        DIM * self.m
    }

    /// `a_ij^{αβ}`
    #[inline]
    pub fn get(&self, i: usize, j: usize, alpha: usize, beta: usize) -> f64 {
        self.a[flat(i, alpha)][flat(j, beta)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, alpha: usize, beta: usize, v: f64) {
        self.a[flat(i, alpha)][flat(j, beta)] = v;
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.a[row][col]
    }

    #[inline]
    pub fn entry_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.a[row][col]
    }

    /// Adjoint: `a*_ij^{αβ} = a_ji^{βα}`, which in flattened form is the transpose.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.m);
        let dm = self.size();
        for r in 0..dm {
            for c in 0..dm {
                out.a[r][c] = self.a[c][r];
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &CoeffMatrix, s: f64) {
        let dm = self.size();
        for r in 0..dm {
            for c in 0..dm {
                self.a[r][c] += s * other.a[r][c];
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        let dm = self.size();
        for r in 0..dm {
            for c in 0..dm {
                out.a[r][c] *= s;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let dm = self.size();
        let mut mx = 0.0f64;
        for r in 0..dm {
            for c in 0..dm {
                mx = mx.max(self.a[r][c].abs());
            }
        }
        mx
    }

    /// Largest `|a_rc − a_cr|`.
    pub fn asymmetry(&self) -> f64 {
        let dm = self.size();
        let mut mx = 0.0f64;
        for r in 0..dm {
            for c in 0..dm {
                mx = mx.max((self.a[r][c] - self.a[c][r]).abs());
            }
        }
        mx
    }

    pub fn is_finite(&self) -> bool {
        let dm = self.size();
        (0..dm).all(|r| (0..dm).all(|c| self.a[r][c].is_finite()))
    }

    /// Extreme eigenvalues of the symmetric part, i.e. the sharp Legendre
    /// bounds of the quadratic form at this point.
    pub fn form_bounds(&self) -> (f64, f64) {
        let dm = self.size();
        let sym = DMatrix::from_fn(dm, dm, |r, c| 0.5 * (self.a[r][c] + self.a[c][r]));
        let eig = SymmetricEigen::new(sym);
        let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Row-major flattened entries.
    pub fn to_rows(&self) -> Vec<f64> {
        let dm = self.size();
        let mut out = Vec::with_capacity(dm * dm);
        for r in 0..dm {
            out.extend_from_slice(&self.a[r][..dm]);
        }
        out
    }
}

/// Scalar profile `s(y)` of a builtin.
#[derive(Clone, Debug, PartialEq)]
enum Profile {
    Constant { c: f64 },
    Laminate { c0: f64, c1: f64 },
    Separable { c0: f64, c1: f64 },
    /// Laminate along `y₁ + shear·y₂`; an integer shear keeps `Z²`-periodicity.
    Sheared { c0: f64, c1: f64, shear: f64 },
    /// Constant, possibly non-symmetric, full tensor.
    Matrix(CoeffMatrix),
}

/// Reduces a coordinate to `[0, 1)`.
#[inline]
fn wrap(t: f64) -> f64 {
    let r = t - t.floor();
    // `t - floor(t)` can round up to exactly 1 for tiny negative t
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl Profile {
    fn value(&self, y: Point) -> f64 {
        match *self {
            Profile::Constant { c } => c,
            Profile::Laminate { c0, c1 } => c0 + c1 * (TAU * wrap(y[0])).sin(),
            Profile::Separable { c0, c1 } => {
                c0 + c1 * (TAU * wrap(y[0])).sin() * (TAU * wrap(y[1])).sin()
            }
            Profile::Sheared { c0, c1, shear } => {
                c0 + c1 * (TAU * wrap(wrap(y[0]) + shear * wrap(y[1]))).sin()
            }
            Profile::Matrix(_) => unreachable!("matrix profile has no scalar value"),
        }
    }
}

/// A periodic coefficient tensor with its structural metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTensor {
    name: String,
    m: usize,
    profile: Profile,
    coupling: f64,
    adjoint: bool,
    lower: f64,
    upper: f64,
    symmetric: bool,
    holder_exponent: f64,
    holder_constant: f64,
}

/// Catalog ids accepted by [`CoefficientTensor::builtin`].
pub const CATALOG: [&str; 4] = ["constant", "laminate", "separable", "rotated-laminate"];

impl CoefficientTensor {
    /// Builds a scalar (`m = 1`) catalog entry.
    ///
    /// | id                 | params              | `a(y)`                                   |
    /// |--------------------|---------------------|------------------------------------------|
    /// | `constant`         | `c`                 | `c`                                      |
    /// | `laminate`         | `c0, c1`            | `c0 + c1 sin 2πy₁`                       |
    /// | `separable`        | `c0, c1`            | `c0 + c1 sin 2πy₁ sin 2πy₂`              |
    /// | `rotated-laminate` | `c0, c1 [, shear]`  | `c0 + c1 sin 2π(y₁ + shear·y₂)`, shear ∈ Z (default 1) |
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let need = |k: usize| -> Result<()> {
            if params.len() < k {
                Err(Error::InvalidParameter(format!("`{name}` needs {k} parameter(s), got {}", params.len())))
            } else {
                Ok(())
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameter for `{name}`")));
        }
        let (profile, lower, upper) = match name {
            "constant" => {
                need(1)?;
                let c = params[0];
                if c <= 0.0 {
                    return Err(Error::EllipticityViolated(format!("constant c = {c} must be positive")));
                }
                (Profile::Constant { c }, c, c)
            }
            "laminate" | "separable" | "rotated-laminate" => {
                need(2)?;
                let (c0, c1) = (params[0], params[1]);
                if c0 <= c1.abs() {
                    return Err(Error::EllipticityViolated(format!(
                        "`{name}` requires c0 > |c1|, got c0 = {c0}, c1 = {c1}"
                    )));
                }
                let profile = match name {
                    "laminate" => Profile::Laminate { c0, c1 },
                    "separable" => Profile::Separable { c0, c1 },
                    _ => {
                        let shear = params.get(2).copied().unwrap_or(1.0);
                        if shear.fract() != 0.0 {
                            return Err(Error::InvalidParameter(format!(
                                "shear must be an integer to keep periodicity, got {shear}"
                            )));
                        }
                        Profile::Sheared { c0, c1, shear }
                    }
                };
                (profile, c0 - c1.abs(), c0 + c1.abs())
            }
            other => return Err(Error::UnknownCoefficient(other.to_string())),
        };
        Ok(CoefficientTensor {
            name: name.to_string(),
            m: 1,
            profile,
            coupling: 0.0,
            adjoint: false,
            lower,
            upper,
            symmetric: true,
            holder_exponent: 0.5,
            holder_constant: 0.0,
        })
    }

    /// Embeds a scalar builtin block-diagonally into an `m`-component system,
    /// with a constant coupling `κ δ_ij` between distinct components.
    pub fn with_system(mut self, m: usize, coupling: f64) -> Result<Self> {
        if !(1..=MAX_M).contains(&m) {
            return Err(Error::InvalidParameter(format!("system size m = {m} not in {{1, 2}}")));
        }
        if matches!(self.profile, Profile::Matrix(_)) {
            return Err(Error::InvalidParameter("matrix tensors fix their own system size".into()));
        }
        if m == 1 && coupling != 0.0 {
            return Err(Error::InvalidParameter("coupling needs m = 2".into()));
        }
        if coupling.abs() >= self.lower {
            return Err(Error::EllipticityViolated(format!(
                "coupling |{coupling}| must stay below the scalar lower bound {}",
                self.lower
            )));
        }
        self.m = m;
        self.lower -= coupling.abs();
        self.upper += coupling.abs();
        self.coupling = coupling;
        Ok(self)
    }

    /// A constant tensor, possibly non-symmetric. Used for homogenized
    /// operators and for index-plumbing tests.
    pub fn constant_matrix(value: CoeffMatrix) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFiniteCoefficient([0.0, 0.0]));
        }
        let (lower, upper) = value.form_bounds();
        if lower <= 0.0 {
            return Err(Error::EllipticityViolated(format!(
                "symmetric part has smallest eigenvalue {lower:.6e}"
            )));
        }
        let symmetric = value.asymmetry() <= 1e-14 * value.max_abs();
        Ok(CoefficientTensor {
            name: "matrix".into(),
            m: value.m(),
            profile: Profile::Matrix(value),
            coupling: 0.0,
            adjoint: false,
            lower,
            upper,
            symmetric,
            holder_exponent: 0.5,
            holder_constant: 0.0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        DIM
    }

    /// Ellipticity constant `μ` with `μ|ξ|² ≤ aξ·ξ ≤ μ⁻¹|ξ|²`.
    pub fn mu(&self) -> f64 {
        self.lower.min(1.0 / self.upper)
    }

    /// Analytic extrema of the quadratic form over the cell.
    pub fn form_range(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant { .. } | Profile::Matrix(_))
    }

    /// `(λ, τ)`; metadata only.
    pub fn holder(&self) -> (f64, f64) {
        (self.holder_exponent, self.holder_constant)
    }

    /// `a(y)`; periodic in each coordinate.
    pub fn evaluate(&self, y: Point) -> CoeffMatrix {
        let value = match &self.profile {
            Profile::Matrix(v) => *v,
            p => {
                let mut v = CoeffMatrix::scalar(self.m, p.value(y));
                if self.m == 2 && self.coupling != 0.0 {
                    for i in 0..DIM {
                        v.set(i, i, 0, 1, self.coupling);
                        v.set(i, i, 1, 0, self.coupling);
                    }
                }
                v
            }
        };
        if self.adjoint {
            value.transpose()
        } else {
            value
        }
    }

    /// `A*` with `a*_ij^{αβ} = a_ji^{βα}`.
    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        out.adjoint = !self.adjoint;
        out
    }

    /// Samples the quadratic form on a uniform `k × k` grid over `[0,1)²`,
    /// `k = ⌊√sample_count⌋`.
    pub fn estimate_ellipticity(&self, sample_count: usize) -> Result<EllipticityReport> {
        if sample_count == 0 {
            return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
        }
        let k = ((sample_count as f64).sqrt().floor() as usize).max(1);
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        let mut worst = [0.0, 0.0];
        for jy in 0..k {
            for ix in 0..k {
                let y = [ix as f64 / k as f64, jy as f64 / k as f64];
                let v = self.evaluate(y);
                if !v.is_finite() {
                    return Err(Error::NonFiniteCoefficient(y));
                }
                let (lo, hi) = v.form_bounds();
                if lo < lower {
                    lower = lo;
                    worst = y;
                }
                upper = upper.max(hi);
            }
        }
        let violation = (lower <= 0.0).then(|| EllipticityViolation { location: worst, value: lower });
        Ok(EllipticityReport { lower, upper, samples: k * k, worst, violation })
    }
}

/// Sampled witness of the Legendre condition.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityReport {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
    /// Sample where the lower bound is attained.
    pub worst: Point,
    pub violation: Option<EllipticityViolation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityViolation {
    pub location: Point,
    pub value: f64,
}
