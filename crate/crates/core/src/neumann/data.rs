use std::fmt;
use std::sync::Arc;

use crate::coefficients::{Point, MAX_M};
use crate::error::{Error, Result};
use crate::mesh::{DomainMesh, Triangulation};
use crate::solver::{Body, Boundary, Flux, NeumannData};

/// Boundary flux catalog. Every profile is applied to each component and
/// shifted to arclength mean zero on the polygonal boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum BoundarySpec {
    #[default]
    Zero,
    /// `cos θ`
    CosTheta,
    /// `sin 3θ`
    Sin3Theta,
    /// `exp(−d(θ, θ₀)²/2σ²)` with `d` the periodic angular distance.
    GaussianBump { theta0: f64, sigma: f64 },
}

/// Body force catalog.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum BodySpec {
    #[default]
    Zero,
    /// `F ≡ c`, balanced by the constant boundary flux `−c|Ω|/|∂Ω|`.
    ConstantBalanced { c: f64 },
    /// `exp(−|x − x₀|²/2σ²)` minus its mass-weighted mean.
    Gaussian { x0: Point, sigma: f64 },
}

/// Divergence-form flux catalog.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum FluxSpec {
    #[default]
    Zero,
    /// `f ≡ c` in every component.
    ConstantVector { c: [f64; 2] },
    /// `f(x) = (−(x₂ − c₂), x₁ − c₁)` in every component.
    RotatingVortex { center: Point },
}

/// Catalog selection for the three right-hand sides.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DataSpec {
    pub g: BoundarySpec,
    pub body: BodySpec,
    pub flux: FluxSpec,
}

/// Splits `name(a, b)` into the name and its numeric arguments.
fn split_call(s: &str) -> Result<(&str, Vec<f64>)> {
    let s = s.trim();
    match s.find('(') {
        None => Ok((s, Vec::new())),
        Some(open) => {
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{s}`")))?;
            let args = inner
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{}` in `{s}`", a.trim()))))
                .collect::<Result<Vec<_>>>()?;
            Ok((s[..open].trim(), args))
        }
    }
}

fn args<const N: usize>(name: &str, given: Vec<f64>, defaults: [f64; N]) -> Result<[f64; N]> {
    if given.len() > N || (!given.is_empty() && given.len() != N) {
        return Err(Error::Config(format!("`{name}` takes {N} argument(s), got {}", given.len())));
    }
    Ok(if given.is_empty() { defaults } else { given.try_into().expect("length checked") })
}

impl BoundarySpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, a) = split_call(s)?;
        Ok(match name {
            "zero" => BoundarySpec::Zero,
            "cos-theta" => BoundarySpec::CosTheta,
            "sin-3theta" => BoundarySpec::Sin3Theta,
            "gaussian-bump" => {
                let [theta0, sigma] = args(name, a, [0.0, 0.3])?;
                if sigma <= 0.0 {
                    return Err(Error::Config("gaussian-bump width must be positive".into()));
                }
                BoundarySpec::GaussianBump { theta0, sigma }
            }
            other => return Err(Error::Config(format!("unknown boundary data `{other}`"))),
        })
    }

    /// Raw profile value at polar angle `theta`.
    pub fn profile(&self, theta: f64) -> f64 {
        match *self {
            BoundarySpec::Zero => 0.0,
            BoundarySpec::CosTheta => theta.cos(),
            BoundarySpec::Sin3Theta => (3.0 * theta).sin(),
            BoundarySpec::GaussianBump { theta0, sigma } => {
                let d = (theta - theta0).rem_euclid(std::f64::consts::TAU);
                let d = d.min(std::f64::consts::TAU - d);
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Nodal boundary values (boundary order, `k·m + β`) with zero
    /// arclength mean.
    pub fn nodal(&self, mesh: &DomainMesh, m: usize) -> Vec<f64> {
        let nodes = mesh.nodes();
        let raw: Vec<f64> = mesh.boundary_nodes().iter().map(|&k| self.profile(DomainMesh::polar_angle(nodes[k]))).collect();
        let nb = raw.len();
        let integral: f64 = mesh.boundary_edges().iter().enumerate().map(|(k, e)| 0.5 * e.length * (raw[k] + raw[(k + 1) % nb])).sum();
        let mean = integral / mesh.perimeter();
        raw.iter().flat_map(|v| std::iter::repeat(v - mean).take(m)).collect()
    }
}

impl BodySpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (name, a) = split_call(s)?;
        Ok(match name {
            "zero" => BodySpec::Zero,
            "constant-balanced" => {
                let [c] = args(name, a, [1.0])?;
                BodySpec::ConstantBalanced { c }
            }
            "gaussian" => {
                let [x, y, sigma] = args(name, a, [0.3, 0.2, 0.25])?;
                if sigma <= 0.0 {
                    return Err(Error::Config("gaussian width must be positive".into()));
                }
                BodySpec::Gaussian { x0: [x, y], sigma }
            }
            other => return Err(Error::Config(format!("unknown body force `{other}`"))),
        })
    }
}

impl FluxSpec {
    /// Default vortex center, off the origin so that `f·n` does not vanish
    /// identically on the unit circle.
    pub const VORTEX_CENTER: Point = [0.3, 0.0];

    pub fn parse(s: &str) -> Result<Self> {
        let (name, a) = split_call(s)?;
        Ok(match name {
            "zero" => FluxSpec::Zero,
            "constant-vector" => {
                let [x, y] = args(name, a, [1.0, 0.0])?;
                FluxSpec::ConstantVector { c: [x, y] }
            }
            "rotating-vortex" => {
                let [x, y] = args(name, a, Self::VORTEX_CENTER)?;
                FluxSpec::RotatingVortex { center: [x, y] }
            }
            other => return Err(Error::Config(format!("unknown flux `{other}`"))),
        })
    }

    /// `f(x)` for one component.
    pub fn value(&self, p: Point) -> [f64; 2] {
        match *self {
            FluxSpec::Zero => [0.0, 0.0],
            FluxSpec::ConstantVector { c } => c,
            FluxSpec::RotatingVortex { center } => [-(p[1] - center[1]), p[0] - center[0]],
        }
    }
}

impl DataSpec {
    /// Resolves the catalog entries on `mesh` for an `m`-component problem.
    /// The result is compatible up to rounding.
    pub fn build(&self, mesh: &DomainMesh, m: usize) -> NeumannData {
        let mut g = self.g.nodal(mesh, m);
        let body = match self.body {
            BodySpec::Zero => Body::Zero,
            BodySpec::ConstantBalanced { c } => {
                let balance = -c * mesh.total_area() / mesh.perimeter();
                g.iter_mut().for_each(|v| *v += balance);
                Body::Nodal(vec![c; mesh.node_count() * m])
            }
            BodySpec::Gaussian { x0, sigma } => {
                let raw: Vec<f64> = mesh
                    .nodes()
                    .iter()
                    .map(|p| (-((p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2)) / (2.0 * sigma * sigma)).exp())
                    .collect();
                let w = mesh.node_weights();
                let mean = raw.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / w.iter().sum::<f64>();
                Body::Nodal(raw.iter().flat_map(|v| std::iter::repeat(v - mean).take(m)).collect())
            }
        };
        let flux = match self.flux {
            FluxSpec::Zero => Flux::Zero,
            spec => Flux::Analytic(Arc::new(move |p| {
                let v = spec.value(p);
                [v; MAX_M]
            })),
        };
        let boundary = if matches!(self.g, BoundarySpec::Zero) && matches!(self.body, BodySpec::Zero | BodySpec::Gaussian { .. }) {
            Boundary::Zero
        } else {
            Boundary::Nodal(g)
        };
        NeumannData { flux, body, boundary }
    }

    /// `‖g‖_{L^p(∂Ω)}` of the resolved boundary data (first component),
    /// integrating the piecewise-linear values with Simpson's rule per edge.
    pub fn boundary_norm(&self, mesh: &DomainMesh, p: f64) -> f64 {
        let g = self.g.nodal(mesh, 1);
        let nb = g.len();
        let mut s = 0.0;
        for (k, e) in mesh.boundary_edges().iter().enumerate() {
            let (a, b) = (g[k], g[(k + 1) % nb]);
            let mid = 0.5 * (a + b);
            s += e.length / 6.0 * (a.abs().powf(p) + 4.0 * mid.abs().powf(p) + b.abs().powf(p));
        }
        s.powf(1.0 / p)
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::Zero => write!(f, "zero"),
            BoundarySpec::CosTheta => write!(f, "cos-theta"),
            BoundarySpec::Sin3Theta => write!(f, "sin-3theta"),
            BoundarySpec::GaussianBump { theta0, sigma } => write!(f, "gaussian-bump({theta0}, {sigma})"),
        }
    }
}

impl fmt::Display for BodySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodySpec::Zero => write!(f, "zero"),
            BodySpec::ConstantBalanced { c } => write!(f, "constant-balanced({c})"),
            BodySpec::Gaussian { x0, sigma } => write!(f, "gaussian({}, {}, {sigma})", x0[0], x0[1]),
        }
    }
}

impl fmt::Display for FluxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxSpec::Zero => write!(f, "zero"),
            FluxSpec::ConstantVector { c } => write!(f, "constant-vector({}, {})", c[0], c[1]),
            FluxSpec::RotatingVortex { center } => write!(f, "rotating-vortex({}, {})", center[0], center[1]),
        }
    }
}
