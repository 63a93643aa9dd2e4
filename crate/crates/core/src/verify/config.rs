use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::coefficients::CoefficientTensor;
use crate::error::{Error, Result};
use crate::mesh::Shape;
use crate::neumann::{BodySpec, BoundarySpec, DataSpec, FluxSpec};
use crate::solver::{PreconditionerKind, SolveOptions};

use super::experiment::ExperimentKind;

/// Resolution profile for the default ε-grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Profile {
    #[default]
    Fast,
    /// Adds `ε = 1/64`.
    Deep,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "deep" => Ok(Profile::Deep),
            other => Err(Error::Config(format!("unknown profile `{other}` (fast|deep)"))),
        }
    }
}

/// Experiment configuration, parsed from flat `key = value` text.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub kind: Option<ExperimentKind>,
    pub coeff_name: String,
    pub coeff_c0: f64,
    pub coeff_c1: f64,
    pub coeff_shear: f64,
    pub coupling: f64,
    pub m: usize,
    pub shape: Shape,
    /// Fixed domain resolution for experiments without an ε-grid.
    pub domain_n: usize,
    /// Explicit ε-grid; `None` selects the profile default.
    pub eps: Option<Vec<f64>>,
    pub tol: f64,
    pub ctol: f64,
    pub maxiter_factor: f64,
    /// `h = ε / hrule`
    pub hrule: f64,
    pub preconditioner: PreconditionerKind,
    pub cell_n: usize,
    /// Boundary data; `None` selects the per-experiment default.
    pub g: Option<BoundarySpec>,
    pub body: BodySpec,
    /// Divergence-form data; `None` selects the per-experiment default.
    pub flux: Option<FluxSpec>,
    pub seed: u64,
    pub norm_p: f64,
    pub ntmf_c0: f64,
    pub holder_gamma: f64,
    pub holder_samples: usize,
    pub kernel_sources: usize,
    pub csv_bins: usize,
    /// Keys exactly as given, for the report echo.
    raw: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            kind: None,
            coeff_name: "laminate".into(),
            coeff_c0: 2.0,
            coeff_c1: 1.0,
            coeff_shear: 1.0,
            coupling: 0.0,
            m: 1,
            shape: Shape::Disk,
            domain_n: 256,
            eps: None,
            tol: 1e-10,
            ctol: 1e-10,
            maxiter_factor: 20.0,
            hrule: 16.0,
            preconditioner: PreconditionerKind::default(),
            cell_n: 256,
            g: None,
            body: BodySpec::Zero,
            flux: None,
            seed: 0,
            norm_p: 4.0,
            ntmf_c0: 2.0,
            holder_gamma: 0.5,
            holder_samples: 2000,
            kernel_sources: 1,
            csv_bins: 64,
            raw: BTreeMap::new(),
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

/// Accepts decimals and `a/b` fractions.
fn number(key: &str, v: &str) -> Result<f64> {
    let v = v.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => value::<f64>(key, a.trim())? / value::<f64>(key, b.trim())?,
        None => value(key, v)?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("non-finite value `{v}` for `{key}`")))
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment. Unknown or
    /// repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), v.trim());
            if c.raw.insert(key.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            c.set(key, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "experiment.kind" => self.kind = Some(v.parse()?),
            "coeff.name" => self.coeff_name = v.to_string(),
            "coeff.c0" => self.coeff_c0 = number(key, v)?,
            "coeff.c1" => self.coeff_c1 = number(key, v)?,
            "coeff.shear" => self.coeff_shear = number(key, v)?,
            "coeff.coupling" => self.coupling = number(key, v)?,
            "system.m" => self.m = value(key, v)?,
            "domain.shape" => self.shape = Shape::parse(v).map_err(|e| Error::Config(e.to_string()))?,
            "domain.n" => self.domain_n = value(key, v)?,
            "sweep.eps" => {
                let list = v.split(',').map(|s| number(key, s)).collect::<Result<Vec<_>>>()?;
                self.eps = Some(list);
            }
            "solver.tol" => self.tol = number(key, v)?,
            "solver.ctol" => self.ctol = number(key, v)?,
            "solver.maxiter" => self.maxiter_factor = number(key, v)?,
            "solver.hrule" => self.hrule = number(key, v)?,
            "solver.precond" => {
                self.preconditioner = match v {
                    "jacobi" => PreconditionerKind::Jacobi,
                    "ssor" => PreconditionerKind::default(),
                    other => return Err(Error::Config(format!("unknown preconditioner `{other}` (ssor|jacobi)"))),
                }
            }
            "solver.omega" => match self.preconditioner {
                PreconditionerKind::Ssor { .. } => {
                    self.preconditioner = PreconditionerKind::Ssor { omega: number(key, v)? };
                }
                PreconditionerKind::Jacobi => return Err(Error::Config("solver.omega needs solver.precond = ssor".into())),
            },
            "cell.n" => self.cell_n = value(key, v)?,
            "data.g" => self.g = Some(BoundarySpec::parse(v).map_err(|e| Error::Config(e.to_string()))?),
            "data.F" => self.body = BodySpec::parse(v).map_err(|e| Error::Config(e.to_string()))?,
            "data.f" => self.flux = Some(FluxSpec::parse(v).map_err(|e| Error::Config(e.to_string()))?),
            "seed" => self.seed = value(key, v)?,
            "norm.p" => self.norm_p = number(key, v)?,
            "ntmf.c0" => self.ntmf_c0 = number(key, v)?,
            "holder.gamma" => self.holder_gamma = number(key, v)?,
            "holder.samples" => self.holder_samples = value(key, v)?,
            "kernel.sources" => self.kernel_sources = value(key, v)?,
            "report.bins" => self.csv_bins = value(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(eps) = &self.eps {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                return bad(format!("sweep.eps must be values in (0, 1], got {eps:?}"));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("solver.tol must lie in (0, 1), got {}", self.tol));
        }
        if !(self.hrule >= 2.0) {
            return bad(format!("solver.hrule must be at least 2, got {}", self.hrule));
        }
        if let PreconditionerKind::Ssor { omega } = self.preconditioner {
            if !(omega > 0.0 && omega < 2.0) {
                return bad(format!("solver.omega must lie in (0, 2), got {omega}"));
            }
        }
        if !(self.norm_p > 1.0) {
            return bad(format!("norm.p must exceed 1, got {}", self.norm_p));
        }
        if !(self.ntmf_c0 > 1.0) {
            return bad(format!("ntmf.c0 must exceed 1, got {}", self.ntmf_c0));
        }
        if !(self.holder_gamma > 0.0 && self.holder_gamma <= 1.0) {
            return bad(format!("holder.gamma must lie in (0, 1], got {}", self.holder_gamma));
        }
        if self.kernel_sources == 0 || self.csv_bins == 0 {
            return bad("kernel.sources and report.bins must be positive".into());
        }
        self.tensor().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// The configured coefficient tensor.
    pub fn tensor(&self) -> Result<CoefficientTensor> {
        let params: Vec<f64> = match self.coeff_name.as_str() {
            "constant" => vec![self.coeff_c0],
            "rotated-laminate" => vec![self.coeff_c0, self.coeff_c1, self.coeff_shear],
            _ => vec![self.coeff_c0, self.coeff_c1],
        };
        CoefficientTensor::builtin(&self.coeff_name, &params)?.with_system(self.m, self.coupling)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            ctol: self.ctol,
            maxiter_factor: self.maxiter_factor,
            project: false,
            preconditioner: self.preconditioner,
        }
    }

    /// Right-hand sides for `kind`: divergence-form data without boundary
    /// flux for `w1p-sweep` (a vortex by default), `g = cos θ` otherwise.
    pub fn data(&self, kind: ExperimentKind) -> DataSpec {
        let (g, flux) = match kind {
            ExperimentKind::W1pSweep => (BoundarySpec::Zero, FluxSpec::RotatingVortex { center: FluxSpec::VORTEX_CENTER }),
            _ => (BoundarySpec::CosTheta, FluxSpec::Zero),
        };
        DataSpec { g: self.g.unwrap_or(g), body: self.body, flux: self.flux.unwrap_or(flux) }
    }

    /// ε-grid in descending order.
    pub fn eps_grid(&self, profile: Profile) -> Vec<f64> {
        let mut eps = self.eps.clone().unwrap_or_else(|| {
            let mut e = vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
            if profile == Profile::Deep {
                e.push(1.0 / 64.0);
            }
            e
        });
        eps.sort_by(|a, b| b.total_cmp(a));
        eps.dedup();
        eps
    }

    /// The keys as given, in sorted order.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.raw
    }
}
