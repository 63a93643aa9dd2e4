use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{solve_correctors, CorrectorSet};
use crate::coefficients::{CoeffMatrix, DIM};
use crate::error::{Error, Result};
use crate::kernel::{kernel_profile, neumann_function_column, write_decay_csv, KernelProfile};
use crate::mesh::{edge_midpoints, DomainMesh, Element, Triangulation};
use crate::neumann::{boundary_corrector, psi_remainder, two_scale_remainder, DataSpec, NeumannOperator, Solution};

use super::config::{Config, Profile};
use super::{fit_rate, holder_seminorm, nontangential_max, norm, rellich_ratio, spread, NormInput, NormKind};

/// Schema tag of the JSON report.
pub const REPORT_SCHEMA: &str = "hlab-report/1";

/// Registered experiment kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    Homogenize,
    TwoScale,
    LipschitzSweep,
    PsiDecay,
    KernelSweep,
    NtmfSweep,
    RellichSweep,
    W1pSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Homogenize,
        ExperimentKind::TwoScale,
        ExperimentKind::LipschitzSweep,
        ExperimentKind::PsiDecay,
        ExperimentKind::KernelSweep,
        ExperimentKind::NtmfSweep,
        ExperimentKind::RellichSweep,
        ExperimentKind::W1pSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Homogenize => "homogenize",
            ExperimentKind::TwoScale => "two-scale",
            ExperimentKind::LipschitzSweep => "lipschitz-sweep",
            ExperimentKind::PsiDecay => "psi-decay",
            ExperimentKind::KernelSweep => "kernel-sweep",
            ExperimentKind::NtmfSweep => "ntmf-sweep",
            ExperimentKind::RellichSweep => "rellich-sweep",
            ExperimentKind::W1pSweep => "w1p-sweep",
        }
    }

    /// Value columns of the CSV, after `eps` and `h`.
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Homogenize => &["n", "closed_form_error"],
            ExperimentKind::TwoScale => &["l2_difference", "w12_remainder", "iterations_u0", "iterations_ueps"],
            ExperimentKind::LipschitzSweep => &["sup_gradient", "holder_seminorm", "iterations"],
            ExperimentKind::PsiDecay => &["max_rho", "max_gradient", "compatibility", "excluded"],
            ExperimentKind::KernelSweep => &["r_weighted_gradient_sup", "log_normalized_sup", "samples", "excluded"],
            ExperimentKind::NtmfSweep => &["ntmf_l2", "g_l2", "ntmf_ratio", "gradient_l4", "gradient_l4_ratio", "gradient_l2_ratio", "fallbacks"],
            ExperimentKind::RellichSweep => &["rellich_ratio"],
            ExperimentKind::W1pSweep => &["gradient_lp", "f_lp", "ratio"],
        }
    }

    fn is_sweep(&self) -> bool {
        *self != ExperimentKind::Homogenize
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// One row of a report. `values` follows [`ExperimentKind::columns`] and is
/// empty when the stage failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub eps: Option<f64>,
    pub h: f64,
    pub values: Vec<f64>,
    pub error: Option<String>,
}

impl Record {
    /// Value of `column`, if the stage succeeded.
    pub fn get(&self, kind: ExperimentKind, column: &str) -> Option<f64> {
        let i = kind.columns().iter().position(|c| *c == column)?;
        self.values.get(i).copied()
    }
}

/// A fitted rate. `slope` is `None` when the fit is undefined, with the
/// reason in `note`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub quantity: String,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub note: Option<String>,
}

/// A threshold check; `at_most` selects `value ≤ bound` over `value ≥ bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub at_most: bool,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, at_most: true, passed: value <= bound }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, at_most: false, passed: value >= bound }
    }
}

/// Outcome of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema: &'static str,
    pub tool: String,
    pub experiment: ExperimentKind,
    pub profile: &'static str,
    pub config: BTreeMap<String, String>,
    /// Row-major `Â` from the cell solve.
    pub homogenized: Option<Vec<f64>>,
    pub columns: Vec<&'static str>,
    /// Sorted by ε descending (by `h` descending for `homogenize`).
    pub records: Vec<Record>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
    /// Errors outside the per-ε stages.
    pub failures: Vec<String>,
}

impl Serialize for ExperimentKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

fn csv_number(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepReport {
    /// All stages ran and every check passed.
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.records.iter().all(|r| r.error.is_none()) && self.checks.iter().all(|c| c.passed)
    }

    /// Values of `column` over the successful records.
    pub fn column(&self, column: &str) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.get(self.experiment, column)).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,h,{},status", self.columns.join(","))?;
        for r in &self.records {
            let eps = r.eps.map(csv_number).unwrap_or_default();
            let values: Vec<String> = match &r.error {
                None => r.values.iter().map(|v| csv_number(*v)).collect(),
                Some(_) => vec![String::new(); self.columns.len()],
            };
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("error: {}", e.replace([',', '\n'], ";")),
            };
            writeln!(w, "{eps},{},{},{status}", csv_number(r.h), values.join(","))?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    /// Writes `<kind>.csv` and `<kind>.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let name = self.experiment.name();
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{name}.csv")))?))?;
        self.write_json(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{name}.json")))?))?;
        Ok(())
    }
}

/// Runs the configured experiment and, if `out` is given, writes its CSV and
/// JSON there.
pub fn run_experiment(config: &Config, profile: Profile, out: Option<&Path>) -> Result<SweepReport> {
    let kind = config.kind.ok_or_else(|| Error::Config("experiment.kind is required".into()))?;
    let report = run_experiments(config, profile, &[kind], out)?.pop().expect("one report per kind");
    Ok(report)
}

/// Runs several experiments over one ε-grid, sharing the cell solve, the
/// meshes and the oscillatory solutions between them. Only configuration
/// errors are returned; stage errors are recorded in the reports.
pub fn run_experiments(config: &Config, profile: Profile, kinds: &[ExperimentKind], out: Option<&Path>) -> Result<Vec<SweepReport>> {
    let tensor = config.tensor().map_err(|e| Error::Config(e.to_string()))?;
    let opts = config.solve_options();
    let t0 = Instant::now();
    let cell = solve_correctors(&tensor, config.cell_n, &opts);
    log::info!("cell problem at n = {}: {:.2?}", config.cell_n, t0.elapsed());
    let homogenized = cell.as_ref().ok().map(|cs| cs.homogenized().to_rows());

    let eps_grid = config.eps_grid(profile);
    let sweeps: Vec<ExperimentKind> = kinds.iter().copied().filter(ExperimentKind::is_sweep).collect();
    let stages: Vec<StageOutput> = match (&cell, sweeps.is_empty()) {
        (_, true) => Vec::new(),
        (Ok(cs), false) => {
            let ctx = Context { config, cs, kinds: &sweeps };
            eps_grid.par_iter().map(|&eps| run_stage(&ctx, eps)).collect()
        }
        (Err(_), false) => Vec::new(),
    };

    let mut reports = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let mut report = SweepReport {
            schema: REPORT_SCHEMA,
            tool: format!("hlab {}", env!("CARGO_PKG_VERSION")),
            experiment: kind,
            profile: match profile {
                Profile::Fast => "fast",
                Profile::Deep => "deep",
            },
            config: config.echo().clone(),
            homogenized: homogenized.clone(),
            columns: kind.columns().to_vec(),
            records: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            failures: Vec::new(),
        };
        match (&cell, kind) {
            (Err(e), _) => report.failures.push(format!("cell problem: {e}")),
            (Ok(_), ExperimentKind::Homogenize) => homogenize(config, &mut report),
            (Ok(_), _) => {
                for stage in &stages {
                    let (values, error) = match &stage.results[&kind] {
                        Ok(v) => (v.clone(), None),
                        Err(e) => (Vec::new(), Some(e.clone())),
                    };
                    report.records.push(Record { eps: Some(stage.eps), h: stage.h, values, error });
                }
                summarize(config, &mut report);
                if let (Some(dir), ExperimentKind::KernelSweep) = (out, kind) {
                    let rows: Vec<(f64, &KernelProfile)> =
                        stages.iter().filter_map(|s| s.kernel.as_ref().map(|p| (s.eps, p))).collect();
                    std::fs::create_dir_all(dir)?;
                    let f = std::fs::File::create(dir.join("kernel-decay.csv"))?;
                    write_decay_csv(std::io::BufWriter::new(f), &rows, config.csv_bins)?;
                }
            }
        }
        if let Some(dir) = out {
            report.write_to_dir(dir)?;
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Closed-form `Â` where one is known: constant tensors and scalar-block
/// laminates (harmonic mean across the layers, arithmetic mean along them).
pub fn closed_form_homogenized(config: &Config) -> Option<CoeffMatrix> {
    let m = config.m;
    if config.coupling != 0.0 {
        return None;
    }
    let (c0, c1) = (config.coeff_c0, config.coeff_c1);
    let harmonic = (c0 * c0 - c1 * c1).sqrt();
    // layers normal to k: Â = c0·I − (c0 − harmonic)·k kᵀ/|k|²
    let k = match config.coeff_name.as_str() {
        "constant" => return Some(CoeffMatrix::scalar(m, c0)),
        "laminate" => [1.0, 0.0],
        "rotated-laminate" => [1.0, config.coeff_shear],
        _ => return None,
    };
    let k2 = k[0] * k[0] + k[1] * k[1];
    let mut hat = CoeffMatrix::zeros(m);
    for alpha in 0..m {
        for i in 0..DIM {
            for j in 0..DIM {
                let delta = if i == j { c0 } else { 0.0 };
                hat.set(i, j, alpha, alpha, delta - (c0 - harmonic) * k[i] * k[j] / k2);
            }
        }
    }
    Some(hat)
}

fn homogenize(config: &Config, report: &mut SweepReport) {
    let exact = closed_form_homogenized(config);
    let tensor = config.tensor().expect("validated");
    let opts = config.solve_options();
    let mut errors = Vec::new();
    for n in [config.cell_n / 4, config.cell_n / 2, config.cell_n] {
        let h = 1.0 / n as f64;
        let result = solve_correctors(&tensor, n, &opts).map(|cs| {
            let hat = *cs.homogenized();
            match &exact {
                Some(e) => {
                    let mut diff = hat;
                    diff.add_scaled(e, -1.0);
                    diff.max_abs()
                }
                None => f64::NAN,
            }
        });
        match result {
            Ok(err) => {
                if err.is_finite() {
                    errors.push((h, err));
                }
                report.records.push(Record { eps: None, h, values: vec![n as f64, err], error: None });
            }
            Err(e) => report.records.push(Record { eps: None, h, values: Vec::new(), error: Some(e.to_string()) }),
        }
    }
    if exact.is_none() {
        report.fits.push(Fit {
            quantity: "closed_form_error".into(),
            slope: None,
            residual: None,
            note: Some("no closed form for this tensor".into()),
        });
        return;
    }
    if let Some(&(_, finest)) = errors.last() {
        report.checks.push(Check::at_most("closed_form_error", finest, 2e-3));
    }
    report.fits.push(rate_fit("closed_form_error", &errors));
}

/// Remainders at or below this size carry no rate information.
const RATE_FLOOR: f64 = 1e-9;

fn rate_fit(quantity: &str, points: &[(f64, f64)]) -> Fit {
    if !points.is_empty() && points.iter().all(|p| p.1 <= RATE_FLOOR) {
        return Fit {
            quantity: quantity.into(),
            slope: None,
            residual: None,
            note: Some(format!("undefined: all values at or below {RATE_FLOOR:e}")),
        };
    }
    match fit_rate(points) {
        Ok((slope, residual)) => Fit { quantity: quantity.into(), slope: Some(slope), residual: Some(residual), note: None },
        Err(e) => Fit { quantity: quantity.into(), slope: None, residual: None, note: Some(format!("undefined: {e}")) },
    }
}

/// Uniformity bounds on `max/min` across the ε-grid.
pub const LIPSCHITZ_SPREAD: f64 = 2.0;
pub const HOLDER_SPREAD: f64 = 2.0;
pub const NTMF_SPREAD: f64 = 2.0;
pub const W1P_SPREAD: f64 = 2.0;
pub const PSI_SPREAD: f64 = 3.0;
pub const KERNEL_SPREAD: f64 = 3.0;
pub const RELLICH_SPREAD: f64 = 4.0;
/// Two-scale rate: slope at least this, with fit residual at most
/// [`TWO_SCALE_RESIDUAL`].
pub const TWO_SCALE_SLOPE: f64 = 0.9;
pub const TWO_SCALE_RESIDUAL: f64 = 0.15;

fn summarize(_config: &Config, report: &mut SweepReport) {
    let spread_check = |report: &mut SweepReport, column: &str, bound: f64| {
        let values = report.column(column);
        match spread(&values) {
            Ok(s) => report.checks.push(Check::at_most(&format!("{column}_spread"), s, bound)),
            Err(e) => report.failures.push(format!("{column}: {e}")),
        }
    };
    match report.experiment {
        ExperimentKind::Homogenize => {}
        ExperimentKind::TwoScale => {
            let points: Vec<(f64, f64)> = report
                .records
                .iter()
                .filter_map(|r| Some((r.eps?, r.get(ExperimentKind::TwoScale, "l2_difference")?)))
                .collect();
            let fit = rate_fit("l2_difference", &points);
            if let (Some(slope), Some(residual)) = (fit.slope, fit.residual) {
                report.checks.push(Check::at_least("l2_difference_slope", slope, TWO_SCALE_SLOPE));
                report.checks.push(Check::at_most("l2_difference_fit_residual", residual, TWO_SCALE_RESIDUAL));
            }
            report.fits.push(fit);
        }
        ExperimentKind::LipschitzSweep => {
            spread_check(report, "sup_gradient", LIPSCHITZ_SPREAD);
            spread_check(report, "holder_seminorm", HOLDER_SPREAD);
        }
        ExperimentKind::PsiDecay => spread_check(report, "max_rho", PSI_SPREAD),
        ExperimentKind::KernelSweep => spread_check(report, "r_weighted_gradient_sup", KERNEL_SPREAD),
        ExperimentKind::NtmfSweep => {
            spread_check(report, "ntmf_ratio", NTMF_SPREAD);
            spread_check(report, "gradient_l4_ratio", NTMF_SPREAD);
        }
        ExperimentKind::RellichSweep => spread_check(report, "rellich_ratio", RELLICH_SPREAD),
        ExperimentKind::W1pSweep => spread_check(report, "ratio", W1P_SPREAD),
    }
}

struct Context<'a> {
    config: &'a Config,
    cs: &'a CorrectorSet,
    kinds: &'a [ExperimentKind],
}

struct StageOutput {
    eps: f64,
    h: f64,
    results: BTreeMap<ExperimentKind, std::result::Result<Vec<f64>, String>>,
    kernel: Option<KernelProfile>,
}

/// Oscillatory solutions keyed by their data, computed on first use.
struct Solutions<'o, 'm> {
    op: &'o NeumannOperator<'m>,
    eps: f64,
    m: usize,
    cache: Vec<(DataSpec, Solution)>,
}

impl Solutions<'_, '_> {
    fn get(&mut self, data: DataSpec, initial: Option<&[f64]>) -> Result<&Solution> {
        if let Some(i) = self.cache.iter().position(|(d, _)| *d == data) {
            return Ok(&self.cache[i].1);
        }
        let t0 = Instant::now();
        let sol = self.op.solve_from(&data.build(self.op.mesh(), self.m), initial)?;
        log::info!(
            "u_eps at eps = {:.4e} (g = {}, f = {}): {} iterations, {:.2?}",
            self.eps,
            data.g,
            data.flux,
            sol.stats.iterations,
            t0.elapsed()
        );
        self.cache.push((data, sol));
        Ok(&self.cache.last().expect("just pushed").1)
    }
}

fn run_stage(ctx: &Context, eps: f64) -> StageOutput {
    let config = ctx.config;
    let h = eps / config.hrule;
    let mut out = StageOutput { eps, h, results: BTreeMap::new(), kernel: None };
    let fail_all = |out: &mut StageOutput, e: Error| {
        for &k in ctx.kinds {
            out.results.insert(k, Err(e.to_string()));
        }
    };
    let mesh = match DomainMesh::new(config.shape, DomainMesh::resolution_for(h)) {
        Ok(m) => m,
        Err(e) => {
            fail_all(&mut out, e);
            return out;
        }
    };
    out.h = mesh.h();
    let tensor = config.tensor().expect("validated");
    let op = match NeumannOperator::eps(&tensor, eps, &mesh, config.solve_options()) {
        Ok(op) => op,
        Err(e) => {
            fail_all(&mut out, e);
            return out;
        }
    };
    let mut sols = Solutions { op: &op, eps, m: config.m, cache: Vec::new() };
    let mut order = ctx.kinds.to_vec();
    order.sort();
    for kind in order {
        let t0 = Instant::now();
        let result = match kind {
            ExperimentKind::Homogenize => continue,
            ExperimentKind::TwoScale => two_scale(ctx, &op, &mut sols, config.data(kind)),
            ExperimentKind::LipschitzSweep => lipschitz(config, &mut sols, config.data(kind)),
            ExperimentKind::PsiDecay => psi_decay(ctx, &op),
            ExperimentKind::KernelSweep => kernel(config, &op).map(|(values, profile)| {
                out.kernel = Some(profile);
                values
            }),
            ExperimentKind::NtmfSweep => ntmf(config, &mut sols, config.data(kind)),
            ExperimentKind::RellichSweep => rellich(&op, &mut sols, config.data(kind)),
            ExperimentKind::W1pSweep => w1p(config, &mut sols, config.data(kind)),
        };
        log::info!("{kind} at eps = {eps:.4e}: {:.2?}", t0.elapsed());
        out.results.insert(kind, result.map_err(|e| e.to_string()));
    }
    out
}

fn two_scale(ctx: &Context, op: &NeumannOperator, sols: &mut Solutions, data: DataSpec) -> Result<Vec<f64>> {
    let mesh = op.mesh();
    let hat = *ctx.cs.homogenized();
    let h0 = NeumannOperator::homogenized(&hat, mesh, *op.options())?;
    let u0 = h0.solve(&data.build(mesh, op.m()))?;
    let eps = sols.eps;
    let ue = sols.get(data, Some(u0.field.values()))?;
    let ts = two_scale_remainder(mesh, &ue.field, &u0.field, ctx.cs, eps)?;
    Ok(vec![ts.l2_difference, ts.w12, u0.stats.iterations as f64, ue.stats.iterations as f64])
}

fn lipschitz(config: &Config, sols: &mut Solutions, data: DataSpec) -> Result<Vec<f64>> {
    let mesh = sols.op.mesh();
    let ue = sols.get(data, None)?;
    let input = NormInput::Field { mesh, field: &ue.field };
    let sup = norm(input, NormKind::SupGradient)?;
    let holder = holder_seminorm(mesh, &ue.field, config.holder_gamma, config.holder_samples, config.seed)?;
    Ok(vec![sup, holder, ue.stats.iterations as f64])
}

fn psi_decay(ctx: &Context, op: &NeumannOperator) -> Result<Vec<f64>> {
    let mesh = op.mesh();
    let bcs = boundary_corrector(op, ctx.cs.homogenized())?;
    let psi = psi_remainder(mesh, &bcs, ctx.cs)?;
    Ok(vec![psi.max_rho, psi.max_gradient(mesh)?, bcs.compatibility(), psi.excluded as f64])
}

/// Source nodes: the anchor, then seeded points within radius 1/2.
pub fn kernel_sources(mesh: &DomainMesh, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = vec![mesh.anchor_node()];
    while sources.len() < count {
        let r = 0.5 * rng.gen::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.gen::<f64>();
        let k = mesh.nearest_node([r * theta.cos(), r * theta.sin()]);
        if !sources.contains(&k) {
            sources.push(k);
        }
    }
    sources
}

fn kernel(config: &Config, op: &NeumannOperator) -> Result<(Vec<f64>, KernelProfile)> {
    let mesh = op.mesh();
    let mut columns = Vec::new();
    for source in kernel_sources(mesh, config.kernel_sources, config.seed) {
        for beta in 0..op.m() {
            columns.push(neumann_function_column(op, source, beta)?);
        }
    }
    let profile = kernel_profile(mesh, &columns, None)?;
    let values = vec![
        profile.r_weighted_gradient_sup,
        profile.log_normalized_sup,
        profile.samples.len() as f64,
        profile.excluded as f64,
    ];
    Ok((values, profile))
}

fn ntmf(config: &Config, sols: &mut Solutions, data: DataSpec) -> Result<Vec<f64>> {
    let mesh = sols.op.mesh();
    let m = sols.m;
    let ue = sols.get(data, None)?;
    let grad = ue.field.gradient(mesh)?;
    let star = nontangential_max(mesh, grad, config.ntmf_c0)?;
    let ntmf_l2 = super::boundary_linear_lp(mesh, &star.values, 2.0);
    let g_l2 = data.boundary_norm(mesh, 2.0) * (m as f64).sqrt();
    if !(g_l2 > 0.0) {
        return Err(Error::UndefinedRatio(g_l2));
    }
    let input = NormInput::Field { mesh, field: &ue.field };
    let l4 = norm(input, NormKind::GradientLp(4.0))?;
    let l2 = norm(input, NormKind::GradientLp(2.0))?;
    Ok(vec![ntmf_l2, g_l2, ntmf_l2 / g_l2, l4, l4 / g_l2, l2 / g_l2, star.fallbacks.len() as f64])
}

fn rellich(op: &NeumannOperator, sols: &mut Solutions, data: DataSpec) -> Result<Vec<f64>> {
    let ue = sols.get(data, None)?;
    Ok(vec![rellich_ratio(op, &ue.field)?])
}

fn w1p(config: &Config, sols: &mut Solutions, data: DataSpec) -> Result<Vec<f64>> {
    let mesh = sols.op.mesh();
    let p = config.norm_p;
    let ue = sols.get(data, None)?;
    let grad = norm(NormInput::Field { mesh, field: &ue.field }, NormKind::GradientLp(p))?;
    let f = flux_lp(mesh, data, sols.m, p);
    if !(f > 0.0) {
        return Err(Error::UndefinedRatio(f));
    }
    Ok(vec![grad, f, grad / f])
}

/// `‖f‖_{L^p}` of the divergence-form data, all components, by the
/// edge-midpoint rule.
pub fn flux_lp(mesh: &DomainMesh, data: DataSpec, m: usize, p: f64) -> f64 {
    let mut s = 0.0;
    for t in 0..mesh.triangle_count() {
        let v = mesh.vertices(t);
        let area = Element::new(&v).area;
        for q in edge_midpoints(&v) {
            let f = data.flux.value(q);
            let mag = ((f[0] * f[0] + f[1] * f[1]) * m as f64).sqrt();
            s += area / 3.0 * mag.powf(p);
        }
    }
    s.powf(1.0 / p)
}
