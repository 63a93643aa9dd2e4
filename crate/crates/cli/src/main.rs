use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hlab::cell::{flux_correctors, solve_correctors};
use hlab::mesh::DomainMesh;
use hlab::neumann::NeumannOperator;
use hlab::verify::{norm, run_experiment, Config, ExperimentKind, NormInput, NormKind, Profile, SweepReport};
use hlab::Error;

#[derive(Parser)]
#[command(name = "hlab", version, about = "Periodic homogenization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem and flux correctors; write the corrector file.
    Cell(Common),
    /// Homogenized tensor at three torus resolutions against its closed form.
    Homogenize(Common),
    /// Solve the oscillatory Neumann problem for every eps and dump the fields.
    Solve(Common),
    /// Boundary correctors and the Psi decay sweep.
    Corrector(Common),
    /// Neumann-function decay sweep.
    Kernel(Common),
    /// Run the experiment named by `experiment.kind`.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "fast", value_parser = ["fast", "deep"])]
    profile: String,
}

enum Failure {
    Check,
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (common, fixed) = match &command {
        Command::Cell(c) | Command::Solve(c) => (c, None),
        Command::Homogenize(c) => (c, Some(ExperimentKind::Homogenize)),
        Command::Corrector(c) => (c, Some(ExperimentKind::PsiDecay)),
        Command::Kernel(c) => (c, Some(ExperimentKind::KernelSweep)),
        Command::Sweep(c) => (c, None),
    };
    let mut config = Config::from_file(&common.config)?;
    let profile: Profile = common.profile.parse()?;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(e.to_string()))?;
    }
    if let Some(kind) = fixed {
        match config.kind {
            Some(k) if k != kind => {
                return Err(Failure::Usage(format!("config names experiment `{k}`, but this subcommand runs `{kind}`")));
            }
            _ => config.kind = Some(kind),
        }
    }
    std::fs::create_dir_all(&common.out)?;
    match command {
        Command::Cell(_) => cell(&config, &common.out),
        Command::Solve(_) => solve(&config, profile, &common.out),
        _ => {
            if config.kind.is_none() {
                return Err(Failure::Usage("experiment.kind is required for `sweep`".into()));
            }
            let report = run_experiment(&config, profile, Some(&common.out))?;
            summarize(&report);
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
    }
}

fn summarize(report: &SweepReport) {
    for fit in &report.fits {
        match (fit.slope, fit.residual) {
            (Some(s), Some(r)) => println!("fit {}: slope {s:.4}, residual {r:.4}", fit.quantity),
            _ => println!("fit {}: {}", fit.quantity, fit.note.as_deref().unwrap_or("undefined")),
        }
    }
    for c in &report.checks {
        let rel = if c.at_most { "<=" } else { ">=" };
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {:.6} {rel} {}", c.name, c.value, c.bound);
    }
    for r in &report.records {
        if let Some(e) = &r.error {
            println!("FAIL stage eps = {:?}: {e}", r.eps);
        }
    }
    for f in &report.failures {
        println!("FAIL {f}");
    }
}

fn cell(config: &Config, out: &Path) -> Result<(), Failure> {
    let tensor = config.tensor()?;
    let opts = config.solve_options();
    let cs = flux_correctors(solve_correctors(&tensor, config.cell_n, &opts)?, &opts)?;
    let path = out.join("correctors.hlcs");
    cs.write_to(BufWriter::new(File::create(&path)?))?;
    let hat = cs.homogenized();
    let n = hat.size();
    let mut w = BufWriter::new(File::create(out.join("homogenized.csv"))?);
    for row in 0..n {
        let cells: Vec<String> = (0..n).map(|c| format!("{:.16e}", hat.entry(row, c))).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    println!("homogenized tensor ({n}x{n}) written; correctors in {}", path.display());
    Ok(())
}

fn solve(config: &Config, profile: Profile, out: &Path) -> Result<(), Failure> {
    let tensor = config.tensor()?;
    let kind = config.kind.unwrap_or(ExperimentKind::LipschitzSweep);
    let data = config.data(kind);
    let mut summary = BufWriter::new(File::create(out.join("solve.csv"))?);
    writeln!(summary, "eps,h,nodes,iterations,relative_residual,sup_gradient,gradient_l2")?;
    for (i, eps) in config.eps_grid(profile).into_iter().enumerate() {
        let mesh = DomainMesh::new(config.shape, DomainMesh::resolution_for(eps / config.hrule))?;
        let op = NeumannOperator::eps(&tensor, eps, &mesh, config.solve_options())?;
        let sol = op.solve(&data.build(&mesh, config.m))?;
        let input = NormInput::Field { mesh: &mesh, field: &sol.field };
        writeln!(
            summary,
            "{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e}",
            eps,
            mesh.h(),
            mesh.nodes().len(),
            sol.stats.iterations,
            sol.stats.relative_residual,
            norm(input, NormKind::SupGradient)?,
            norm(input, NormKind::GradientLp(2.0))?
        )?;
        let mut w = BufWriter::new(File::create(out.join(format!("solution-{i}.csv")))?);
        let m = sol.field.m();
        let header: Vec<String> = (0..m).map(|a| format!("u{a}")).collect();
        writeln!(w, "x,y,{}", header.join(","))?;
        for (k, p) in mesh.nodes().iter().enumerate() {
            let vals: Vec<String> = (0..m).map(|a| format!("{:.16e}", sol.field.value(k, a))).collect();
            writeln!(w, "{:.16e},{:.16e},{}", p[0], p[1], vals.join(","))?;
        }
        w.flush()?;
        log::info!("eps = {eps}: {} iterations", sol.stats.iterations);
    }
    summary.flush()?;
    Ok(())
}
