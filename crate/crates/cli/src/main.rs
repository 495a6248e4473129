//! `vche`: forward runs, derivative checks, sparse solves and the kappa experiments.
//!
//! Every subcommand writes its CSV/TOML/snapshot output under `--out`, echoes the effective
//! run configuration to `config.toml` there, prints one `PASS`/`FAIL` line per assertion and
//! exits with status 1 if any enabled assertion failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use vche::config::load_config;
use vche::{Method, RunConfig, SparsityKind};

#[derive(Parser, Debug)]
#[command(name = "vche", version, about = "Sparse optimal control of the viscous Camassa-Holm equations")]
struct Cli {
    /// Run file (TOML); defaults are the 8^3 benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for random controls and probe directions; overrides the run file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "vche-out")]
    out: PathBuf,
    /// Worker threads for the data-parallel sections.
    #[arg(long, global = true, env = "VCHE_THREADS")]
    threads: Option<usize>,
    /// Report assertions without letting them affect the exit status.
    #[arg(long, global = true)]
    no_assert: bool,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the run file.
#[derive(Args, Debug, Clone, Default)]
pub struct ProblemArgs {
    /// Sparsity functional (J1, J2, J3, NONE).
    #[arg(long)]
    kind: Option<SparsityKind>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Time steps M.
    #[arg(long)]
    steps: Option<usize>,
    /// PROX_GRAD or FIXED_POINT.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    kkt_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the state equation for one control and export the energy ledger.
    Forward(commands::ForwardArgs),
    /// Central-difference check of the reduced gradient.
    GradCheck(commands::GradCheckArgs),
    /// Solve one sparse problem and certify the first-order system.
    Solve(commands::SolveArgs),
    /// Distance to the kappa = 0 solution over the kappa grid, with log-log rate fits.
    KappaSweep(commands::SweepArgs),
    /// kappa -> 0 convergence of controls and objective gaps.
    Convergence(commands::SweepArgs),
    /// Support fraction against kappa, with the zero-support threshold.
    SupportCurve(commands::SweepArgs),
    /// Curvature and quadratic growth along sampled critical directions.
    SecondOrder(commands::SecondOrderArgs),
}

/// Outcome of the enabled assertions.
#[derive(Default)]
pub struct Checks {
    failed: usize,
    total: usize,
}

impl Checks {
    pub fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    }
}

/// Context shared by the subcommands.
pub struct Ctx {
    pub run: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Ctx {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn create(&self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        let p = self.path(name);
        let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(std::io::BufWriter::new(f))
    }
}

fn apply(run: &mut RunConfig, a: &ProblemArgs) {
    if let Some(k) = a.kind {
        run.control.sparsity = k;
        run.experiment.kinds = vec![k];
    }
    if let Some(v) = a.kappa {
        run.control.kappa = v;
    }
    if let Some(v) = a.gamma {
        run.control.gamma = v;
    }
    if let Some(v) = a.n {
        run.grid.n = [v; 3];
    }
    if let Some(v) = a.steps {
        run.time.steps = v;
    }
    if let Some(v) = a.method {
        run.solver.method = v;
    }
    if let Some(v) = a.kkt_tol {
        run.solver.kkt_tol = v;
    }
    if let Some(v) = a.max_iters {
        run.solver.max_iters = v;
    }
}

fn problem_args(c: &Command) -> &ProblemArgs {
    match c {
        Command::Forward(a) => &a.problem,
        Command::GradCheck(a) => &a.problem,
        Command::Solve(a) => &a.problem,
        Command::KappaSweep(a) | Command::Convergence(a) | Command::SupportCurve(a) => &a.problem,
        Command::SecondOrder(a) => &a.problem,
    }
}

fn run(cli: Cli) -> Result<Checks> {
    if let Some(t) = cli.threads {
        vche::par::init_threads(t);
    }
    let mut run = match &cli.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    let args = problem_args(&cli.command);
    apply(&mut run, args);
    if let Some(s) = cli.seed {
        run.solver.seed = s;
        run.experiment.seed = s;
    }
    // J2 has no proximal map; an explicit --method still goes through validation
    if run.control.sparsity == SparsityKind::J2 && args.method.is_none() {
        run.solver.method = Method::FixedPoint;
    }
    run.validate()?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    std::fs::write(cli.out.join("config.toml"), run.to_toml())?;
    let ctx = Ctx {
        seed: run.experiment.seed,
        run,
        out: cli.out,
    };
    eprintln!("threads: {}", vche::par::num_threads());
    let mut checks = Checks::default();
    match &cli.command {
        Command::Forward(a) => commands::forward(&ctx, a, &mut checks)?,
        Command::GradCheck(a) => commands::grad_check(&ctx, a, &mut checks)?,
        Command::Solve(a) => commands::solve(&ctx, a, &mut checks)?,
        Command::KappaSweep(a) => commands::kappa_sweep(&ctx, a, &mut checks)?,
        Command::Convergence(a) => commands::convergence(&ctx, a, &mut checks)?,
        Command::SupportCurve(a) => commands::support_curve(&ctx, a, &mut checks)?,
        Command::SecondOrder(a) => commands::second_order(&ctx, a, &mut checks)?,
    }
    Ok(checks)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let enforce = !cli.no_assert;
    match run(cli) {
        Ok(c) => {
            eprintln!("{} of {} assertions passed", c.total - c.failed, c.total);
            if c.failed > 0 && enforce {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
