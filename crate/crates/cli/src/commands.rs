use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{ensure, Result};
use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vche::experiment::{
    options_for, run_convergence_study, run_kappa_sweep, run_support_curve, solve_reference, ExperimentSpec, RateFit,
};
use vche::optimizer::{sample_critical_cone, second_order_probe, solve_problem, CriticalDirection};
use vche::sensitivity::{grad_check as probe_gradient, write_grad_check_csv};
use vche::snapshot;
use vche::sparsity::{default_support_tol, write_support_csv};
use vche::{ControlField, ReducedProblem, SolveResult, SparsityKind, SpectralField};

use crate::{Checks, Ctx, ProblemArgs};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ControlKind {
    Zero,
    Random,
    Smooth,
}

#[derive(Args, Debug)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "random")]
    control: ControlKind,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Write a state snapshot every k steps (0: none).
    #[arg(long, default_value_t = 0)]
    snapshot_every: usize,
    /// Structured-text snapshots instead of binary.
    #[arg(long)]
    text: bool,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 3)]
    directions: usize,
    /// Amplitude of the random base control.
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Finite-difference steps.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7])]
    hs: Vec<f64>,
    /// Required best relative error per direction.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    text: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// kappa grid, strictly decreasing (support-curve: its own grid).
    #[arg(long, value_delimiter = ',')]
    kappas: Option<Vec<f64>>,
    /// Solve every kappa from zero instead of the previous solution.
    #[arg(long)]
    cold: bool,
}

#[derive(Args, Debug)]
pub struct SecondOrderArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of critical directions to collect.
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Give up after this many sampling rounds.
    #[arg(long, default_value_t = 50)]
    rounds: u64,
}

fn problem(ctx: &Ctx) -> Result<ReducedProblem> {
    Ok(ReducedProblem::from_config(&ctx.run.problem())?)
}

fn save_field(ctx: &Ctx, name: &str, f: &SpectralField, text: bool) -> Result<()> {
    let name = format!("{name}.{}", if text { "txt" } else { "bin" });
    snapshot::save(f, &ctx.path(&name))?;
    Ok(())
}

fn random_control(p: &ReducedProblem, rng: &mut ChaCha8Rng, amp: f64) -> ControlField {
    p.zero_control().map(|_| amp * rng.gen_range(-1.0..1.0))
}

pub fn forward(ctx: &Ctx, a: &ForwardArgs, checks: &mut Checks) -> Result<()> {
    let p = problem(ctx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let u = match a.control {
        ControlKind::Zero => p.zero_control(),
        ControlKind::Random => random_control(&p, &mut rng, a.amplitude),
        ControlKind::Smooth => {
            let amp = a.amplitude;
            let z = p.zero_control();
            ControlField::from_fn(z.grid(), z.steps(), z.dt(), |x, t, c| amp * (x[(c + 1) % 3] + t).sin())
        }
    }
    .project(&p.bounds);
    let traj = p.model.solve(&u, &p.y0)?;
    traj.write_csv(ctx.create("trajectory.csv")?)?;
    snapshot::save_control(&u, &ctx.path("control.ctrl"))?;
    if a.snapshot_every > 0 {
        for n in (0..traj.len()).step_by(a.snapshot_every) {
            save_field(ctx, &format!("state_{n:04}"), traj.state(n), a.text)?;
        }
    }
    save_field(ctx, "final_state", traj.final_state(), a.text)?;

    let div = traj.divergence_defect();
    checks.check("divergence-free", div <= 1e-12, format!("max defect {div:.3e}"));
    let ledger = traj.energy_ledger();
    let scale = ledger.records.iter().map(|r| r.kinetic).fold(ledger.initial, f64::max);
    let defect = ledger.records.iter().map(|r| r.defect.abs()).fold(0.0, f64::max);
    checks.check(
        "energy balance",
        defect <= 1e-10 * scale.max(f64::MIN_POSITIVE),
        format!("max defect {defect:.3e} at energy scale {scale:.3e}"),
    );
    if matches!(a.control, ControlKind::Zero) {
        let inc = ledger.energy_increases(1e-12);
        checks.check("energy non-increasing", inc.is_empty(), format!("{} increasing steps", inc.len()));
    }
    println!(
        "steps {} final l2 {:.6e} required C {:.6e}",
        traj.len() - 1,
        traj.final_state().norms().l2,
        ledger.required_constant()
    );
    Ok(())
}

pub fn grad_check(ctx: &Ctx, a: &GradCheckArgs, checks: &mut Checks) -> Result<()> {
    ensure!(a.directions > 0, "need at least one direction");
    let p = problem(ctx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let u = random_control(&p, &mut rng, a.amplitude).project(&p.bounds);
    let dirs: Vec<ControlField> = (0..a.directions).map(|_| random_control(&p, &mut rng, 1.0)).collect();
    let rows = probe_gradient(&p, &u, &dirs, &a.hs)?;
    write_grad_check_csv(&rows, ctx.create("grad_check.csv")?)?;
    for d in 0..a.directions {
        let best = rows
            .iter()
            .filter(|r| r.direction == d)
            .min_by(|x, y| x.rel_error.total_cmp(&y.rel_error))
            .expect("rows for every direction");
        checks.check(
            &format!("gradient direction {d}"),
            best.rel_error <= a.tol,
            format!("best relative error {:.3e} at h = {:e}", best.rel_error, best.h),
        );
    }
    Ok(())
}

fn write_history(ctx: &Ctx, r: &SolveResult) -> Result<()> {
    let mut out = ctx.create("history.csv")?;
    writeln!(out, "iter,objective,residual,step")?;
    for h in &r.history {
        writeln!(out, "{},{:?},{:?},{:?}", h.iter, h.objective, h.residual, h.step)?;
    }
    Ok(())
}

fn certify_checks(r: &SolveResult, p: &ReducedProblem, checks: &mut Checks) {
    let rep = &r.report;
    checks.check(
        "converged",
        rep.converged,
        format!("kkt residual {:.3e} after {} iterations", rep.kkt_residual, rep.iterations),
    );
    checks.check("support classification", rep.misclassified == 0, format!("{} misclassified", rep.misclassified));
    let e = &rep.eta;
    checks.check(
        "multiplier signs",
        e.lower_violations + e.upper_violations + e.interior_violations == 0,
        format!("max violation {:.3e}", e.max_violation),
    );
    checks.check("admissible", r.control.is_admissible(&p.bounds), "control within bounds");
}

pub fn solve(ctx: &Ctx, a: &SolveArgs, checks: &mut Checks) -> Result<()> {
    let p = problem(ctx)?;
    let c = &ctx.run.control;
    let r = solve_problem(&p, c.kappa, c.sparsity, &ctx.run.solver, None)?;
    std::fs::write(ctx.path("report.toml"), r.report.to_toml())?;
    snapshot::save_control(&r.control, &ctx.path("control.ctrl"))?;
    snapshot::save_control(r.lambda(), &ctx.path("adjoint.ctrl"))?;
    save_field(ctx, "adjoint_0", &r.state.adjoint.states[0], a.text)?;
    save_field(ctx, "final_state", r.state.eval.trajectory.final_state(), a.text)?;
    write_support_csv(&r.control, default_support_tol(&p.bounds), ctx.create("support.csv")?)?;
    write_history(ctx, &r)?;
    println!(
        "{} kappa {:e}: objective {:.10e}, support fraction {:.4}",
        c.sparsity, c.kappa, r.report.objective, r.report.support.fraction
    );
    certify_checks(&r, &p, checks);
    Ok(())
}

fn sweep_spec(ctx: &Ctx, a: &SweepArgs, support: bool) -> Result<ExperimentSpec> {
    let mut spec = ctx.run.experiment.clone();
    if let Some(k) = &a.kappas {
        if support {
            spec.support_kappas = k.clone();
        } else {
            spec.kappas = k.clone();
        }
    }
    if a.cold {
        spec.warm_start = false;
    }
    spec.validate()?;
    Ok(spec)
}

fn fit_detail(fit: &RateFit) -> String {
    let mut s = format!("slope {:.4}, r2 {:.6}, {} points", fit.slope, fit.r2, fit.points);
    if fit.low_confidence {
        s.push_str(" (low confidence)");
    }
    s
}

pub fn kappa_sweep(ctx: &Ctx, a: &SweepArgs, checks: &mut Checks) -> Result<()> {
    let p = problem(ctx)?;
    let spec = sweep_spec(ctx, a, false)?;
    let reference = solve_reference(&p, &ctx.run.solver)?;
    checks.check("reference converged", reference.report.converged, format!("{} iterations", reference.report.iterations));
    let mut fits = BTreeMap::new();
    for &kind in &spec.kinds {
        let s = run_kappa_sweep(&p, kind, &spec, &ctx.run.solver, Some(reference.clone()))?;
        s.write_csv(ctx.create(&format!("sweep_{kind}.csv"))?)?;
        let skipped = s.points.iter().filter(|pt| !pt.report.converged).count();
        checks.check(&format!("{kind} points converged"), skipped == 0, format!("{skipped} excluded from the fit"));
        let (lo, hi) = match kind {
            SparsityKind::J1 | SparsityKind::J3 => (0.9, 1.1),
            SparsityKind::J2 => (0.6, f64::INFINITY),
            SparsityKind::None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let f = &s.fit;
        let ok = !f.degenerate && f.slope >= lo && f.slope <= hi;
        let detail = if f.degenerate { "degenerate fit".to_string() } else { fit_detail(f) };
        checks.check(&format!("{kind} rate"), ok, detail);
        fits.insert(kind.to_string(), f.clone());
    }
    std::fs::write(ctx.path("fits.toml"), toml::to_string(&fits)?)?;
    Ok(())
}

pub fn convergence(ctx: &Ctx, a: &SweepArgs, checks: &mut Checks) -> Result<()> {
    let p = problem(ctx)?;
    let spec = sweep_spec(ctx, a, false)?;
    let reference = solve_reference(&p, &ctx.run.solver)?;
    for &kind in &spec.kinds {
        let s = run_convergence_study(&p, kind, &spec, &ctx.run.solver, Some(reference.clone()))?;
        s.write_csv(ctx.create(&format!("convergence_{kind}.csv"))?)?;
        checks.check(
            &format!("{kind} convergence"),
            s.passed(1e-3),
            format!(
                "final ratio {:.3e}, gaps monotone {}, all converged {}",
                s.final_ratio, s.monotone, s.all_converged
            ),
        );
    }
    Ok(())
}

pub fn support_curve(ctx: &Ctx, a: &SweepArgs, checks: &mut Checks) -> Result<()> {
    let p = problem(ctx)?;
    let spec = sweep_spec(ctx, a, true)?;
    for &kind in &spec.kinds {
        let c = run_support_curve(&p, kind, &spec, &ctx.run.solver)?;
        c.write_csv(ctx.create(&format!("support_{kind}.csv"))?)?;
        checks.check(
            &format!("{kind} support threshold"),
            c.passed(),
            format!("M^ {:.5e}, support at 1.5 M^ {}", c.m_hat, c.threshold.fraction),
        );
    }
    Ok(())
}

pub fn second_order(ctx: &Ctx, a: &SecondOrderArgs, checks: &mut Checks) -> Result<()> {
    ensure!(a.count > 0, "need at least one direction");
    let p = problem(ctx)?;
    let c = &ctx.run.control;
    let o = options_for(&ctx.run.solver, c.sparsity);
    let mut r = solve_problem(&p, c.kappa, c.sparsity, &o, None)?;
    certify_checks(&r, &p, checks);
    let mut dirs: Vec<CriticalDirection> = Vec::new();
    for round in 0..a.rounds {
        if dirs.len() >= a.count {
            break;
        }
        let need = a.count - dirs.len();
        dirs.extend(sample_critical_cone(&p, &r, need, o.cone_tau, o.cone_k, ctx.seed.wrapping_add(round))?);
    }
    checks.check("critical directions", dirs.len() == a.count, format!("{} of {}", dirs.len(), a.count));
    checks.check("cone signs", dirs.iter().all(|d| d.sign_ok), "v >= 0 at a, v <= 0 at b");
    let probe = second_order_probe(&p, &r, &dirs, o.cone_k)?;
    let mut out = ctx.create("second_order.csv")?;
    writeln!(out, "direction,norm2,curvature,ratio,first_order")?;
    for (i, d) in dirs.iter().enumerate() {
        let (q, n2) = (probe.curvature[i], probe.norms2[i]);
        writeln!(out, "{i},{n2:?},{q:?},{:?},{:?}", q / n2, d.first_order)?;
    }
    let mut out = ctx.create("growth.csv")?;
    writeln!(out, "direction,t,increase,required")?;
    for g in &probe.growth {
        writeln!(out, "{},{:?},{:?},{:?}", g.direction, g.t, g.increase, g.required)?;
    }
    let sum = probe.summary();
    checks.check("second-order necessary condition", sum.snc_holds, format!("min J''v^2 {:.3e}", sum.min_curvature));
    checks.check("quadratic growth", sum.growth_holds, format!("mu^ {:.3e}, t0 {:e}", sum.mu_hat, sum.t0));
    r.report.second_order = Some(sum);
    std::fs::write(ctx.path("report.toml"), r.report.to_toml())?;
    Ok(())
}
