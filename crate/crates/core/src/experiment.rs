//! Experiment drivers: kappa sweeps with stability-rate fits, the kappa -> 0 convergence
//! study and support-versus-kappa curves.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::SparsityKind;
use crate::control::ControlField;
use crate::error::{Error, Result};
use crate::optimizer::{solve_problem, Method, OptimalityReport, SolveOptions, SolveResult};
#[allow(unused_imports)]
use crate::par::*;
use crate::sensitivity::ReducedProblem;
use crate::sparsity::{default_support_tol, estimate_threshold_m, j_value, support_stats};

/// `count` geometric points from `max` down to `min`.
pub fn geometric_grid(max: f64, min: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![max];
    }
    let r = (min / max).ln() / (count - 1) as f64;
    (0..count).map(|i| max * (r * i as f64).exp()).collect()
}

/// `[experiment]` section: the kappa grid and experiment switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Sweep and convergence grid; strictly decreasing, non-negative.
    pub kappas: Vec<f64>,
    /// Grid of the support curve, which has to reach past the threshold `M^`.
    pub support_kappas: Vec<f64>,
    pub kinds: Vec<SparsityKind>,
    /// Start each kappa from the previous solution.
    pub warm_start: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kappas: geometric_grid(1e-5, 1e-8, 8),
            support_kappas: geometric_grid(1.0, 1e-4, 9),
            kinds: vec![SparsityKind::J1, SparsityKind::J2, SparsityKind::J3],
            warm_start: true,
            seed: 0,
            out_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        check_grid("experiment.kappas", &self.kappas)?;
        check_grid("experiment.support_kappas", &self.support_kappas)
    }
}

fn check_grid(field: &str, kappas: &[f64]) -> Result<()> {
    if kappas.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if kappas.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
        return Err(Error::config(field, "entries must be finite and non-negative"));
    }
    if kappas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(field, "grid must be strictly decreasing toward 0"));
    }
    Ok(())
}

/// Solver options for a kind: J2 has no proximal map, so it always runs the fixed point.
pub fn options_for(opts: &SolveOptions, kind: SparsityKind) -> SolveOptions {
    let mut o = opts.clone();
    if kind == SparsityKind::J2 {
        o.method = Method::FixedPoint;
    }
    o
}

/// Log-log least-squares fit `log d = slope log kappa + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
    /// Fewer than 6 points entered the fit.
    pub low_confidence: bool,
    /// Fewer than 2 usable points (e.g. all distances zero).
    pub degenerate: bool,
}

impl RateFit {
    pub fn from_points(kappas: &[f64], distances: &[f64]) -> RateFit {
        let pts: Vec<(f64, f64)> = kappas
            .iter()
            .zip(distances)
            .filter(|(k, d)| **k > 0.0 && **d > 0.0)
            .map(|(k, d)| (k.ln(), d.ln()))
            .collect();
        let n = pts.len();
        if n < 2 {
            return RateFit {
                slope: f64::NAN,
                intercept: f64::NAN,
                r2: f64::NAN,
                points: n,
                low_confidence: true,
                degenerate: true,
            };
        }
        let nf = n as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
        RateFit {
            slope,
            intercept,
            r2,
            points: n,
            low_confidence: n < 6,
            degenerate: false,
        }
    }
}

/// One kappa of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub kappa: f64,
    /// `|u_kappa - u_0|_{L^2(Q)}`
    pub distance: f64,
    /// `J(u_kappa) - J(u_0)` (smooth part)
    pub objective_gap: f64,
    pub j_value: f64,
    pub report: OptimalityReport,
    pub control: ControlField,
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub kind: SparsityKind,
    pub reference: SolveResult,
    pub points: Vec<SweepPoint>,
    pub fit: RateFit,
}

impl Sweep {
    pub fn reference_norm(&self) -> f64 {
        self.reference.control.norm()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "kind,kappa,distance,objective_gap,j_value,objective,kkt_residual,iterations,converged,support_fraction,point_fraction,per_time_min,per_time_max"
        )?;
        for p in &self.points {
            let r = &p.report;
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{:?},{:?},{:?},{:?}",
                self.kind,
                p.kappa,
                p.distance,
                p.objective_gap,
                p.j_value,
                r.objective,
                r.kkt_residual,
                r.iterations,
                r.converged,
                r.support.fraction,
                r.support.point_fraction,
                r.support.per_time_min,
                r.support.per_time_max
            )?;
        }
        Ok(())
    }
}

/// Solve the `kappa = 0` reference problem.
pub fn solve_reference(problem: &ReducedProblem, opts: &SolveOptions) -> Result<SolveResult> {
    let mut o = opts.clone();
    o.method = Method::ProxGrad;
    solve_problem(problem, 0.0, SparsityKind::None, &o, None)
}

/// Solve `(P_kappa)` over the grid and fit `|u_kappa - u_0|` against `kappa` on the converged
/// points.
pub fn run_kappa_sweep(
    problem: &ReducedProblem,
    kind: SparsityKind,
    spec: &ExperimentSpec,
    opts: &SolveOptions,
    reference: Option<SolveResult>,
) -> Result<Sweep> {
    spec.validate()?;
    let reference = match reference {
        Some(r) => r,
        None => solve_reference(problem, opts)?,
    };
    let o = options_for(opts, kind);
    let u0 = &reference.control;
    let j0 = reference.state.eval.value();
    let results: Vec<SolveResult> = if spec.warm_start {
        let mut out: Vec<SolveResult> = Vec::with_capacity(spec.kappas.len());
        for &k in &spec.kappas {
            let warm = out.last().map(|r| r.control.clone());
            out.push(solve_problem(problem, k, kind, &o, warm.as_ref())?);
        }
        out
    } else {
        par_iter!(spec.kappas)
            .map(|&k| solve_problem(problem, k, kind, &o, None))
            .collect::<Result<Vec<_>>>()?
    };
    let points: Vec<SweepPoint> = spec
        .kappas
        .iter()
        .zip(results)
        .map(|(&kappa, r)| SweepPoint {
            kappa,
            distance: r.control.sub(u0).norm(),
            objective_gap: r.state.eval.value() - j0,
            j_value: j_value(&r.control, kind),
            report: r.report.clone(),
            control: r.control,
        })
        .collect();
    let conv: Vec<&SweepPoint> = points.iter().filter(|p| p.report.converged).collect();
    let fit = RateFit::from_points(
        &conv.iter().map(|p| p.kappa).collect::<Vec<_>>(),
        &conv.iter().map(|p| p.distance).collect::<Vec<_>>(),
    );
    Ok(Sweep {
        kind,
        reference,
        points,
        fit,
    })
}

/// Outcome of the kappa -> 0 study.
#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub sweep: Sweep,
    /// `|u_kappa_min - u_0| / |u_0|`
    pub final_ratio: f64,
    /// Objective gaps are non-increasing along the decreasing grid within `slack`.
    pub monotone: bool,
    pub slack: f64,
    pub all_converged: bool,
}

impl ConvergenceStudy {
    pub fn passed(&self, ratio_tol: f64) -> bool {
        self.all_converged && self.monotone && self.final_ratio <= ratio_tol
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "kappa,distance,relative_distance,objective_gap,support_fraction,converged")?;
        let n0 = self.sweep.reference_norm().max(f64::MIN_POSITIVE);
        for p in &self.sweep.points {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{}",
                p.kappa,
                p.distance,
                p.distance / n0,
                p.objective_gap,
                p.report.support.fraction,
                p.report.converged
            )?;
        }
        Ok(())
    }
}

pub fn run_convergence_study(
    problem: &ReducedProblem,
    kind: SparsityKind,
    spec: &ExperimentSpec,
    opts: &SolveOptions,
    reference: Option<SolveResult>,
) -> Result<ConvergenceStudy> {
    let sweep = run_kappa_sweep(problem, kind, spec, opts, reference)?;
    let slack = 1e-8;
    let monotone = sweep
        .points
        .windows(2)
        .all(|w| w[1].objective_gap <= w[0].objective_gap + slack);
    let n0 = sweep.reference_norm();
    let last = sweep.points.last().expect("nonempty grid");
    let final_ratio = if n0 > 0.0 {
        last.distance / n0
    } else if last.distance == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let all_converged = sweep.reference.report.converged && sweep.points.iter().all(|p| p.report.converged);
    Ok(ConvergenceStudy {
        sweep,
        final_ratio,
        monotone,
        slack,
        all_converged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportRow {
    pub kappa: f64,
    pub fraction: f64,
    pub point_fraction: f64,
    pub per_time_min: f64,
    pub per_time_max: f64,
    pub time_varying_points: usize,
    pub above_threshold: bool,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SupportCurve {
    pub kind: SparsityKind,
    pub m_hat: f64,
    pub rows: Vec<SupportRow>,
    /// Solve at `kappa = 1.5 M^`.
    pub threshold: SupportRow,
}

impl SupportCurve {
    /// Support vanishes at `1.5 M^` and at every grid point at or above it.
    pub fn passed(&self) -> bool {
        self.threshold.fraction == 0.0
            && self.threshold.converged
            && self
                .rows
                .iter()
                .filter(|r| r.kappa >= 1.5 * self.m_hat)
                .all(|r| r.fraction == 0.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "kind,kappa,support_fraction,point_fraction,per_time_min,per_time_max,time_varying_points,m_hat,above_threshold,converged"
        )?;
        for r in self.rows.iter().chain(std::iter::once(&self.threshold)) {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{},{:?},{},{}",
                self.kind,
                r.kappa,
                r.fraction,
                r.point_fraction,
                r.per_time_min,
                r.per_time_max,
                r.time_varying_points,
                self.m_hat,
                r.above_threshold,
                r.converged
            )?;
        }
        Ok(())
    }
}

fn support_row(problem: &ReducedProblem, r: &SolveResult, kappa: f64, m_hat: f64) -> SupportRow {
    let s = support_stats(&r.control, default_support_tol(&problem.bounds));
    SupportRow {
        kappa,
        fraction: s.fraction,
        point_fraction: s.point_fraction,
        per_time_min: s.per_time.iter().cloned().fold(f64::INFINITY, f64::min),
        per_time_max: s.per_time.iter().cloned().fold(0.0, f64::max),
        time_varying_points: s.time_varying_points,
        above_threshold: kappa >= 1.5 * m_hat,
        converged: r.report.converged,
    }
}

pub fn run_support_curve(
    problem: &ReducedProblem,
    kind: SparsityKind,
    spec: &ExperimentSpec,
    opts: &SolveOptions,
) -> Result<SupportCurve> {
    spec.validate()?;
    let m_hat = estimate_threshold_m(problem)?;
    let o = options_for(opts, kind);
    let mut rows = Vec::with_capacity(spec.support_kappas.len());
    let mut warm: Option<ControlField> = None;
    for &k in &spec.support_kappas {
        let r = solve_problem(problem, k, kind, &o, if spec.warm_start { warm.as_ref() } else { None })?;
        rows.push(support_row(problem, &r, k, m_hat));
        warm = Some(r.control);
    }
    let kt = 1.5 * m_hat;
    let rt = solve_problem(problem, kt, kind, &o, None)?;
    let threshold = support_row(problem, &rt, kt, m_hat);
    Ok(SupportCurve {
        kind,
        m_hat,
        rows,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_fit() {
        let g = geometric_grid(1.0, 1e-4, 5);
        assert_eq!(g.len(), 5);
        assert!((g[4] - 1e-4).abs() < 1e-18);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        let d: Vec<f64> = g.iter().map(|k| 3.0 * k.powf(0.8)).collect();
        let f = RateFit::from_points(&g, &d);
        assert!((f.slope - 0.8).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.low_confidence);
        assert!(RateFit::from_points(&g, &[0.0; 5]).degenerate);
    }

    #[test]
    fn spec_validation() {
        assert!(ExperimentSpec::default().validate().is_ok());
        let bad = ExperimentSpec {
            kappas: vec![0.1, 0.1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let single = ExperimentSpec {
            kappas: vec![0.0],
            ..Default::default()
        };
        assert!(single.validate().is_ok());
    }
}
