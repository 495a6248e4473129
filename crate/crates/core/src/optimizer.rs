//! Outer iterations for `min_{u in U_ab} J(u) + kappa j(u)`, first-order certificates and
//! second-order probes on the critical cone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{ProblemConfig, SparsityKind};
use crate::control::ControlField;
use crate::error::{Error, Result};
use crate::sensitivity::{GradientEval, ReducedProblem};
use crate::sparsity::{
    default_support_tol, directional_derivative, j_value, kkt_fixed_point, prox_step, sigma_j2, subgradient,
    support_stats, SupportStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PROX_GRAD")]
    ProxGrad,
    #[serde(rename = "FIXED_POINT")]
    FixedPoint,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "PROX_GRAD" => Ok(Method::ProxGrad),
            "FIXED_POINT" => Ok(Method::FixedPoint),
            _ => Err(Error::config("solver.method", format!("unknown method `{s}`"))),
        }
    }
}

/// Solver settings (`[solver]` section of a run file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once the projection-formula residual `|u - u_next|_{L^2(Q)}` drops below this.
    pub kkt_tol: f64,
    /// Initial proximal step; `0` selects `1 / gamma`.
    pub step0: f64,
    /// Backtracking factor `beta`.
    pub backtrack: f64,
    /// Sufficient-decrease constant `c`: accept when
    /// `f(x+) <= f(y) + <grad f(y), x+ - y> + (c / s) |x+ - y|^2`.
    pub sufficient: f64,
    /// Monotone Nesterov momentum on top of the proximal step.
    pub accelerate: bool,
    /// Initial damping of the fixed-point iteration.
    pub omega: f64,
    /// Give up once the damping falls below this.
    pub omega_min: f64,
    /// Amplitude of a random initial control (0 starts from `u = 0`).
    pub init_amplitude: f64,
    pub seed: u64,
    /// Critical-cone sampling: number of directions, truncation level `k`, and the cone test
    /// tolerance relative to `|grad J(u)|`.
    pub cone_count: usize,
    pub cone_k: f64,
    pub cone_tau: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::ProxGrad,
            max_iters: 5000,
            kkt_tol: 1e-10,
            step0: 0.0,
            backtrack: 0.5,
            sufficient: 0.5,
            accelerate: true,
            omega: 0.5,
            omega_min: 1e-8,
            init_amplitude: 0.0,
            seed: 0,
            cone_count: 20,
            cone_k: 10.0,
            cone_tau: 1e-3,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self, kind: SparsityKind) -> Result<()> {
        if !(self.kkt_tol > 0.0) {
            return Err(Error::config("solver.kkt_tol", "must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::config("solver.backtrack", "must lie in (0, 1)"));
        }
        if !(self.sufficient > 0.0 && self.sufficient < 1.0) {
            return Err(Error::config("solver.sufficient", "must lie in (0, 1)"));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::config("solver.omega", "must lie in (0, 1]"));
        }
        if self.step0 < 0.0 {
            return Err(Error::config("solver.step0", "must be non-negative"));
        }
        if !(self.cone_k >= 1.0) {
            return Err(Error::config("solver.cone_k", "must be at least 1"));
        }
        if self.method == Method::ProxGrad && kind == SparsityKind::J2 {
            return Err(Error::config(
                "solver.method",
                "PROX_GRAD needs a proximal map, which J2 lacks; use FIXED_POINT",
            ));
        }
        Ok(())
    }
}

/// Per-iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportSummary {
    pub tol: f64,
    pub fraction: f64,
    pub point_fraction: f64,
    pub per_time_min: f64,
    pub per_time_max: f64,
    pub time_varying_points: usize,
}

impl From<&SupportStats> for SupportSummary {
    fn from(s: &SupportStats) -> Self {
        SupportSummary {
            tol: s.tol,
            fraction: s.fraction,
            point_fraction: s.point_fraction,
            per_time_min: s.per_time.iter().cloned().fold(f64::INFINITY, f64::min),
            per_time_max: s.per_time.iter().cloned().fold(0.0, f64::max),
            time_varying_points: s.time_varying_points,
        }
    }
}

/// Sign structure of `eta = lambda + gamma u + kappa zeta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaSummary {
    pub tol: f64,
    /// Largest amount by which a sign condition fails (0 if none).
    pub max_violation: f64,
    /// Nodes failing `eta >= -tol` at the lower bound.
    pub lower_violations: usize,
    /// Nodes failing `eta <= tol` at the upper bound.
    pub upper_violations: usize,
    /// Interior nodes with `|eta| > tol`.
    pub interior_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondOrderSummary {
    pub directions: usize,
    pub min_curvature: f64,
    pub mu_hat: f64,
    pub snc_holds: bool,
    pub growth_holds: bool,
    pub t0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub kind: SparsityKind,
    pub method: Method,
    pub kappa: f64,
    pub gamma: f64,
    pub objective: f64,
    pub tracking: f64,
    pub tikhonov: f64,
    /// `kappa j(u)`
    pub sparsity: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Nodes violating `u_i = 0 <=> |lambda_i| <= kappa sigma` (group norms for J3).
    pub misclassified: usize,
    pub formula_defect: f64,
    pub support: SupportSummary,
    pub eta: EtaSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_order: Option<SecondOrderSummary>,
}

impl OptimalityReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }
}

/// A solve: final control, its costate, the report and the iteration history.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub control: ControlField,
    pub state: GradientEval,
    pub report: OptimalityReport,
    pub history: Vec<IterRecord>,
}

impl SolveResult {
    pub fn lambda(&self) -> &ControlField {
        &self.state.lambda
    }
}

fn effective_kind(kappa: f64, kind: SparsityKind) -> SparsityKind {
    if kappa == 0.0 {
        SparsityKind::None
    } else {
        kind
    }
}

fn initial_control(problem: &ReducedProblem, opts: &SolveOptions) -> ControlField {
    let u = problem.zero_control();
    if opts.init_amplitude == 0.0 {
        return u;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    u.map(|_| opts.init_amplitude * rng.gen_range(-1.0..1.0))
        .project(&problem.bounds)
}

/// Solve `(P_kappa)` from `u = 0` (or `warm`, projected onto the box).
pub fn solve_problem(
    problem: &ReducedProblem,
    kappa: f64,
    kind: SparsityKind,
    opts: &SolveOptions,
    warm: Option<&ControlField>,
) -> Result<SolveResult> {
    opts.validate(kind)?;
    if !(kappa >= 0.0) {
        return Err(Error::config("control.kappa", "must be non-negative"));
    }
    let kind_eff = effective_kind(kappa, kind);
    let u0 = match warm {
        Some(w) => w.project(&problem.bounds),
        None => initial_control(problem, opts),
    };
    let (u, g, iters, converged, history) = match opts.method {
        Method::ProxGrad => prox_grad(problem, kappa, kind_eff, opts, u0)?,
        Method::FixedPoint => fixed_point(problem, kappa, kind_eff, opts, u0)?,
    };
    let report = certify(problem, &u, &g, kappa, kind, opts, iters, converged)?;
    Ok(SolveResult {
        control: u,
        state: g,
        report,
        history,
    })
}

/// Solve the configured problem.
pub fn solve(cfg: &ProblemConfig, opts: &SolveOptions) -> Result<SolveResult> {
    let problem = ReducedProblem::from_config(cfg)?;
    solve_problem(&problem, cfg.control.kappa, cfg.control.sparsity, opts, None)
}

type Outcome = (ControlField, GradientEval, usize, bool, Vec<IterRecord>);

/// Relative tolerance on objective comparisons; below it differences are round-off.
pub const MONOTONE_SLACK: f64 = 1e-12;

fn full_objective(g: &GradientEval, u: &ControlField, kappa: f64, kind: SparsityKind) -> f64 {
    g.eval.value() + kappa * j_value(u, kind)
}

fn residual(problem: &ReducedProblem, u: &ControlField, g: &GradientEval, kappa: f64, kind: SparsityKind) -> Result<f64> {
    Ok(kkt_fixed_point(u, &g.lambda, kappa, problem.gamma, &problem.bounds, kind)?.residual)
}

fn prox_grad(problem: &ReducedProblem, kappa: f64, kind: SparsityKind, opts: &SolveOptions, u0: ControlField) -> Result<Outcome> {
    let mut s = if opts.step0 > 0.0 { opts.step0 } else { 1.0 / problem.gamma };
    let mut x = u0;
    let mut gx = problem.gradient(&x)?;
    let mut fx = full_objective(&gx, &x, kappa, kind);
    let mut history = Vec::new();
    // extrapolated point and its gradient
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut t = 1.0f64;
    for iter in 0..opts.max_iters {
        let r = residual(problem, &x, &gx, kappa, kind)?;
        history.push(IterRecord {
            iter,
            objective: fx,
            residual: r,
            step: s,
        });
        if r <= opts.kkt_tol {
            return Ok((x, gx, iter, true, history));
        }
        // backtracking on the smooth part at y
        let fy = gy.eval.value();
        let (z, gz_eval) = loop {
            let mut w = y.clone();
            w.axpy(-s, &gy.gradient);
            let z = prox_step(&w, s, kappa, &problem.bounds, kind)?;
            let d = z.sub(&y);
            let dd = d.inner(&d);
            let ev = problem.evaluate(&z)?;
            let bound = fy + gy.gradient.inner(&d) + opts.sufficient / s * dd;
            if ev.value() <= bound + MONOTONE_SLACK * fy.abs().max(1.0) || dd == 0.0 {
                break (z, ev);
            }
            s *= opts.backtrack;
            if s < 1e-16 / problem.gamma {
                return Err(Error::Unsupported("step size underflow in backtracking".into()));
            }
        };
        let fz = gz_eval.value() + kappa * j_value(&z, kind);
        let slack = MONOTONE_SLACK * fx.abs().max(1.0);
        if !opts.accelerate {
            if fz <= fx + slack {
                gx = problem.gradient_at(&z, gz_eval)?;
                x = z;
                fx = fz;
            }
            y = x.clone();
            gy = gx.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz <= fx + slack {
            // momentum from the accepted step
            let gz = problem.gradient_at(&z, gz_eval)?;
            let mut ynew = z.clone();
            ynew.axpy((t - 1.0) / t_next, &z.sub(&x));
            let ynew = ynew.project(&problem.bounds);
            // gradient-mapping restart: the step z - y turned against the last move
            let restart = y.sub(&z).inner(&z.sub(&x)) > 0.0;
            x = z;
            gx = gz;
            fx = fz;
            if restart {
                y = x.clone();
                gy = gx.clone();
                t = 1.0;
            } else if ynew == x {
                y = x.clone();
                gy = gx.clone();
                t = t_next;
            } else {
                gy = problem.gradient(&ynew)?;
                y = ynew;
                t = t_next;
            }
        } else {
            // the extrapolated step did not decrease the objective: restart from x
            y = x.clone();
            gy = gx.clone();
            t = 1.0;
        }
    }
    Ok((x, gx, opts.max_iters, false, history))
}

fn fixed_point(problem: &ReducedProblem, kappa: f64, kind: SparsityKind, opts: &SolveOptions, u0: ControlField) -> Result<Outcome> {
    let mut u = u0;
    let mut g = problem.gradient(&u)?;
    let mut k = kkt_fixed_point(&u, &g.lambda, kappa, problem.gamma, &problem.bounds, kind)?;
    let mut omega = opts.omega;
    let mut history = Vec::new();
    for iter in 0..opts.max_iters {
        history.push(IterRecord {
            iter,
            objective: full_objective(&g, &u, kappa, kind),
            residual: k.residual,
            step: omega,
        });
        if k.residual <= opts.kkt_tol {
            // damping leaves O(residual) dust where the image is exactly zero; the image
            // itself is the cleaner answer when it is at least as converged
            let gn = problem.gradient(&k.u_next)?;
            let kn = kkt_fixed_point(&k.u_next, &gn.lambda, kappa, problem.gamma, &problem.bounds, kind)?;
            if kn.residual <= k.residual {
                return Ok((k.u_next, gn, iter, true, history));
            }
            return Ok((u, g, iter, true, history));
        }
        loop {
            let mut cand = u.scale(1.0 - omega);
            cand.axpy(omega, &k.u_next);
            let gc = problem.gradient(&cand)?;
            let kc = kkt_fixed_point(&cand, &gc.lambda, kappa, problem.gamma, &problem.bounds, kind)?;
            if kc.residual <= k.residual {
                u = cand;
                g = gc;
                k = kc;
                break;
            }
            omega *= 0.5;
            if omega < opts.omega_min {
                return Ok((u, g, iter, false, history));
            }
        }
    }
    Ok((u, g, opts.max_iters, false, history))
}

/// `eta = lambda + gamma u + kappa zeta` with `zeta in dj(u)` from the projection formulas.
pub fn eta_field(
    u: &ControlField,
    lambda: &ControlField,
    zeta: Option<&ControlField>,
    kappa: f64,
    gamma: f64,
) -> ControlField {
    let mut eta = lambda.clone();
    eta.axpy(gamma, u);
    if let Some(z) = zeta {
        eta.axpy(kappa, z);
    }
    eta
}

/// Check the sign structure of `eta`: `>= -tol` at `u = a`, `<= tol` at `u = b`, `|eta| <= tol`
/// elsewhere. Nodes within `bound_tol` of a bound count as being on it.
pub fn check_eta(u: &ControlField, eta: &ControlField, bounds: &crate::control::Bounds, tol: f64, bound_tol: f64) -> EtaSummary {
    let mut s = EtaSummary {
        tol,
        max_violation: 0.0,
        lower_violations: 0,
        upper_violations: 0,
        interior_violations: 0,
    };
    for (i, (&uv, &e)) in u.values().iter().zip(eta.values()).enumerate() {
        let c = u.comp_of(i);
        if uv <= bounds.lower[c] + bound_tol {
            if e < -tol {
                s.lower_violations += 1;
                s.max_violation = s.max_violation.max(-e);
            }
        } else if uv >= bounds.upper[c] - bound_tol {
            if e > tol {
                s.upper_violations += 1;
                s.max_violation = s.max_violation.max(e);
            }
        } else if e.abs() > tol {
            s.interior_violations += 1;
            s.max_violation = s.max_violation.max(e.abs());
        }
    }
    s
}

/// Nodes violating the support characterisation at tolerance `tol`.
pub fn support_misclassified(
    u: &ControlField,
    lambda: &ControlField,
    kappa: f64,
    gamma: f64,
    kind: SparsityKind,
    tol: f64,
) -> usize {
    let npts = u.points();
    let steps = u.steps();
    let mut bad = 0;
    let mut check = |zero: bool, lam: f64, thr: f64| {
        if (zero && lam > thr + tol) || (!zero && lam < thr - gamma * tol) {
            bad += 1;
        }
    };
    match kind {
        SparsityKind::None => {}
        SparsityKind::J1 | SparsityKind::J2 => {
            let sig = if kind == SparsityKind::J2 {
                sigma_j2(u)
            } else {
                vec![[1.0; 3]; steps]
            };
            for (i, (&uv, &lv)) in u.values().iter().zip(lambda.values()).enumerate() {
                let n = i / (3 * npts);
                let c = (i / npts) % 3;
                check(uv.abs() <= tol, lv.abs(), kappa * sig[n][c]);
            }
        }
        SparsityKind::J3 => {
            let dt = u.dt();
            for c in 0..3 {
                for x in 0..npts {
                    let un: f64 = (0..steps).map(|n| u.get(n, c, x).powi(2)).sum::<f64>() * dt;
                    let ln: f64 = (0..steps).map(|n| lambda.get(n, c, x).powi(2)).sum::<f64>() * dt;
                    check(un.sqrt() <= tol, ln.sqrt(), kappa);
                }
            }
        }
    }
    bad
}

#[allow(clippy::too_many_arguments)]
fn certify(
    problem: &ReducedProblem,
    u: &ControlField,
    g: &GradientEval,
    kappa: f64,
    kind: SparsityKind,
    opts: &SolveOptions,
    iterations: usize,
    converged: bool,
) -> Result<OptimalityReport> {
    let kind_eff = effective_kind(kappa, kind);
    let kkt = kkt_fixed_point(u, &g.lambda, kappa, problem.gamma, &problem.bounds, kind_eff)?;
    let (zeta, defect) = if kind_eff == SparsityKind::None {
        (None, 0.0)
    } else {
        let z = subgradient(u, &g.lambda, kappa, kind_eff)?;
        (Some(z.values), z.formula_defect)
    };
    let eta = eta_field(u, &g.lambda, zeta.as_ref(), kappa, problem.gamma);
    let tol = 10.0 * opts.kkt_tol;
    let eta_summary = check_eta(u, &eta, &problem.bounds, tol, tol);
    let stol = default_support_tol(&problem.bounds);
    let support = support_stats(u, stol);
    Ok(OptimalityReport {
        kind,
        method: opts.method,
        kappa,
        gamma: problem.gamma,
        objective: full_objective(g, u, kappa, kind_eff),
        tracking: g.eval.tracking,
        tikhonov: g.eval.tikhonov,
        sparsity: kappa * j_value(u, kind_eff),
        kkt_residual: kkt.residual,
        iterations,
        converged,
        misclassified: support_misclassified(u, &g.lambda, kappa, problem.gamma, kind_eff, 1e-8),
        formula_defect: defect,
        support: (&support).into(),
        eta: eta_summary,
        second_order: None,
    })
}

/// A sampled direction of the (tau-relaxed) critical cone.
#[derive(Clone, Debug)]
pub struct CriticalDirection {
    pub v: ControlField,
    /// `v >= 0` where `u = a`, `v <= 0` where `u = b`.
    pub sign_ok: bool,
    /// `J'(u) v + kappa j'(u; v)`
    pub first_order: f64,
}

/// Draw random directions and truncate them into the critical cone of `u`.
///
/// Each Gaussian draw is zeroed on the bands `a < u < a + 1/k`, `b - 1/k < u < b` and
/// `0 < |u| < 1/k`, clipped to `[-k, k]`, given the admissible sign on the bounds, and zeroed
/// where the first-order term cannot vanish (strongly active bounds, and the zero set of the
/// sparsity term, where `j` is not differentiable). Directions failing
/// `|J'(u) v + kappa j'(u; v)| <= tau |v|` are dropped.
pub fn sample_critical_cone(
    problem: &ReducedProblem,
    result: &SolveResult,
    count: usize,
    tau_rel: f64,
    k: f64,
    seed: u64,
) -> Result<Vec<CriticalDirection>> {
    let u = &result.control;
    let kappa = result.report.kappa;
    let kind = effective_kind(kappa, result.report.kind);
    let zeta = if kind == SparsityKind::None {
        None
    } else {
        Some(subgradient(u, result.lambda(), kappa, kind)?.values)
    };
    let eta = eta_field(u, result.lambda(), zeta.as_ref(), kappa, problem.gamma);
    let grad = &result.state.gradient;
    let tau = tau_rel * grad.norm().max(problem.gamma * u.norm()).max(f64::MIN_POSITIVE);
    let eta_tol = 1e-6 * eta.max_abs().max(problem.gamma);
    let bt = 1e-12 * problem.bounds.scale();
    let b = &problem.bounds;
    let band = 1.0 / k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..count {
        let mut v = u.map(|_| rng.sample::<f64, _>(StandardNormal));
        for (i, val) in v.values_mut().iter_mut().enumerate() {
            let c = u.comp_of(i);
            let uv = u.values()[i];
            let (lo, hi) = (b.lower[c], b.upper[c]);
            let at_lo = uv <= lo + bt;
            let at_hi = uv >= hi - bt;
            let near_bound = (!at_lo && uv < lo + band) || (!at_hi && uv > hi - band);
            let near_zero = uv.abs() < band;
            let sparse_zero = kind != SparsityKind::None && uv == 0.0;
            let strong = (at_lo || at_hi) && eta.values()[i].abs() > eta_tol;
            if near_bound || sparse_zero || strong || (near_zero && !at_lo && !at_hi && kind != SparsityKind::None) {
                *val = 0.0;
                continue;
            }
            *val = val.clamp(-k, k);
            if at_lo {
                *val = val.abs();
            } else if at_hi {
                *val = -val.abs();
            }
        }
        if v.max_abs() == 0.0 {
            continue;
        }
        let sign_ok = v.values().iter().enumerate().all(|(i, &x)| {
            let c = u.comp_of(i);
            let uv = u.values()[i];
            !(uv <= b.lower[c] + bt && x < 0.0) && !(uv >= b.upper[c] - bt && x > 0.0)
        });
        let first_order = grad.inner(&v) + kappa * directional_derivative(u, &v, kind)?;
        if first_order.abs() <= tau * v.norm() {
            out.push(CriticalDirection { v, sign_ok, first_order });
        }
    }
    Ok(out)
}

/// One sample of the growth inequality.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthSample {
    pub direction: usize,
    pub t: f64,
    pub increase: f64,
    pub required: f64,
}

#[derive(Clone, Debug)]
pub struct SecondOrderProbe {
    /// `J''(u) v^2` per direction.
    pub curvature: Vec<f64>,
    /// `|v|^2` per direction.
    pub norms2: Vec<f64>,
    pub mu_hat: f64,
    pub snc_holds: bool,
    pub growth: Vec<GrowthSample>,
    pub growth_holds: bool,
    pub t0: f64,
}

impl SecondOrderProbe {
    pub fn summary(&self) -> SecondOrderSummary {
        SecondOrderSummary {
            directions: self.curvature.len(),
            min_curvature: self.curvature.iter().cloned().fold(f64::INFINITY, f64::min),
            mu_hat: self.mu_hat,
            snc_holds: self.snc_holds,
            growth_holds: self.growth_holds,
            t0: self.t0,
        }
    }
}

/// Curvature `J''(u) v^2` along each direction, `mu^ = min J''(u) v^2 / |v|^2`, and the
/// growth test `F(u + t v) >= F(u) + (mu^/4) t^2 |v|^2` for `t` in `t0 * 2^-j`, `j = 0..4`,
/// where `F = J + kappa j` and `t0 = 1/k^2` keeps `u + t v` admissible.
pub fn second_order_probe(
    problem: &ReducedProblem,
    result: &SolveResult,
    directions: &[CriticalDirection],
    k: f64,
) -> Result<SecondOrderProbe> {
    let u = &result.control;
    let kappa = result.report.kappa;
    let kind = effective_kind(kappa, result.report.kind);
    let mut curvature = Vec::with_capacity(directions.len());
    let mut norms2 = Vec::with_capacity(directions.len());
    for d in directions {
        let (_, q) = problem.hessian_vec_at(&result.state, &d.v)?;
        curvature.push(q);
        norms2.push(d.v.inner(&d.v));
    }
    let mu_hat = curvature
        .iter()
        .zip(&norms2)
        .map(|(q, n)| q / n)
        .fold(f64::INFINITY, f64::min);
    let snc_holds = curvature
        .iter()
        .zip(&norms2)
        .all(|(q, n)| *q >= -1e-8 * problem.gamma * n);
    let delta = 0.5 * mu_hat;
    let t0 = 1.0 / (k * k);
    let f0 = full_objective(&result.state, u, kappa, kind);
    let mut growth = Vec::new();
    let mut growth_holds = mu_hat.is_finite();
    for (i, d) in directions.iter().enumerate() {
        for j in 0..5 {
            let t = t0 * 0.5f64.powi(j);
            let mut w = u.clone();
            w.axpy(t, &d.v);
            let ev = problem.evaluate(&w)?;
            let increase = ev.value() + kappa * j_value(&w, kind) - f0;
            let required = 0.5 * delta * t * t * norms2[i];
            if increase < required - 1e-14 * f0.abs() {
                growth_holds = false;
            }
            growth.push(GrowthSample {
                direction: i,
                t,
                increase,
                required,
            });
        }
    }
    Ok(SecondOrderProbe {
        curvature,
        norms2,
        mu_hat,
        snc_holds,
        growth,
        growth_holds,
        t0,
    })
}
