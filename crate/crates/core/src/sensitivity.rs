//! Exact derivatives of the discrete control-to-state map and of the reduced objective.
//!
//! With `N(y) = B~(y, F y)` and `L = (I + dt nu A) F`, a forward step is
//! `y' = L^{-1} (F y - dt N(y) + dt P u)`. Differentiating gives
//!
//! * tangent: `z' = L^{-1} (F z - dt N'(y) z + dt P k)`, `N'(y) z = B~(z, F y) + B~(y, F z)`
//! * second order: `m' = L^{-1} (F m - dt N'(y) m - dt N''(y)[z1, z2])`
//! * adjoint: `l_{n-1} = L^{-1} (F l_n - dt N'(y_n)^* l_n + dt g'(y_n))`, `l_M = 0`, with
//!   `N'(y)^* p = -B~(p, F y) + F P[(p . grad) y - (y . grad) p]`.
//!
//! The reduced gradient in the `L^2(Q)` pairing is `l_n + gamma u_n` on interval `n`.

use std::io::Write;

use crate::config::ProblemConfig;
use crate::control::{Bounds, ControlField};
use crate::cost::{tikhonov, CostFunctional};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::forward::{Model, NodeFields, Trajectory};
use crate::nonlinear::{btilde_at, commutator_at, project_pointwise, PhysicalField};

/// States of a tangent (or second-order) sweep, with their physical samples.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub states: Vec<SpectralField>,
    nodes: Vec<NodeFields>,
}

impl Tangent {
    pub fn state(&self, n: usize) -> &SpectralField {
        &self.states[n]
    }
    pub fn final_state(&self) -> &SpectralField {
        self.states.last().unwrap()
    }
}

/// Costates `l_0 .. l_M` (`l_M = 0`).
#[derive(Clone, Debug)]
pub struct AdjointTrajectory {
    pub states: Vec<SpectralField>,
}

impl AdjointTrajectory {
    /// Costate on the control nodes: interval `n` carries `l_n`.
    pub fn on_controls(&self, dt: f64) -> ControlField {
        let grid = self.states[0].grid();
        let steps = self.states.len() - 1;
        let n = grid.len();
        let mut values = Vec::with_capacity(steps * 3 * n);
        for s in &self.states[..steps] {
            for c in s.to_physical() {
                values.extend(c);
            }
        }
        ControlField::from_values(grid, steps, dt, values).expect("adjoint shape")
    }
}

/// `N'(y) z` with both operands given by their samples.
fn dn(model: &Model, y: &NodeFields, z: &NodeFields) -> SpectralField {
    project_pointwise(model.grid(), |j, x| {
        btilde_at(&z.y.vals, &y.fy.grad, j, x) + btilde_at(&y.y.vals, &z.fy.grad, j, x)
    })
}

/// `N''(y)[z1, z2] = B~(z1, F z2) + B~(z2, F z1)`
fn d2n(model: &Model, z1: &NodeFields, z2: &NodeFields) -> SpectralField {
    project_pointwise(model.grid(), |j, x| {
        btilde_at(&z1.y.vals, &z2.fy.grad, j, x) + btilde_at(&z2.y.vals, &z1.fy.grad, j, x)
    })
}

/// `sum_i (-B~(p_i, F y_i) + F P[(p_i . grad) y_i - (y_i . grad) p_i])` over pairs.
fn dn_adjoint(model: &Model, pairs: &[(&NodeFields, &PhysicalField)]) -> SpectralField {
    let g = model.grid();
    let a = project_pointwise(g, |j, x| pairs.iter().map(|(y, p)| -btilde_at(&p.vals, &y.fy.grad, j, x)).sum());
    let c = project_pointwise(g, |j, x| pairs.iter().map(|(y, p)| commutator_at(&y.y, p, j, x)).sum());
    let mut out = model.filter(&c);
    out.axpy(1.0, &a);
    out
}

fn check_base(base: &Trajectory, k: &ControlField) -> Result<()> {
    base.model().check_control(k)
}

/// `z = S'(u) k` along the base trajectory of `u`.
pub fn solve_linearized(base: &Trajectory, k: &ControlField) -> Result<Tangent> {
    check_base(base, k)?;
    let m = base.model();
    let mut states = vec![SpectralField::zeros(m.grid())];
    let mut nodes = vec![m.sample(&states[0])];
    for n in 0..m.steps() {
        let d = dn(m, base.node(n), &nodes[n]);
        let pk = m.project_slice(k.slice(n));
        let next = m.implicit_solve(&states[n], &d, Some(&pk));
        nodes.push(m.sample(&next));
        states.push(next);
    }
    Ok(Tangent { states, nodes })
}

fn check_tangent(base: &Trajectory, z: &Tangent) -> Result<()> {
    if z.states.len() != base.len() || z.states[0].grid() != base.grid() {
        return Err(Error::ShapeMismatch("tangent does not match the base trajectory".into()));
    }
    Ok(())
}

/// `m = S''(u)[k1, k2]` from the two tangents `z1 = S'(u) k1`, `z2 = S'(u) k2`.
pub fn solve_second(base: &Trajectory, z1: &Tangent, z2: &Tangent) -> Result<Tangent> {
    check_tangent(base, z1)?;
    check_tangent(base, z2)?;
    let m = base.model();
    let mut states = vec![SpectralField::zeros(m.grid())];
    let mut nodes = vec![m.sample(&states[0])];
    for n in 0..m.steps() {
        let mut b = dn(m, base.node(n), &nodes[n]);
        b.axpy(1.0, &d2n(m, &z1.nodes[n], &z2.nodes[n]));
        let next = m.implicit_solve(&states[n], &b, None);
        nodes.push(m.sample(&next));
        states.push(next);
    }
    Ok(Tangent { states, nodes })
}

/// Backward sweep with the transpose of the tangent step.
pub fn solve_adjoint(base: &Trajectory, cost: &CostFunctional) -> Result<AdjointTrajectory> {
    cost.check(base)?;
    let m = base.model();
    let steps = m.steps();
    let mut states = vec![SpectralField::zeros(m.grid()); steps + 1];
    for n in (1..=steps).rev() {
        let lam = &states[n];
        let b = if lam.is_zero() {
            SpectralField::zeros(m.grid())
        } else {
            let p = PhysicalField::of(lam);
            dn_adjoint(m, &[(base.node(n), &p)])
        };
        let r = cost.g_prime(n, base.state(n));
        states[n - 1] = m.implicit_solve(lam, &b, Some(&r));
    }
    Ok(AdjointTrajectory { states })
}

/// Derivative of the adjoint sweep along the tangent `z = S'(u) v`.
fn solve_second_adjoint(base: &Trajectory, adj: &AdjointTrajectory, z: &Tangent, cost: &CostFunctional) -> AdjointTrajectory {
    let m = base.model();
    let steps = m.steps();
    let mut states = vec![SpectralField::zeros(m.grid()); steps + 1];
    for n in (1..=steps).rev() {
        let ld = &states[n];
        let pd = PhysicalField::of(ld);
        let pl = PhysicalField::of(&adj.states[n]);
        let b = dn_adjoint(m, &[(base.node(n), &pd), (&z.nodes[n], &pl)]);
        let r = cost.g_second(&z.states[n]);
        states[n - 1] = m.implicit_solve(ld, &b, Some(&r));
    }
    AdjointTrajectory { states }
}

/// The reduced smooth objective `u -> sum dt g(y^n) + (gamma/2) |u|^2` of one configuration.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub model: Model,
    pub cost: CostFunctional,
    pub y0: SpectralField,
    pub gamma: f64,
    pub bounds: Bounds,
}

/// Objective parts and the trajectory they came from.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub tracking: f64,
    pub tikhonov: f64,
    pub trajectory: Trajectory,
}

impl Evaluation {
    pub fn value(&self) -> f64 {
        self.tracking + self.tikhonov
    }
}

/// Objective, costate and reduced gradient at one control.
#[derive(Clone, Debug)]
pub struct GradientEval {
    pub eval: Evaluation,
    pub adjoint: AdjointTrajectory,
    /// Costate on the control nodes.
    pub lambda: ControlField,
    /// `lambda + gamma u`
    pub gradient: ControlField,
}

impl ReducedProblem {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        let model = Model::from_config(cfg)?;
        let cost = CostFunctional::from_config(cfg)?;
        let y0 = cfg.initial.build(model.grid(), 0.0, cfg.time.final_time)?;
        if y0.grid() != model.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(ReducedProblem {
            model,
            cost,
            y0,
            gamma: cfg.control.gamma,
            bounds: cfg.bounds(),
        })
    }

    pub fn zero_control(&self) -> ControlField {
        ControlField::zeros(self.model.grid(), self.model.steps(), self.model.dt())
    }

    pub fn evaluate(&self, u: &ControlField) -> Result<Evaluation> {
        let trajectory = self.model.solve(u, &self.y0)?;
        Ok(Evaluation {
            tracking: self.cost.tracking(&trajectory)?,
            tikhonov: tikhonov(u, self.gamma),
            trajectory,
        })
    }

    pub fn value(&self, u: &ControlField) -> Result<f64> {
        Ok(self.evaluate(u)?.value())
    }

    pub fn gradient_at(&self, u: &ControlField, eval: Evaluation) -> Result<GradientEval> {
        let adjoint = solve_adjoint(&eval.trajectory, &self.cost)?;
        let lambda = adjoint.on_controls(self.model.dt());
        let mut gradient = lambda.clone();
        gradient.axpy(self.gamma, u);
        Ok(GradientEval {
            eval,
            adjoint,
            lambda,
            gradient,
        })
    }

    pub fn gradient(&self, u: &ControlField) -> Result<GradientEval> {
        let eval = self.evaluate(u)?;
        self.gradient_at(u, eval)
    }

    /// Hessian-vector product at the point of `g` and the quadratic form
    /// `J''(u) v^2 = sum_n dt [<g'' z_n, z_n> + <g'(y_n), m_n>] + gamma |v|^2`.
    pub fn hessian_vec_at(&self, g: &GradientEval, v: &ControlField) -> Result<(ControlField, f64)> {
        let base = &g.eval.trajectory;
        let z = solve_linearized(base, v)?;
        let zd = solve_second_adjoint(base, &g.adjoint, &z, &self.cost);
        let mut hv = zd.on_controls(self.model.dt());
        hv.axpy(self.gamma, v);
        let mm = solve_second(base, &z, &z)?;
        let dt = self.model.dt();
        let mut q = 0.0;
        for n in 1..base.len() {
            q += dt * self.cost.g_second(&z.states[n]).inner(&z.states[n]);
            q += dt * self.cost.g_prime(n, base.state(n)).inner(&mm.states[n]);
        }
        q += self.gamma * v.inner(v);
        Ok((hv, q))
    }

    pub fn hessian_vec(&self, u: &ControlField, v: &ControlField) -> Result<(ControlField, f64)> {
        let g = self.gradient(u)?;
        self.hessian_vec_at(&g, v)
    }
}

/// Reduced gradient `lambda + gamma u` for the configured problem.
pub fn reduced_gradient(u: &ControlField, cfg: &ProblemConfig) -> Result<ControlField> {
    Ok(ReducedProblem::from_config(cfg)?.gradient(u)?.gradient)
}

/// Hessian-vector product and `J''(u) v^2` for the configured problem.
pub fn hessian_vec(u: &ControlField, v: &ControlField, cfg: &ProblemConfig) -> Result<(ControlField, f64)> {
    ReducedProblem::from_config(cfg)?.hessian_vec(u, v)
}

/// One central-difference probe of the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckRow {
    pub direction: usize,
    pub h: f64,
    pub fd_value: f64,
    pub analytic_value: f64,
    pub rel_error: f64,
}

/// `(J(u + h v) - J(u - h v)) / 2h` against `<grad, v>` for every `h` and direction.
pub fn grad_check(problem: &ReducedProblem, u: &ControlField, directions: &[ControlField], hs: &[f64]) -> Result<Vec<GradCheckRow>> {
    let grad = problem.gradient(u)?.gradient;
    let mut rows = Vec::new();
    for (d, v) in directions.iter().enumerate() {
        let analytic = grad.inner(v);
        for &h in hs {
            let mut up = u.clone();
            up.axpy(h, v);
            let mut um = u.clone();
            um.axpy(-h, v);
            let fd = (problem.value(&up)? - problem.value(&um)?) / (2.0 * h);
            rows.push(GradCheckRow {
                direction: d,
                h,
                fd_value: fd,
                analytic_value: analytic,
                rel_error: (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(rows)
}

pub fn write_grad_check_csv<W: Write>(rows: &[GradCheckRow], mut out: W) -> Result<()> {
    writeln!(out, "direction,h,fd_value,analytic_value,rel_error")?;
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            r.direction, r.h, r.fd_value, r.analytic_value, r.rel_error
        )?;
    }
    Ok(())
}
