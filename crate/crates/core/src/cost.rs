//! Tracking functionals `int_0^T g(t, y(t)) dt`.
//!
//! Time integrals use the right-endpoint rule `sum_{n=1}^M dt g(t_n, y^n)`: `y^n` is the first
//! state that depends on control interval `n - 1`, so the initial state (fixed data) never
//! enters and the discrete gradient pairs each interval with the adjoint at its left node.

use crate::config::{CostKind, ProblemConfig};
use crate::control::ControlField;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::forward::Trajectory;

#[derive(Clone, Debug)]
pub struct CostFunctional {
    pub kind: CostKind,
    pub weight: f64,
    /// Target at every time node `0 ..= M`.
    pub targets: Vec<SpectralField>,
    pub dt: f64,
}

impl CostFunctional {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        let grid = cfg.build_grid()?;
        let (m, dt, t) = (cfg.time.steps, cfg.dt(), cfg.time.final_time);
        let targets = (0..=m)
            .map(|n| cfg.cost.target.build(&grid, n as f64 * dt, t))
            .collect::<Result<Vec<_>>>()?;
        if targets.iter().any(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        Ok(CostFunctional {
            kind: cfg.cost.kind,
            weight: cfg.cost.weight,
            targets,
            dt,
        })
    }

    pub fn steps(&self) -> usize {
        self.targets.len() - 1
    }

    /// `g(t_n, y)`
    pub fn g(&self, n: usize, y: &SpectralField) -> f64 {
        let e = y.sub(&self.targets[n]);
        match self.kind {
            CostKind::QuadraticTracking => 0.5 * self.weight * e.inner(&e),
            CostKind::GradientTracking => self.weight * e.inner_weighted(&e, |k2| k2),
        }
    }

    /// `g_y(t_n, y)` as an `L^2` representative.
    pub fn g_prime(&self, n: usize, y: &SpectralField) -> SpectralField {
        self.g_second(&y.sub(&self.targets[n]))
    }

    /// `g_yy z` (the functional is quadratic, so this does not depend on the state).
    pub fn g_second(&self, z: &SpectralField) -> SpectralField {
        match self.kind {
            CostKind::QuadraticTracking => z.scale(self.weight),
            CostKind::GradientTracking => {
                let w = 2.0 * self.weight;
                z.map_symbol(|k2| w * k2)
            }
        }
    }

    pub fn check(&self, traj: &Trajectory) -> Result<()> {
        if traj.len() != self.targets.len() || traj.model().dt() != self.dt {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} nodes, cost expects {}",
                traj.len(),
                self.targets.len()
            )));
        }
        if traj.grid() != self.targets[0].grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `sum_{n=1}^M dt g(t_n, y^n)`
    pub fn tracking(&self, traj: &Trajectory) -> Result<f64> {
        self.check(traj)?;
        Ok((1..traj.len()).map(|n| self.dt * self.g(n, traj.state(n))).sum())
    }

    /// Trajectory-level `g_y`, zero at the initial node.
    pub fn g_prime_all(&self, traj: &Trajectory) -> Vec<SpectralField> {
        (0..traj.len())
            .map(|n| {
                if n == 0 {
                    SpectralField::zeros(traj.grid())
                } else {
                    self.g_prime(n, traj.state(n))
                }
            })
            .collect()
    }
}

/// `(gamma/2) |u|^2_{L^2(Q)}`
pub fn tikhonov(u: &ControlField, gamma: f64) -> f64 {
    0.5 * gamma * u.inner(u)
}

/// Smooth part of the objective: tracking plus Tikhonov.
pub fn cost_eval(traj: &Trajectory, u: &ControlField, cost: &CostFunctional, gamma: f64) -> Result<f64> {
    traj.model().check_control(u)?;
    Ok(cost.tracking(traj)? + tikhonov(u, gamma))
}
