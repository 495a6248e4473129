//! Time-sampled control fields on the physical grid.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Box constraints `a_i <= u_i <= b_i` per component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Bounds {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(lower[i] <= 0.0 && upper[i] > 0.0) {
                return Err(Error::config(
                    format!("control.lower/upper[{i}]"),
                    format!(
                        "admissible set requires a_i <= 0 < b_i, got a={} b={}",
                        lower[i], upper[i]
                    ),
                ));
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn symmetric(b: f64) -> Self {
        Bounds {
            lower: [-b; 3],
            upper: [b; 3],
        }
    }

    pub fn unbounded() -> Self {
        Self::symmetric(f64::INFINITY)
    }

    #[inline]
    pub fn clip(&self, comp: usize, v: f64) -> f64 {
        v.max(self.lower[comp]).min(self.upper[comp])
    }

    /// Largest finite bound magnitude, 1 when unbounded.
    pub fn scale(&self) -> f64 {
        let m = self
            .lower
            .iter()
            .chain(self.upper.iter())
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }
}

/// Piecewise-constant-in-time vector field: `values` on step interval `[t_n, t_{n+1})`.
///
/// Layout: `values[(n * 3 + comp) * N + x]` with `N` grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlField {
    grid: Grid,
    steps: usize,
    dt: f64,
    values: Vec<f64>,
}

impl ControlField {
    pub fn zeros(grid: &Grid, steps: usize, dt: f64) -> Self {
        ControlField {
            grid: grid.clone(),
            steps,
            dt,
            values: vec![0.0; steps * 3 * grid.len()],
        }
    }

    /// Sample `f(x, t_n, comp)` at the left endpoint of every interval.
    pub fn from_fn(grid: &Grid, steps: usize, dt: f64, f: impl Fn([f64; 3], f64, usize) -> f64) -> Self {
        let mut u = Self::zeros(grid, steps, dt);
        let n = grid.len();
        for s in 0..steps {
            let t = s as f64 * dt;
            for c in 0..3 {
                for x in 0..n {
                    u.values[(s * 3 + c) * n + x] = f(grid.point(x), t, c);
                }
            }
        }
        u
    }

    pub fn from_values(grid: &Grid, steps: usize, dt: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != steps * 3 * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} control values, got {}",
                steps * 3 * grid.len(),
                values.len()
            )));
        }
        Ok(ControlField {
            grid: grid.clone(),
            steps,
            dt,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn points(&self) -> usize {
        self.grid.len()
    }

    /// Quadrature weight of one node, `dV * dt`.
    pub fn node_weight(&self) -> f64 {
        self.grid.cell_volume() * self.dt
    }

    /// Measure of the space-time cylinder.
    pub fn cylinder_volume(&self) -> f64 {
        self.grid.volume() * self.dt * self.steps as f64
    }

    #[inline]
    pub fn index(&self, step: usize, comp: usize, point: usize) -> usize {
        (step * 3 + comp) * self.grid.len() + point
    }

    #[inline]
    pub fn get(&self, step: usize, comp: usize, point: usize) -> f64 {
        self.values[self.index(step, comp, point)]
    }

    /// The three component slices of interval `step`.
    pub fn slice(&self, step: usize) -> [&[f64]; 3] {
        let n = self.grid.len();
        let base = step * 3 * n;
        [
            &self.values[base..base + n],
            &self.values[base + n..base + 2 * n],
            &self.values[base + 2 * n..base + 3 * n],
        ]
    }

    pub fn same_shape(&self, other: &ControlField) -> Result<()> {
        if self.grid != other.grid || self.steps != other.steps || self.dt != other.dt {
            return Err(Error::ShapeMismatch("control fields live on different grids".into()));
        }
        Ok(())
    }

    /// `L^2(Q)` pairing `sum_n dt sum_x dV u . v`.
    pub fn inner(&self, other: &ControlField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.node_weight()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, a: f64) -> ControlField {
        self.map(|v| a * v)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ControlField {
        ControlField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ControlField) {
        self.values
            .iter_mut()
            .zip(&x.values)
            .for_each(|(s, v)| *s += a * v);
    }

    pub fn add(&self, other: &ControlField) -> ControlField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &ControlField) -> ControlField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Component index of a flat value index.
    #[inline]
    pub fn comp_of(&self, flat: usize) -> usize {
        (flat / self.grid.len()) % 3
    }

    pub fn is_admissible(&self, bounds: &Bounds) -> bool {
        self.values.iter().enumerate().all(|(i, &v)| {
            let c = self.comp_of(i);
            v >= bounds.lower[c] && v <= bounds.upper[c]
        })
    }

    pub fn project(&self, bounds: &Bounds) -> ControlField {
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v = bounds.clip(self.comp_of(i), *v);
        }
        out
    }
}
