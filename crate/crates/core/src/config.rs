//! Problem configuration and the TOML run-file schema.
//!
//! A run file has up to eight sections; every key is optional and defaults to the
//! canonical benchmark instance:
//!
//! ```toml
//! [grid]
//! n = [8, 8, 8]                # even, >= 4
//! box_length = [6.283185307179586, 6.283185307179586, 6.283185307179586]
//! dealias = 0.6666666666666666 # keep |k_i| < dealias * n_i / 2
//!
//! [time]
//! final_time = 1.0
//! steps = 16                   # >= 2
//!
//! [physics]
//! nu = 0.5                     # > 0
//! alpha = 0.25                 # > 0
//!
//! [control]
//! gamma = 0.01                 # > 0
//! kappa = 0.0                  # >= 0
//! sparsity = "J1"              # J1 | J2 | J3 | NONE
//! lower = [-1.0, -1.0, -1.0]   # a_i <= 0
//! upper = [1.0, 1.0, 1.0]      # b_i > 0
//!
//! [cost]
//! kind = "quadratic_tracking"  # or "gradient_tracking"
//! weight = 1.0
//! target = { kind = "two_mode", amplitude = 0.5, ramp = true }
//!
//! [initial]
//! kind = "zero"                # zero | two_mode | snapshot
//!
//! [solver]                     # see optimizer::SolveOptions
//! [experiment]                 # see experiment::ExperimentSpec
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::Bounds;
use crate::error::{Error, Result};
use crate::experiment::ExperimentSpec;
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::optimizer::SolveOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SparsityKind {
    J1,
    J2,
    J3,
    #[serde(rename = "NONE")]
    None,
}

impl std::str::FromStr for SparsityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "J1" => Ok(SparsityKind::J1),
            "J2" => Ok(SparsityKind::J2),
            "J3" => Ok(SparsityKind::J3),
            "NONE" => Ok(SparsityKind::None),
            _ => Err(Error::config("control.sparsity", format!("unknown kind `{s}`"))),
        }
    }
}

impl std::fmt::Display for SparsityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SparsityKind::J1 => "J1",
            SparsityKind::J2 => "J2",
            SparsityKind::J3 => "J3",
            SparsityKind::None => "NONE",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `g(t, y) = (w/2) |y - y_Q(t)|^2`
    QuadraticTracking,
    /// `g(t, y) = w ||grad (y - y_d(t))||^2`
    GradientTracking,
}

/// Source of a velocity-type field (initial state or tracking target).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// `amplitude * s(t) * (cos(y + z), sin x, cos x)` (box-scaled wavenumbers), with
    /// `s(t) = t / T` when `ramp` is set and `s = 1` otherwise.
    TwoMode {
        amplitude: f64,
        #[serde(default)]
        ramp: bool,
    },
    /// Time-independent field read from a snapshot file.
    Snapshot { path: PathBuf },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Zero
    }
}

impl FieldSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, FieldSpec::Zero) || matches!(self, FieldSpec::TwoMode { amplitude, .. } if *amplitude == 0.0)
    }

    /// Field value at time `t` of a run ending at `final_time`.
    pub fn build(&self, grid: &Grid, t: f64, final_time: f64) -> Result<SpectralField> {
        match self {
            FieldSpec::Zero => Ok(SpectralField::zeros(grid)),
            FieldSpec::TwoMode { amplitude, ramp } => {
                let s = if *ramp { t / final_time } else { 1.0 } * amplitude;
                let a = SpectralField::trig_mode(grid, [0, 1, 1], [s, 0.0, 0.0], [0.0; 3])?;
                let b = SpectralField::trig_mode(grid, [1, 0, 0], [0.0, 0.0, s], [0.0, s, 0.0])?;
                Ok(a.add(&b))
            }
            FieldSpec::Snapshot { path } => crate::snapshot::load(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: [usize; 3],
    pub box_length: [f64; 3],
    pub dealias: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: [8; 3],
            box_length: [2.0 * PI; 3],
            dealias: 2.0 / 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub final_time: f64,
    pub steps: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            final_time: 1.0,
            steps: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub alpha: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig { nu: 0.5, alpha: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub gamma: f64,
    pub kappa: f64,
    pub sparsity: SparsityKind,
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            gamma: 1e-2,
            kappa: 0.0,
            sparsity: SparsityKind::None,
            lower: [-1.0; 3],
            upper: [1.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub kind: CostKind,
    pub weight: f64,
    pub target: FieldSpec,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            kind: CostKind::QuadraticTracking,
            weight: 1.0,
            target: FieldSpec::TwoMode {
                amplitude: 0.5,
                ramp: true,
            },
        }
    }
}

/// Discretisation, physics and objective of one optimal control problem. The default is the
/// canonical benchmark instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub physics: PhysicsConfig,
    pub control: ControlConfig,
    pub cost: CostConfig,
    pub initial: FieldSpec,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        self.build_grid()?;
        positive("time.final_time", self.time.final_time)?;
        if self.time.steps < 2 {
            return Err(Error::config("time.steps", format!("must be >= 2, got {}", self.time.steps)));
        }
        positive("physics.nu", self.physics.nu)?;
        positive("physics.alpha", self.physics.alpha)?;
        if self.control.gamma == 0.0 {
            return Err(Error::config(
                "control.gamma",
                "gamma = 0 (bang-bang regime) is not supported; gamma must be positive",
            ));
        }
        positive("control.gamma", self.control.gamma)?;
        if !(self.control.kappa >= 0.0 && self.control.kappa.is_finite()) {
            return Err(Error::config(
                "control.kappa",
                format!("must be non-negative, got {}", self.control.kappa),
            ));
        }
        Bounds::new(self.control.lower, self.control.upper)?;
        positive("cost.weight", self.cost.weight)?;
        for (name, spec) in [("cost.target", &self.cost.target), ("initial", &self.initial)] {
            if let FieldSpec::TwoMode { amplitude, .. } = spec {
                if !amplitude.is_finite() {
                    return Err(Error::config(name, "amplitude must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.box_length, self.grid.dealias)
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.control.lower,
            upper: self.control.upper,
        }
    }

    pub fn dt(&self) -> f64 {
        self.time.final_time / self.time.steps as f64
    }

    pub fn with_kappa(&self, kappa: f64, kind: SparsityKind) -> Self {
        let mut c = self.clone();
        c.control.kappa = kappa;
        c.control.sparsity = kind;
        c
    }
}

/// Everything a run file can carry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub physics: PhysicsConfig,
    pub control: ControlConfig,
    pub cost: CostConfig,
    pub initial: FieldSpec,
    pub solver: SolveOptions,
    pub experiment: ExperimentSpec,
}

impl RunConfig {
    pub fn problem(&self) -> ProblemConfig {
        ProblemConfig {
            grid: self.grid.clone(),
            time: self.time.clone(),
            physics: self.physics.clone(),
            control: self.control.clone(),
            cost: self.cost.clone(),
            initial: self.initial.clone(),
        }
    }

    pub fn set_problem(&mut self, p: ProblemConfig) {
        self.grid = p.grid;
        self.time = p.time;
        self.physics = p.physics;
        self.control = p.control;
        self.cost = p.cost;
        self.initial = p.initial;
    }

    pub fn validate(&self) -> Result<()> {
        self.problem().validate()?;
        self.solver.validate(self.control.sparsity)?;
        self.experiment.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<file>".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }
}

/// Read and validate a run file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml(&text)
}
