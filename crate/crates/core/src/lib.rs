//! Sparse distributed optimal control of the 3D viscous Camassa-Holm (LANS-alpha) equations
//! on a periodic box.
//!
//! The crate discretises the state equation pseudo-spectrally (Fourier in space, IMEX Euler in
//! time) and provides the exact discrete derivatives of the control-to-state map, the three
//! sparsity functionals with their projection-formula optimality systems, proximal and
//! fixed-point solvers, and the experiment drivers used by the `vche` command line tool.

#[macro_use]
pub mod par;

pub mod config;
pub mod control;
pub mod cost;
pub mod error;
pub mod experiment;
pub mod field;
pub mod forward;
pub mod grid;
pub mod nonlinear;
pub mod optimizer;
pub mod sensitivity;
pub mod snapshot;
pub mod sparsity;

pub use config::{CostKind, FieldSpec, ProblemConfig, RunConfig, SparsityKind};
pub use control::{Bounds, ControlField};
pub use error::{Error, Result};
pub use field::{apply_stokes, helmholtz, leray_project, norms, Norms, RawField, SpectralField};
pub use forward::{solve_forward, Model, Trajectory};
pub use grid::Grid;
pub use optimizer::{solve, Method, OptimalityReport, SolveOptions, SolveResult};
pub use sensitivity::ReducedProblem;
