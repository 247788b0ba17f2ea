//! Mixed finite elements for steady incompressible flow in a channel whose
//! inlet and outlet sections are periodic and whose flow is driven by a
//! prescribed pressure-loss coefficient `lambda`.
//!
//! Velocity is approximated by continuous quadratics and pressure by
//! continuous linears on a structured triangulation. Velocity is periodic
//! between the sections; pressure is not, and the drop `p(1, y) - p(0, y) = -lambda`
//! emerges from the solve.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod constraints;
pub mod dofs;
pub mod element;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod mms;
pub mod problem;
pub mod quadrature;
pub mod run;
pub mod solver;
pub mod sparse;
pub mod vtk;

pub use config::{ReportKind, RunConfig};
pub use constraints::{apply_constraints, expand_solution, ConstraintSet, PressureGauge, ReducedSystem};
pub use dofs::DofMap;
pub use error::{Error, Result};
pub use geometry::{ChannelGeometry, WallProfile};
pub use mesh::{build_channel_mesh, mesh_quality_report, BoundaryTag, Mesh, QualityReport};
pub use problem::Discretization;
pub use solver::{
    solve, solve_linear_saddle, solve_navier_stokes, solve_stokes, Diagnostics, FieldSolution, ProblemKind,
    SolveOptions,
};
pub use run::{run, run_sweep, RunMode, RunReport};
pub use sparse::CsrMatrix;
