//! Weakly compressible Navier-Stokes on a fixed disordered node set,
//! benchmarked against the Taylor-Green vortex.
//!
//! Conservative form with the barotropic pressure folded into the
//! momentum equation:
//!
//! ```text
//! d rho / dt    = -div(rho u)
//! d(rho u_i)/dt = -div(rho u_i u) - (1/Ma^2) d rho/dx_i + (1/Re) lap(u_i)
//! ```
//!
//! The node set is Eulerian, so every operator's stencil weights are
//! computed once and reused for the whole run. Time stepping is explicit
//! three-stage SSP Runge-Kutta followed by a hyperviscous dealiasing
//! filter applied to density and momenta.

mod solver;
mod tgv;

pub use solver::{
    dump_snapshot, initialize, run_tgv, run_tgv_with, step, write_error_series, FlowState,
    NodeOperators, SolverConfig, TgvSample,
};
pub use tgv::tgv_exact;
