//! Mesh-free discrete differential operators on disordered point clouds.
//!
//! Every operator in this crate is expressed in the common difference form
//!
//! ```text
//! L(phi)_i = sum_j (phi_j - phi_i) * w_ji
//! ```
//!
//! where the sum runs over the neighbors of node `i` and the stencil weights
//! `w_ji` come from one of three providers:
//!
//! - [`classical`] — SPH kernel weights (quintic spline, Wendland C2; gradient
//!   and Morris Laplacian) and LABFM weights obtained from a per-stencil
//!   linear solve over anisotropic basis functions,
//! - [`nemdo`] — a graph network mapping normalized stencil geometry to
//!   weights, trained self-supervised on Taylor moment residuals.
//!
//! [`diagnostics`] evaluates any provider with moment tables, convergence
//! studies, global-operator spectra, modal response curves and a timing
//! harness; [`pde`] runs the Taylor-Green vortex with provider-supplied
//! operators.

pub mod classical;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod nemdo;
pub mod pde;
pub mod taylor;

pub use error::{Error, Result};
