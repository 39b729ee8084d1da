//! Static, spherically symmetric boson-fermion stars in scalar-tensor gravity
//! with a massive dilaton.
//!
//! The star radius `R_s` and boson frequency `Omega` are unknown, so the field
//! equations form a two-parameter nonlinear spectral problem. It is solved by
//! a damped (continuous-analogue) Newton iteration; each linearization is
//! discretized with cubic Hermite spline collocation at two Gauss points per
//! subinterval, giving fourth-order accuracy.
//!
//! Modules:
//! - [`model`]: coupling functions, equation of state, stress tensors, the
//!   scaled right-hand side `F` and its analytic Jacobian
//! - [`mesh`]: grids on `[0, X_inf]` with a node pinned at `x = 1`
//! - [`collocation`]: splines, almost block diagonal assembly and solve
//! - [`canm`]: the outer Newton iteration
//! - [`diagnostics`]: Runge order, far-field decay and first-integral checks

pub mod banded;
pub mod canm;
pub mod collocation;
mod error;
pub mod diagnostics;
pub mod mesh;
pub mod model;

pub use error::{CollocationError, DiagnosticsError, MeshError, ModelError, SolveError};

pub type Vec3 = [f64; 3];

pub mod prelude {
    pub use crate::canm::{
        default_initial_guess, solve, FieldState, InitialGuess, SolveOptions, SolveReport, Termination,
    };
    pub use crate::collocation::SplineFunction;
    pub use crate::mesh::{build_grid, Grading, Grid};
    pub use crate::model::{PhysicalParams, SpectralPair, StarModel};
}
