//! Numerical laboratory for a curvature/director energy on closed plane curves.
//!
//! The energy of a closed curve `gamma` carrying a director field `eta` is
//!
//! ```text
//! E_LM(gamma, eta) = 1/2 \oint (kappa + delta div eta)^2 ds + lambda/2 \oint |grad eta|^2 ds + L(gamma)
//! ```
//!
//! Modules:
//! - [`geometry`]: sampled curves, frames, curvature, resampling, surface operators.
//! - [`energy`]: energy evaluation, the lower bound, the circle minimizer, a-priori bounds.
//! - [`variation`]: first variations and the gradient-flow velocities.
//! - [`evolve`]: gradient flow, constraint projection, minimization, seed states.
//! - [`verify`]: finite-difference, invariance, convergence and trajectory audits.
//! - [`io`]: state files, diagnostics tables and run manifests.

pub mod energy;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod io;
pub mod spline;
pub mod variation;
pub mod verify;

pub use energy::{CircleMinimizer, EnergyBreakdown};
pub use error::{Error, Result};
pub use geometry::{CurveState, DirectorField, ModelParams, Vec2};
