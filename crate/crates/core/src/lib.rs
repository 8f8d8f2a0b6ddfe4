//! Sectional solver for the collision-induced nonlinear breakage equation.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod kernels;
pub mod quadrature;
pub mod scheme1d;
pub mod scheme2d;

pub use error::{Error, Result};
pub use grid::{Grid, GridKind, Segment};
pub use integrator::{IntegratorConfig, Method, ObservationSeries, OdeSystem};
pub use kernels::{Breakage, Collision, KernelSpec, Weight};
pub use scheme1d::{BoundaryRule, Problem1D, Scheme};
pub use analysis::DiracPlacement;

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
