//! Pseudospectral solver for the three-dimensional MHD system with
//! Brinkman–Forchheimer damping on a periodic box, together with the
//! diagnostics and experiments used to verify its energy laws,
//! constraint propagation and long-time bounds.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: grids, transforms, derivatives, projection, dealiasing, norms.
//! - [`rhs`]: tendencies of the velocity and magnetic field, damping, pressure.
//! - [`integrator`]: integrating-factor Runge–Kutta stepping and the run loop.
//! - [`diagnostics`]: monitors, energy budget, absorbing ball, inequality checks.
//! - [`verification`]: initial conditions, manufactured solutions, experiments.
//! - [`io`]: snapshots, checkpoints and time-series files.

pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod io;
pub mod rhs;
pub mod spectral;
pub mod state;
pub mod verification;

pub use error::{Error, Result};
pub use integrator::{RkOrder, TimeControls};
pub use rhs::{Forcing, PhysParams};
pub use state::State;
pub use spectral::{Grid, Padding, PhysicalField, SpectralField};

