use crate::error::Result;
use crate::spectral::{norm_sq, Grid, SpectralField};

/// Velocity and magnetic coefficients plus the simulation clock.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u_hat: SpectralField,
    pub b_hat: SpectralField,
    pub t: f64,
}

impl State {
    pub fn new(u_hat: SpectralField, b_hat: SpectralField, t: f64) -> Result<Self> {
        u_hat.grid().ensure_same(b_hat.grid())?;
        Ok(State { u_hat, b_hat, t })
    }

    pub fn zeros(grid: &Grid) -> Self {
        State {
            u_hat: SpectralField::zeros(grid),
            b_hat: SpectralField::zeros(grid),
            t: 0.0,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.u_hat.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u_hat.is_finite() && self.b_hat.is_finite()
    }

    /// `||u||_2^2 + ||b||_2^2`.
    pub fn energy(&self) -> f64 {
        norm_sq(&self.u_hat) + norm_sq(&self.b_hat)
    }

    /// Largest coefficient difference over both fields.
    pub fn max_abs_diff(&self, other: &State) -> f64 {
        self.u_hat
            .max_abs_diff(&other.u_hat)
            .max(self.b_hat.max_abs_diff(&other.b_hat))
    }
}
