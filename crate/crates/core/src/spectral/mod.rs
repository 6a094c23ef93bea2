//! Periodic-box Fourier machinery.
//!
//! Conventions: forward transforms carry `1/M^3`, so coefficients are mode
//! amplitudes and Parseval reads `||f||_2^2 = L^3 sum_k |fhat(k)|^2`. First
//! derivatives zero the Nyquist component; the Laplacian and the Leray
//! projection use the full wavenumber.

mod fft;
mod field;
mod grid;
mod ops;

pub use field::{PhysicalField, PhysicalScalar, SpectralField, SpectralScalar};
pub use grid::{Grid, Padding};
pub use ops::{
    curl, dealias, dealias_in_place, divergence, divergence_residual, grad_norm_sq, gradient,
    inner, laplacian, leray_project, leray_project_in_place, lp_integral, lp_norm,
    make_hermitian, norm_sq, scalar_backward, scalar_forward, scalar_gradient,
    spectral_derivative, transform_backward, transform_forward, Derivative, DerivativeKind,
};

pub(crate) use ops::{backward_many, forward_many, odd_wavenumber, pow_half};

pub use rustfft::num_complex::Complex64;
