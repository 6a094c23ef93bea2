use rustfft::num_complex::Complex64;

use super::grid::{Grid, Padding};
use crate::error::{Error, Result};

/// Half-spectrum Fourier coefficients of a real 3-vector field.
///
/// Coefficients are mode amplitudes (the forward transform carries `1/M^3`),
/// so `||f||_2^2 = L^3 * sum_k |fhat(k)|^2` over the full spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    comps: [Vec<Complex64>; 3],
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        let len = grid.spectral_len();
        SpectralField {
            grid: grid.clone(),
            comps: [
                vec![Complex64::default(); len],
                vec![Complex64::default(); len],
                vec![Complex64::default(); len],
            ],
        }
    }

    pub fn from_components(grid: &Grid, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        let expected = grid.spectral_len();
        for c in &comps {
            if c.len() != expected {
                return Err(Error::ShapeMismatch {
                    expected,
                    actual: c.len(),
                });
            }
        }
        Ok(SpectralField {
            grid: grid.clone(),
            comps,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn comp(&self, i: usize) -> &[Complex64] {
        &self.comps[i]
    }

    #[inline]
    pub fn comp_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.comps[i]
    }

    #[inline]
    pub fn comps(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<Complex64>; 3] {
        self.comps
    }

    /// Coefficient vector at an integer wavenumber, if stored.
    pub fn mode(&self, k: [i64; 3]) -> Option<[Complex64; 3]> {
        self.grid
            .locate(k)
            .map(|idx| [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]])
    }

    pub fn set_mode(&mut self, k: [i64; 3], value: [Complex64; 3]) -> Result<()> {
        let idx = self.grid.locate(k).ok_or(Error::ModeOutsideGrid {
            mode: k,
            n: self.grid.n(),
        })?;
        for (c, v) in self.comps.iter_mut().zip(value) {
            c[idx] = v;
        }
        Ok(())
    }

    /// Set `vhat(k) = value` and its conjugate partner `vhat(-k) = conj(value)`
    /// when the partner is stored, so the field stays real.
    pub fn set_conjugate_pair(&mut self, k: [i64; 3], value: [Complex64; 3]) -> Result<()> {
        self.set_mode(k, value)?;
        let minus = [-k[0], -k[1], -k[2]];
        if minus != k && self.grid.locate(minus).is_some() {
            self.set_mode(minus, value.map(|v| v.conj()))?;
        }
        Ok(())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        debug_assert!(self.grid == x.grid);
        for (c, xc) in self.comps.iter_mut().zip(&x.comps) {
            for (v, xv) in c.iter_mut().zip(xc) {
                *v += *xv * a;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in self.comps.iter_mut() {
            for v in c.iter_mut() {
                *v *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Multiply every mode by a real per-mode factor (indexed like storage).
    pub fn apply_diagonal(&mut self, factors: &[f64]) {
        for c in self.comps.iter_mut() {
            for (v, f) in c.iter_mut().zip(factors) {
                *v *= *f;
            }
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    /// `max_k |vhat(k)|` with the Euclidean norm over components.
    pub fn max_mode_norm(&self) -> f64 {
        (0..self.grid.spectral_len())
            .map(|i| {
                self.comps
                    .iter()
                    .map(|c| c[i].norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest coefficient-wise absolute difference.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// Spatial mean, i.e. the real part of the `k = 0` coefficient.
    pub fn mean(&self) -> [f64; 3] {
        [self.comps[0][0].re, self.comps[1][0].re, self.comps[2][0].re]
    }

    /// Copy modes into a grid of another resolution over the same box:
    /// zero-padding when refining, truncation when coarsening. Nyquist
    /// modes of the coarser grid are dropped.
    pub fn resample(&self, target: &Grid) -> Result<SpectralField> {
        if self.grid.l().to_bits() != target.l().to_bits() {
            return Err(Error::GridMismatch {
                left_n: self.grid.n(),
                left_l: self.grid.l(),
                right_n: target.n(),
                right_l: target.l(),
            });
        }
        if target.n() == self.grid.n() {
            let mut out = self.clone();
            out.grid = target.clone();
            return Ok(out);
        }
        let coarse = if target.n() < self.grid.n() {
            target
        } else {
            &self.grid
        };
        let mut out = SpectralField::zeros(target);
        self.grid.for_each_mode(|idx, k| {
            if k.iter().any(|&c| coarse.is_nyquist(c.abs())) {
                return;
            }
            if let Some(t) = target.locate(k) {
                for c in 0..3 {
                    out.comps[c][t] = self.comps[c][idx];
                }
            }
        });
        Ok(out)
    }
}

/// Half-spectrum coefficients of a real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralScalar {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralScalar {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.spectral_len()],
        }
    }

    pub fn from_coefficients(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(Error::ShapeMismatch {
                expected: grid.spectral_len(),
                actual: coeffs.len(),
            });
        }
        Ok(SpectralScalar {
            grid: grid.clone(),
            coeffs,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Real 3-vector samples on an `M^3` collocation grid, `z` index fastest.
/// Node `(i, j, k)` sits at `(i, j, k) * L / M`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    grid: Grid,
    m: usize,
    comps: [Vec<f64>; 3],
}

impl PhysicalField {
    pub fn new(grid: &Grid, padding: Padding, comps: [Vec<f64>; 3]) -> Result<Self> {
        let m = padding.size(grid.n());
        Self::with_size(grid, m, comps)
    }

    pub(crate) fn with_size(grid: &Grid, m: usize, comps: [Vec<f64>; 3]) -> Result<Self> {
        let expected = m * m * m;
        for c in &comps {
            if c.len() != expected {
                return Err(Error::ShapeMismatch {
                    expected,
                    actual: c.len(),
                });
            }
        }
        Ok(PhysicalField {
            grid: grid.clone(),
            m,
            comps,
        })
    }

    /// Sample a closed-form field at the collocation nodes.
    pub fn from_fn(grid: &Grid, padding: Padding, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let m = padding.size(grid.n());
        let h = grid.l() / m as f64;
        let total = m * m * m;
        let mut comps = [vec![0.0; total], vec![0.0; total], vec![0.0; total]];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let idx = (i * m + j) * m + k;
                    let v = f([i as f64 * h, j as f64 * h, k as f64 * h]);
                    for c in 0..3 {
                        comps[c][idx] = v[c];
                    }
                }
            }
        }
        PhysicalField {
            grid: grid.clone(),
            m,
            comps,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Collocation points per dimension.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn comp(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    #[inline]
    pub fn comp_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.comps[i]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `(L/M)^3` of one cell.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        (self.grid.l() / self.m as f64).powi(3)
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (a, b, c) = (self.comps[0][i], self.comps[1][i], self.comps[2][i]);
                (a * a + b * b + c * c).sqrt()
            })
            .collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().into_iter().fold(0.0, f64::max)
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.comps
    }
}

/// Real scalar samples on an `M^3` collocation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalScalar {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl PhysicalScalar {
    pub(crate) fn with_size(grid: &Grid, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m * m {
            return Err(Error::ShapeMismatch {
                expected: m * m * m,
                actual: values.len(),
            });
        }
        Ok(PhysicalScalar {
            grid: grid.clone(),
            m,
            values,
        })
    }

    pub fn new(grid: &Grid, padding: Padding, values: Vec<f64>) -> Result<Self> {
        Self::with_size(grid, padding.size(grid.n()), values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}
