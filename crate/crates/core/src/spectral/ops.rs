use rustfft::num_complex::Complex64;

use super::fft::{backward_pair, forward_pair};
use super::field::{PhysicalField, PhysicalScalar, SpectralField, SpectralScalar};
use super::grid::{Grid, Padding};
use crate::error::{Error, Result};

/// Backward-transform a list of scalar spectra to `M^3` samples, two per FFT.
pub(crate) fn backward_many(grid: &Grid, m: usize, spectra: &[&[Complex64]]) -> Vec<Vec<f64>> {
    let plan = grid.plan(m);
    let mut out = Vec::with_capacity(spectra.len());
    for pair in spectra.chunks(2) {
        let (a, b) = backward_pair(grid, &plan, pair[0], pair.get(1).copied());
        out.push(a);
        if let Some(b) = b {
            out.push(b);
        }
    }
    out
}

/// Forward-transform a list of `M^3` sample arrays, two per FFT.
pub(crate) fn forward_many(grid: &Grid, m: usize, reals: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let plan = grid.plan(m);
    let mut out = Vec::with_capacity(reals.len());
    for pair in reals.chunks(2) {
        let (a, b) = forward_pair(grid, &plan, pair[0], pair.get(1).copied());
        out.push(a);
        if let Some(b) = b {
            out.push(b);
        }
    }
    out
}

fn three<T>(mut v: Vec<T>) -> [T; 3] {
    let c = v.pop().expect("three components");
    let b = v.pop().expect("three components");
    let a = v.pop().expect("three components");
    [a, b, c]
}

/// Samples on the `M^3` grid to half-spectrum coefficients on the field's grid.
/// Padded samples are truncated to the `N` spectrum.
pub fn transform_forward(f: &PhysicalField) -> SpectralField {
    let grid = f.grid();
    let out = forward_many(grid, f.m(), &[f.comp(0), f.comp(1), f.comp(2)]);
    SpectralField::from_components(grid, three(out)).expect("shape from grid")
}

/// Coefficients to samples on the (optionally padded) collocation grid.
pub fn transform_backward(f: &SpectralField, padding: Padding) -> PhysicalField {
    let grid = f.grid();
    let m = padding.size(grid.n());
    let out = backward_many(grid, m, &[f.comp(0), f.comp(1), f.comp(2)]);
    PhysicalField::with_size(grid, m, three(out)).expect("shape from grid")
}

pub fn scalar_forward(f: &PhysicalScalar) -> SpectralScalar {
    let grid = f.grid();
    let mut out = forward_many(grid, f.m(), &[f.values()]);
    SpectralScalar::from_coefficients(grid, out.remove(0)).expect("shape from grid")
}

pub fn scalar_backward(f: &SpectralScalar, padding: Padding) -> PhysicalScalar {
    let grid = f.grid();
    let m = padding.size(grid.n());
    let mut out = backward_many(grid, m, &[f.coeffs()]);
    PhysicalScalar::with_size(grid, m, out.remove(0)).expect("shape from grid")
}

/// Wavenumbers used by first derivatives: the Nyquist component is zeroed.
#[inline]
pub(crate) fn odd_wavenumber(grid: &Grid, k: [i64; 3]) -> [f64; 3] {
    let k0 = grid.k0();
    let f = |c: i64| if grid.is_nyquist(c) { 0.0 } else { k0 * c as f64 };
    [f(k[0]), f(k[1]), f(k[2])]
}

#[inline]
pub(crate) fn physical_wavenumber(grid: &Grid, k: [i64; 3]) -> [f64; 3] {
    let k0 = grid.k0();
    [k0 * k[0] as f64, k0 * k[1] as f64, k0 * k[2] as f64]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeKind {
    Gradient,
    Divergence,
    Laplacian,
}

#[derive(Clone, Debug)]
pub enum Derivative {
    /// `out[j]` holds `d/dx_j` of every component.
    Gradient(Box<[SpectralField; 3]>),
    Divergence(SpectralScalar),
    Laplacian(SpectralField),
}

pub fn spectral_derivative(f: &SpectralField, kind: DerivativeKind) -> Derivative {
    match kind {
        DerivativeKind::Gradient => Derivative::Gradient(Box::new(gradient(f))),
        DerivativeKind::Divergence => Derivative::Divergence(divergence(f)),
        DerivativeKind::Laplacian => Derivative::Laplacian(laplacian(f)),
    }
}

/// `out[j] = d f / d x_j` (all three components), via multiplication by `i k_j`.
pub fn gradient(f: &SpectralField) -> [SpectralField; 3] {
    let grid = f.grid();
    let mut out = [
        SpectralField::zeros(grid),
        SpectralField::zeros(grid),
        SpectralField::zeros(grid),
    ];
    grid.for_each_mode(|idx, k| {
        let kd = odd_wavenumber(grid, k);
        for (j, dj) in out.iter_mut().enumerate() {
            let ik = Complex64::new(0.0, kd[j]);
            for c in 0..3 {
                dj.comp_mut(c)[idx] = ik * f.comp(c)[idx];
            }
        }
    });
    out
}

pub fn divergence(f: &SpectralField) -> SpectralScalar {
    let grid = f.grid();
    let mut out = SpectralScalar::zeros(grid);
    let coeffs = out.coeffs_mut();
    grid.for_each_mode(|idx, k| {
        let kd = odd_wavenumber(grid, k);
        let s = f.comp(0)[idx] * kd[0] + f.comp(1)[idx] * kd[1] + f.comp(2)[idx] * kd[2];
        coeffs[idx] = Complex64::new(-s.im, s.re);
    });
    out
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    let ksq: Vec<f64> = f.grid().k_squared().into_iter().map(|v| -v).collect();
    out.apply_diagonal(&ksq);
    out
}

pub fn curl(f: &SpectralField) -> SpectralField {
    let grid = f.grid();
    let mut out = SpectralField::zeros(grid);
    grid.for_each_mode(|idx, k| {
        let kd = odd_wavenumber(grid, k);
        let v = [f.comp(0)[idx], f.comp(1)[idx], f.comp(2)[idx]];
        let c = [
            v[2] * kd[1] - v[1] * kd[2],
            v[0] * kd[2] - v[2] * kd[0],
            v[1] * kd[0] - v[0] * kd[1],
        ];
        for (i, ci) in c.iter().enumerate() {
            out.comp_mut(i)[idx] = Complex64::new(-ci.im, ci.re);
        }
    });
    out
}

pub fn scalar_gradient(f: &SpectralScalar) -> SpectralField {
    let grid = f.grid();
    let mut out = SpectralField::zeros(grid);
    grid.for_each_mode(|idx, k| {
        let kd = odd_wavenumber(grid, k);
        for (j, kj) in kd.iter().enumerate() {
            out.comp_mut(j)[idx] = Complex64::new(0.0, *kj) * f.coeffs()[idx];
        }
    });
    out
}

/// Leray projection onto divergence-free fields in place:
/// `v <- v - k (k.v) / |k|^2` for `k != 0`; the mean is untouched.
pub fn leray_project_in_place(f: &mut SpectralField) {
    let grid = f.grid().clone();
    grid.for_each_mode(|idx, k| {
        if k == [0, 0, 0] {
            return;
        }
        let kv = physical_wavenumber(&grid, k);
        let ksq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
        let dot = f.comp(0)[idx] * kv[0] + f.comp(1)[idx] * kv[1] + f.comp(2)[idx] * kv[2];
        let s = dot / ksq;
        for (c, kc) in kv.iter().enumerate() {
            f.comp_mut(c)[idx] -= s * *kc;
        }
    });
}

pub fn leray_project(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    leray_project_in_place(&mut out);
    out
}

/// 2/3 rule: zero every mode with some `|k_i| > N/3`.
pub fn dealias_in_place(f: &mut SpectralField) {
    let grid = f.grid().clone();
    grid.for_each_mode(|idx, k| {
        if grid.is_aliased(k) {
            for c in 0..3 {
                f.comp_mut(c)[idx] = Complex64::default();
            }
        }
    });
}

pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

/// `∫ |f|^p dx` by the rectangle rule on the field's collocation grid.
pub fn lp_integral(f: &PhysicalField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || p.is_infinite() {
        return Err(Error::param("p", format!("need finite p >= 1, got {p}")));
    }
    let dv = f.cell_volume();
    let sum: f64 = (0..f.len())
        .map(|i| {
            let s = f.comp(0)[i].powi(2) + f.comp(1)[i].powi(2) + f.comp(2)[i].powi(2);
            pow_half(s, p)
        })
        .sum();
    Ok(sum * dv)
}

/// `(∫ |f|^p dx)^(1/p)`, or the nodal maximum for `p = ∞`.
pub fn lp_norm(f: &PhysicalField, p: f64) -> Result<f64> {
    if p == f64::INFINITY {
        return Ok(f.max_magnitude());
    }
    lp_integral(f, p).map(|v| v.powf(1.0 / p))
}

/// `s^(p/2)` for `s = |v|^2 >= 0`, using integer powers where exact.
#[inline]
pub(crate) fn pow_half(s: f64, p: f64) -> f64 {
    let half = 0.5 * p;
    if half.fract() == 0.0 && half <= 64.0 {
        s.powi(half as i32)
    } else {
        s.powf(half)
    }
}

/// `∫ f.g dx` from coefficients (full-spectrum sum reconstructed from the
/// half-spectrum).
pub fn inner(f: &SpectralField, g: &SpectralField) -> f64 {
    let grid = f.grid();
    let nz = grid.nz();
    let mut sum = 0.0;
    for c in 0..3 {
        for (idx, (a, b)) in f.comp(c).iter().zip(g.comp(c)).enumerate() {
            sum += grid.weight(idx % nz) * (a.re * b.re + a.im * b.im);
        }
    }
    sum * grid.volume()
}

pub fn norm_sq(f: &SpectralField) -> f64 {
    inner(f, f)
}

/// `||∇f||_2^2 = L^3 sum |k|^2 |fhat|^2 = -<Δf, f>`.
pub fn grad_norm_sq(f: &SpectralField) -> f64 {
    let grid = f.grid();
    let nz = grid.nz();
    let ksq = grid.k_squared();
    let mut sum = 0.0;
    for c in 0..3 {
        for (idx, a) in f.comp(c).iter().enumerate() {
            sum += grid.weight(idx % nz) * ksq[idx] * a.norm_sqr();
        }
    }
    sum * grid.volume()
}

/// `max_k |k.vhat(k)| / max_k |vhat(k)|` with integer wavenumbers, so the
/// value does not depend on the box length. Zero for the zero field.
pub fn divergence_residual(f: &SpectralField) -> f64 {
    let grid = f.grid();
    let mut worst: f64 = 0.0;
    grid.for_each_mode(|idx, k| {
        let d = f.comp(0)[idx] * k[0] as f64
            + f.comp(1)[idx] * k[1] as f64
            + f.comp(2)[idx] * k[2] as f64;
        worst = worst.max(d.norm());
    });
    let scale = f.max_mode_norm();
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Project arbitrary coefficients onto those of a real field: in the
/// self-conjugate planes `k_z = 0` and `k_z = N/2`, replace each pair by
/// `(f(k) + conj f(-k)) / 2`. Other planes are untouched.
pub fn make_hermitian(f: &SpectralField) -> SpectralField {
    let grid = f.grid();
    let n = grid.n();
    let mut out = f.clone();
    for iz in [0, n / 2] {
        for ix in 0..n {
            for iy in 0..n {
                let p = grid.index(ix, iy, iz);
                let q = grid.index((n - ix) % n, (n - iy) % n, iz);
                if q < p {
                    continue;
                }
                for c in 0..3 {
                    let (a, b) = (f.comp(c)[p], f.comp(c)[q]);
                    let s = (a + b.conj()) * 0.5;
                    out.comp_mut(c)[p] = s;
                    out.comp_mut(c)[q] = s.conj();
                }
            }
        }
    }
    out
}
