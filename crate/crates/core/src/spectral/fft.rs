//! Three-dimensional transforms between half-spectrum coefficients and real
//! samples on an `M^3` collocation grid.
//!
//! Two real fields are packed into one complex transform (`h = f + i g`), so a
//! vector field costs two complex 3D FFTs instead of three.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;

pub(crate) struct Fft3 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl Fft3 {
    pub(crate) fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft3 {
            m,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub(crate) fn m(&self) -> usize {
        self.m
    }

    /// Unnormalised in-place 3D transform of an `M^3` array (`z` fastest).
    ///
    /// `band` lists the `x`/`y` indices that can be nonzero in spectral
    /// space (`None` for all). Backward, lines outside it start at zero and
    /// are skipped; forward, only lines feeding those indices are computed,
    /// so the other outputs are left stale.
    fn process(&self, data: &mut [Complex64], inverse: bool, band: Option<&[bool]>) {
        let m = self.m;
        debug_assert_eq!(data.len(), m * m * m);
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let mut buf = vec![Complex64::default(); data.len()];
        let live = |i: usize| band.is_none_or(|b| b[i]);

        let z_pass = |data: &mut [Complex64], scratch: &mut [Complex64]| {
            for (line, chunk) in data.chunks_exact_mut(m).enumerate() {
                if live(line / m) && live(line % m) {
                    fft.process_with_scratch(chunk, scratch);
                }
            }
        };
        let y_pass = |data: &mut [Complex64], buf: &mut [Complex64], scratch: &mut [Complex64]| {
            for (ix, plane) in data.chunks_exact_mut(m * m).enumerate() {
                if !live(ix) {
                    continue;
                }
                let tmp = &mut buf[..m * m];
                transpose(plane, tmp, m, m);
                fft.process_with_scratch(tmp, scratch);
                transpose(tmp, plane, m, m);
            }
        };
        let x_pass = |data: &mut [Complex64], buf: &mut [Complex64], scratch: &mut [Complex64]| {
            transpose(data, buf, m, m * m);
            fft.process_with_scratch(buf, scratch);
            transpose(buf, data, m * m, m);
        };

        if inverse {
            z_pass(data, &mut scratch);
            y_pass(data, &mut buf, &mut scratch);
            x_pass(data, &mut buf, &mut scratch);
        } else {
            x_pass(data, &mut buf, &mut scratch);
            y_pass(data, &mut buf, &mut scratch);
            z_pass(data, &mut scratch);
        }
    }
}

/// Indices on the `M` grid holding a kept wavenumber of `grid`, or `None`
/// when every index does.
fn band_mask(grid: &Grid, m: usize) -> Option<Vec<bool>> {
    if m == grid.n() {
        return None;
    }
    let mut mask = vec![false; m];
    for i in 0..grid.n() {
        let k = grid.signed(i);
        if !grid.is_nyquist(k) {
            mask[wrap(k, m)] = true;
        }
    }
    Some(mask)
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for (c, v) in row.iter().enumerate() {
            dst[c * rows + r] = *v;
        }
    }
}

#[inline]
fn wrap(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// True if a mode is represented on the `M` grid. Nyquist modes of the
/// spectral grid are dropped when `M > N`, since they have no unique
/// counterpart on the padded grid.
#[inline]
fn kept(grid: &Grid, m: usize, k: [i64; 3]) -> bool {
    m == grid.n() || !(grid.is_nyquist(k[0]) || grid.is_nyquist(k[1]) || grid.is_nyquist(k[2]))
}

/// Backward transform of up to two half-spectra to real samples on `M^3`.
///
/// `f(x) = sum_k fhat(k) exp(i k.x)` with no normalisation.
pub(crate) fn backward_pair(
    grid: &Grid,
    plan: &Fft3,
    f: &[Complex64],
    g: Option<&[Complex64]>,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let m = plan.m();
    let n = grid.n();
    let mut h = vec![Complex64::default(); m * m * m];
    let i = Complex64::new(0.0, 1.0);
    grid.for_each_mode(|idx, k| {
        if !kept(grid, m, k) {
            return;
        }
        let fv = f[idx];
        let gv = g.map_or(Complex64::default(), |g| g[idx]);
        let p = (wrap(k[0], m) * m + wrap(k[1], m)) * m + wrap(k[2], m);
        h[p] = fv + i * gv;
        // Planes k_z = 0 (and k_z = N/2 when unpadded) already hold both
        // members of each conjugate pair.
        let self_conjugate_plane = k[2] == 0 || (m == n && k[2] as usize == n / 2);
        if !self_conjugate_plane {
            let q = (wrap(-k[0], m) * m + wrap(-k[1], m)) * m + wrap(-k[2], m);
            h[q] = fv.conj() + i * gv.conj();
        }
    });
    plan.process(&mut h, true, band_mask(grid, m).as_deref());
    let re = h.iter().map(|c| c.re).collect();
    let im = g.map(|_| h.iter().map(|c| c.im).collect());
    (re, im)
}

/// Forward transform of up to two real `M^3` sample arrays, truncated to the
/// half-spectrum of `grid`. Carries the `1/M^3` factor so coefficients are
/// mode amplitudes.
pub(crate) fn forward_pair(
    grid: &Grid,
    plan: &Fft3,
    f: &[f64],
    g: Option<&[f64]>,
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    let m = plan.m();
    let mut h: Vec<Complex64> = match g {
        Some(g) => f.iter().zip(g).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        None => f.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
    };
    plan.process(&mut h, false, band_mask(grid, m).as_deref());
    let scale = 1.0 / (m * m * m) as f64;
    let len = grid.spectral_len();
    let mut fout = vec![Complex64::default(); len];
    let mut gout = g.map(|_| vec![Complex64::default(); len]);
    grid.for_each_mode(|idx, k| {
        if !kept(grid, m, k) {
            return;
        }
        let p = (wrap(k[0], m) * m + wrap(k[1], m)) * m + wrap(k[2], m);
        let q = (wrap(-k[0], m) * m + wrap(-k[1], m)) * m + wrap(-k[2], m);
        let hp = h[p];
        let hq = h[q].conj();
        match gout.as_mut() {
            Some(gout) => {
                fout[idx] = (hp + hq) * (0.5 * scale);
                // (hp - hq) / (2i)
                let d = hp - hq;
                gout[idx] = Complex64::new(d.im, -d.re) * (0.5 * scale);
            }
            None => fout[idx] = (hp + hq) * (0.5 * scale),
        }
    });
    (fout, gout)
}
