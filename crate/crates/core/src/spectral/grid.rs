use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use super::fft::Fft3;
use crate::error::{Error, Result};

/// Collocation grid size relative to the spectral resolution `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// `M = N`.
    None,
    /// `M = 3N/2`, the standard padding for quadratic products.
    ThreeHalves,
    /// `M = k N`.
    Times(usize),
}

impl Padding {
    pub fn size(self, n: usize) -> usize {
        match self {
            Padding::None => n,
            Padding::ThreeHalves => 3 * n / 2,
            Padding::Times(k) => k.max(1) * n,
        }
    }
}

/// Uniform periodic grid on the cube `[0, L]^3` with `N` modes per dimension.
///
/// Spectral arrays use the half-spectrum layout `N x N x (N/2 + 1)` with the
/// `z` index fastest. Along `x` and `y` the stored index `i` carries the
/// integer wavenumber `i` for `i <= N/2` and `i - N` otherwise, so the
/// resolved set is `{-N/2+1, ..., N/2}`; along `z` only `0..=N/2` is stored.
/// The Nyquist index `N/2` is kept in storage.
///
/// Cloning is cheap; FFT plans are built lazily and shared between clones.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    l: f64,
    lambda: f64,
    plans: Mutex<HashMap<usize, Arc<Fft3>>>,
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "N must be even and at least 4, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive and finite, got {l}"
            )));
        }
        let k0 = 2.0 * PI / l;
        Ok(Grid {
            inner: Arc::new(GridInner {
                n,
                l,
                lambda: k0 * k0,
                plans: Mutex::new(HashMap::new()),
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    #[inline]
    pub fn l(&self) -> f64 {
        self.inner.l
    }

    /// Poincaré constant `(2π/L)^2`, the smallest nonzero `|k|^2`.
    #[inline]
    pub fn lambda(&self) -> f64 {
        self.inner.lambda
    }

    /// Wavenumber unit `2π/L`.
    #[inline]
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.inner.l
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.inner.l.powi(3)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.inner.l / self.inner.n as f64
    }

    #[inline]
    pub fn nz(&self) -> usize {
        self.inner.n / 2 + 1
    }

    /// Number of stored coefficients per scalar component.
    #[inline]
    pub fn spectral_len(&self) -> usize {
        self.inner.n * self.inner.n * self.nz()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.inner.n + iy) * self.nz() + iz
    }

    /// Signed integer wavenumber of a stored `x`/`y` index.
    #[inline]
    pub fn signed(&self, i: usize) -> i64 {
        let n = self.inner.n;
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Storage index of an integer wavenumber, or `None` if not stored.
    pub fn locate(&self, k: [i64; 3]) -> Option<usize> {
        let n = self.inner.n as i64;
        let in_range = |v: i64| v > -n / 2 && v <= n / 2;
        if !(in_range(k[0]) && in_range(k[1]) && (0..=n / 2).contains(&k[2])) {
            return None;
        }
        let wrap = |v: i64| v.rem_euclid(n) as usize;
        Some(self.index(wrap(k[0]), wrap(k[1]), k[2] as usize))
    }

    /// Multiplicity of a stored mode in the full spectrum: the `k_z = 0` and
    /// `k_z = N/2` planes are their own conjugate partners.
    #[inline]
    pub fn weight(&self, iz: usize) -> f64 {
        if iz == 0 || iz == self.inner.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// Visit every stored mode as `(storage index, integer wavenumber)`.
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, [i64; 3])) {
        let n = self.inner.n;
        let nz = self.nz();
        for ix in 0..n {
            let kx = self.signed(ix);
            for iy in 0..n {
                let ky = self.signed(iy);
                let base = (ix * n + iy) * nz;
                for iz in 0..nz {
                    f(base + iz, [kx, ky, iz as i64]);
                }
            }
        }
    }

    /// `|k|^2` (physical units) for every stored mode.
    pub fn k_squared(&self) -> Vec<f64> {
        let k0sq = self.lambda();
        let mut out = vec![0.0; self.spectral_len()];
        self.for_each_mode(|idx, k| {
            out[idx] = k0sq * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        });
        out
    }

    #[inline]
    pub fn is_nyquist(&self, k: i64) -> bool {
        k == self.inner.n as i64 / 2
    }

    /// True if any component exceeds the 2/3-rule cutoff `N/3`.
    #[inline]
    pub fn is_aliased(&self, k: [i64; 3]) -> bool {
        let n = self.inner.n as i64;
        k.iter().any(|&c| 3 * c.abs() > n)
    }

    pub(crate) fn plan(&self, m: usize) -> Arc<Fft3> {
        let mut plans = self
            .inner
            .plans
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner());
        plans
            .entry(m)
            .or_insert_with(|| Arc::new(Fft3::new(m)))
            .clone()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left_n: self.n(),
                left_l: self.l(),
                right_n: other.n(),
                right_l: other.l(),
            })
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.l.to_bits() == other.inner.l.to_bits())
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("l", &self.inner.l)
            .field("lambda", &self.inner.lambda)
            .finish()
    }
}
