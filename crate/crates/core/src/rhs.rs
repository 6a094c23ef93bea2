//! Right-hand side of the damped MHD system
//!
//! ```text
//! u_t - nu Δu + (u.∇)u - (b.∇)b + a |u|^{2α} u + ∇p = f_u,   ∇.u = 0
//! b_t - kappa Δb + (u.∇)b - (b.∇)u                 = f_b,   ∇.b = 0
//! ```
//!
//! Products are formed on the 3/2-padded grid and the result is truncated
//! with the 2/3 rule. States whose modes all lie inside the 2/3 band are
//! therefore advanced without aliasing error in the quadratic terms.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{
    backward_many, dealias_in_place, divergence_residual, forward_many, leray_project_in_place,
    odd_wavenumber, scalar_backward, Complex64, Grid, Padding, PhysicalScalar, SpectralField,
    SpectralScalar,
};
use crate::state::State;

/// Relative divergence residual above which an input state is treated as
/// corrupted.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    pub nu: f64,
    pub kappa: f64,
    pub a: f64,
    pub alpha: f64,
}

impl PhysParams {
    /// All coefficients finite and non-negative.
    pub fn new(nu: f64, kappa: f64, a: f64, alpha: f64) -> Result<Self> {
        let p = PhysParams { nu, kappa, a, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nu", self.nu),
            ("kappa", self.kappa),
            ("a", self.a),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// The long-time bounds need strictly positive `nu`, `kappa` and `a`.
    pub fn check_long_time_hypotheses(&self) -> Result<()> {
        self.validate()?;
        for (name, v) in [("nu", self.nu), ("kappa", self.kappa), ("a", self.a)] {
            if v <= 0.0 {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

pub type Weight = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One separable contribution `w(t) * (f_u, f_b)`.
#[derive(Clone)]
pub struct ForcingTerm {
    pub weight: Weight,
    pub f_u: Option<SpectralField>,
    pub f_b: Option<SpectralField>,
}

/// Time-dependent body forcing as a sum of separable terms. Empty by default.
#[derive(Clone, Default)]
pub struct Forcing {
    terms: Vec<ForcingTerm>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing")
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl Forcing {
    pub fn none() -> Self {
        Forcing::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[ForcingTerm] {
        &self.terms
    }

    pub fn push(&mut self, weight: Weight, f_u: Option<SpectralField>, f_b: Option<SpectralField>) {
        self.terms.push(ForcingTerm { weight, f_u, f_b });
    }

    /// `(f_u(t), f_b(t))` on `grid`, or `None` when unforced.
    pub fn evaluate(&self, t: f64, grid: &Grid) -> Result<Option<(SpectralField, SpectralField)>> {
        if self.terms.is_empty() {
            return Ok(None);
        }
        let mut fu = SpectralField::zeros(grid);
        let mut fb = SpectralField::zeros(grid);
        for term in &self.terms {
            let w = (term.weight)(t);
            if let Some(f) = &term.f_u {
                grid.ensure_same(f.grid())?;
                fu.axpy(w, f);
            }
            if let Some(f) = &term.f_b {
                grid.ensure_same(f.grid())?;
                fb.axpy(w, f);
            }
        }
        Ok(Some((fu, fb)))
    }
}

/// `|v|^{2α} v` given `s = |v|^2`, with `|0|^{2α} 0 = 0` for every `α >= 0`.
#[inline]
pub(crate) fn damping_factor(s: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if s == 0.0 {
        0.0
    } else if alpha.fract() == 0.0 && alpha <= 32.0 {
        s.powi(alpha as i32)
    } else {
        s.powf(alpha)
    }
}

fn three(mut v: Vec<Vec<Complex64>>) -> [Vec<Complex64>; 3] {
    let c = v.pop().expect("three components");
    let b = v.pop().expect("three components");
    let a = v.pop().expect("three components");
    [a, b, c]
}

/// Spectra of `d w_i / d x_j`, ordered `(i, j)` with `j` fastest.
fn gradient_spectra(w: &SpectralField) -> Vec<Vec<Complex64>> {
    let grid = w.grid();
    let len = grid.spectral_len();
    let mut out = vec![vec![Complex64::default(); len]; 9];
    grid.for_each_mode(|idx, k| {
        let kd = odd_wavenumber(grid, k);
        for i in 0..3 {
            let v = w.comp(i)[idx];
            for j in 0..3 {
                out[3 * i + j][idx] = Complex64::new(-kd[j] * v.im, kd[j] * v.re);
            }
        }
    });
    out
}

fn refs(v: &[Vec<Complex64>]) -> Vec<&[Complex64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

fn finish(grid: &Grid, m: usize, reals: [Vec<f64>; 3]) -> SpectralField {
    let out = forward_many(grid, m, &[&reals[0], &reals[1], &reals[2]]);
    let mut f = SpectralField::from_components(grid, three(out)).expect("shape from grid");
    dealias_in_place(&mut f);
    f
}

/// Pseudospectral `(v.∇)w`, dealiased.
pub fn advect(v: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    let grid = v.grid();
    grid.ensure_same(w.grid())?;
    let m = Padding::ThreeHalves.size(grid.n());
    let grads = gradient_spectra(w);
    let mut spectra = vec![v.comp(0), v.comp(1), v.comp(2)];
    spectra.extend(refs(&grads));
    let phys = backward_many(grid, m, &spectra);
    let (vel, dw) = phys.split_at(3);
    let len = m * m * m;
    let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for p in 0..len {
        for (i, o) in out.iter_mut().enumerate() {
            o[p] = vel[0][p] * dw[3 * i][p] + vel[1][p] * dw[3 * i + 1][p] + vel[2][p] * dw[3 * i + 2][p];
        }
    }
    Ok(finish(grid, m, out))
}

/// `a |u|^{2α} u` evaluated on the 3/2-padded grid and truncated to the
/// spectral grid (no 2/3 cut). For non-integer `α`, and for `α >= 2`, the
/// padded evaluation aliases; this is accepted.
pub fn damping(u: &SpectralField, a: f64, alpha: f64) -> Result<SpectralField> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::param("a", format!("must be finite and >= 0, got {a}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be finite and >= 0, got {alpha}")));
    }
    let grid = u.grid();
    if alpha == 0.0 {
        return Ok(u.scaled(a));
    }
    let m = Padding::ThreeHalves.size(grid.n());
    let phys = backward_many(grid, m, &[u.comp(0), u.comp(1), u.comp(2)]);
    let len = m * m * m;
    let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for p in 0..len {
        let s = phys[0][p] * phys[0][p] + phys[1][p] * phys[1][p] + phys[2][p] * phys[2][p];
        let f = a * damping_factor(s, alpha);
        for c in 0..3 {
            out[c][p] = f * phys[c][p];
        }
    }
    let spec = forward_many(grid, m, &[&out[0], &out[1], &out[2]]);
    SpectralField::from_components(grid, three(spec))
}

/// Residuals are measured against the larger of the two fields, so roundoff
/// in a field that is otherwise zero is not rejected.
pub(crate) fn check_divergence(state: &State) -> Result<()> {
    let scale = state.u_hat.max_mode_norm().max(state.b_hat.max_mode_norm());
    if scale == 0.0 {
        return Ok(());
    }
    for (field, f) in [("u", &state.u_hat), ("b", &state.b_hat)] {
        let residual = divergence_residual(f) * f.max_mode_norm() / scale;
        if !(residual <= DIVERGENCE_TOLERANCE) {
            return Err(Error::ConstraintViolation { field, residual });
        }
    }
    Ok(())
}

/// Everything except diffusion, at time `t`:
///
/// - `Nu = P[-(u.∇)u + (b.∇)b - a|u|^{2α}u + f_u]`
/// - `Nb = -(u.∇)b + (b.∇)u + f_b`
///
/// Both are dealiased. Inputs are not checked.
pub fn nonlinear_tendency(
    u: &SpectralField,
    b: &SpectralField,
    t: f64,
    params: &PhysParams,
    forcing: &Forcing,
) -> Result<(SpectralField, SpectralField)> {
    let grid = u.grid();
    grid.ensure_same(b.grid())?;
    let m = Padding::ThreeHalves.size(grid.n());

    let gu = gradient_spectra(u);
    let gb = gradient_spectra(b);
    let mut spectra: Vec<&[Complex64]> = vec![
        u.comp(0),
        u.comp(1),
        u.comp(2),
        b.comp(0),
        b.comp(1),
        b.comp(2),
    ];
    spectra.extend(refs(&gu));
    spectra.extend(refs(&gb));
    let phys = backward_many(grid, m, &spectra);
    let (uv, rest) = phys.split_at(3);
    let (bv, rest) = rest.split_at(3);
    let (du, db) = rest.split_at(9);

    let len = m * m * m;
    let (a, alpha) = (params.a, params.alpha);
    let damped = a != 0.0;
    let mut nu_out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut nb_out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for p in 0..len {
        let up = [uv[0][p], uv[1][p], uv[2][p]];
        let bp = [bv[0][p], bv[1][p], bv[2][p]];
        let drag = if damped {
            a * damping_factor(up[0] * up[0] + up[1] * up[1] + up[2] * up[2], alpha)
        } else {
            0.0
        };
        for i in 0..3 {
            let (r, s) = (3 * i, 3 * i + 1);
            let t3 = 3 * i + 2;
            let u_grad_u = up[0] * du[r][p] + up[1] * du[s][p] + up[2] * du[t3][p];
            let b_grad_b = bp[0] * db[r][p] + bp[1] * db[s][p] + bp[2] * db[t3][p];
            let u_grad_b = up[0] * db[r][p] + up[1] * db[s][p] + up[2] * db[t3][p];
            let b_grad_u = bp[0] * du[r][p] + bp[1] * du[s][p] + bp[2] * du[t3][p];
            nu_out[i][p] = -u_grad_u + b_grad_b - drag * up[i];
            nb_out[i][p] = -u_grad_b + b_grad_u;
        }
    }

    let spec = forward_many(
        grid,
        m,
        &[
            &nu_out[0], &nu_out[1], &nu_out[2], &nb_out[0], &nb_out[1], &nb_out[2],
        ],
    );
    let mut spec = spec.into_iter();
    let mut take3 = || -> [Vec<Complex64>; 3] {
        [
            spec.next().expect("six spectra"),
            spec.next().expect("six spectra"),
            spec.next().expect("six spectra"),
        ]
    };
    let mut nu_hat = SpectralField::from_components(grid, take3())?;
    let mut nb_hat = SpectralField::from_components(grid, take3())?;
    if let Some((fu, fb)) = forcing.evaluate(t, grid)? {
        nu_hat.axpy(1.0, &fu);
        nb_hat.axpy(1.0, &fb);
    }
    dealias_in_place(&mut nu_hat);
    dealias_in_place(&mut nb_hat);
    leray_project_in_place(&mut nu_hat);
    Ok((nu_hat, nb_hat))
}

/// Full tendency `(du/dt, db/dt)` including diffusion. Rejects inputs whose
/// relative divergence residual exceeds [`DIVERGENCE_TOLERANCE`].
pub fn tendency(
    state: &State,
    params: &PhysParams,
    forcing: &Forcing,
) -> Result<(SpectralField, SpectralField)> {
    params.validate()?;
    check_divergence(state)?;
    let (mut du, mut db) =
        nonlinear_tendency(&state.u_hat, &state.b_hat, state.t, params, forcing)?;
    let ksq = state.grid().k_squared();
    for c in 0..3 {
        let (uc, bc) = (state.u_hat.comp(c), state.b_hat.comp(c));
        for (idx, k2) in ksq.iter().enumerate() {
            du.comp_mut(c)[idx] -= uc[idx] * (params.nu * k2);
            db.comp_mut(c)[idx] -= bc[idx] * (params.kappa * k2);
        }
    }
    Ok((du, db))
}

/// Pressure coefficients with zero mean: `p = i k . N / |k|^2` where
/// `N = (u.∇)u - (b.∇)b + a|u|^{2α}u`, so that `∇p = -(I - P) N`.
pub fn pressure_hat(state: &State, params: &PhysParams) -> Result<SpectralScalar> {
    params.validate()?;
    let n = pressure_source(state, params)?;
    let grid = state.grid();
    let mut p = SpectralScalar::zeros(grid);
    let k0 = grid.k0();
    let coeffs = p.coeffs_mut();
    grid.for_each_mode(|idx, k| {
        if k == [0, 0, 0] {
            return;
        }
        let kv = [k0 * k[0] as f64, k0 * k[1] as f64, k0 * k[2] as f64];
        let ksq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
        let dot = n.comp(0)[idx] * kv[0] + n.comp(1)[idx] * kv[1] + n.comp(2)[idx] * kv[2];
        coeffs[idx] = Complex64::new(-dot.im, dot.re) / ksq;
    });
    Ok(p)
}

/// `(u.∇)u - (b.∇)b + a|u|^{2α}u`, dealiased: the terms whose gradient part
/// the pressure balances.
pub fn pressure_source(state: &State, params: &PhysParams) -> Result<SpectralField> {
    let mut n = advect(&state.u_hat, &state.u_hat)?;
    n.axpy(-1.0, &advect(&state.b_hat, &state.b_hat)?);
    n.axpy(1.0, &damping(&state.u_hat, params.a, params.alpha)?);
    dealias_in_place(&mut n);
    Ok(n)
}

/// Pressure samples on the unpadded grid.
pub fn pressure_recover(state: &State, params: &PhysParams) -> Result<PhysicalScalar> {
    Ok(scalar_backward(&pressure_hat(state, params)?, Padding::None))
}
