//! Initial conditions, manufactured solutions and the structured experiments
//! built on them.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::separation_sq;
use crate::error::{Error, Result};
use crate::integrator::{run, RkOrder, TimeControls};
use crate::rhs::{advect, damping, Forcing, PhysParams, Weight, DIVERGENCE_TOLERANCE};
use crate::spectral::{
    dealias, dealias_in_place, divergence_residual, laplacian, leray_project, make_hermitian,
    norm_sq, transform_backward, transform_forward, Complex64, Grid, Padding, PhysicalField,
    SpectralField,
};
use crate::state::State;

#[derive(Clone, Debug, PartialEq)]
pub enum IcKind {
    /// `cos(k.x) e` with `e . k = 0`.
    SingleMode { k: [i64; 3], direction: [f64; 3] },
    /// Random solenoidal field on `1 <= max|k_i| <= kmax`.
    RandomBand { kmax: i64 },
    /// `u ∝ (sin x cos y cos z, -cos x sin y cos z, 0)`,
    /// `b ∝ (sin z, sin x, sin y)` in units of `2π/L`.
    TaylorGreenLike,
}

/// Initial-condition recipe.
///
/// `u_scale`/`b_scale` are amplitudes for the single-mode and Taylor–Green
/// kinds and fluctuation energies `||u - mean u||_2^2` for the random band.
#[derive(Clone, Debug, PartialEq)]
pub struct ICSpec {
    pub kind: IcKind,
    pub u_scale: f64,
    pub b_scale: f64,
    pub seed: u64,
    pub mean_u: [f64; 3],
    pub mean_b: [f64; 3],
}

impl ICSpec {
    pub fn single_mode(k: [i64; 3], direction: [f64; 3], amplitude: f64) -> Self {
        ICSpec {
            kind: IcKind::SingleMode { k, direction },
            u_scale: amplitude,
            b_scale: 0.0,
            seed: 0,
            mean_u: [0.0; 3],
            mean_b: [0.0; 3],
        }
    }

    pub fn random_band(kmax: i64, energy_u: f64, energy_b: f64, seed: u64) -> Self {
        ICSpec {
            kind: IcKind::RandomBand { kmax },
            u_scale: energy_u,
            b_scale: energy_b,
            seed,
            mean_u: [0.0; 3],
            mean_b: [0.0; 3],
        }
    }

    pub fn taylor_green(amp_u: f64, amp_b: f64) -> Self {
        ICSpec {
            kind: IcKind::TaylorGreenLike,
            u_scale: amp_u,
            b_scale: amp_b,
            seed: 0,
            mean_u: [0.0; 3],
            mean_b: [0.0; 3],
        }
    }
}

/// Largest wavenumber component kept by the 2/3 rule.
pub fn band_limit(grid: &Grid) -> i64 {
    grid.n() as i64 / 3
}

/// Random real solenoidal field with zero mean and unit `||.||_2^2`, drawn on
/// `1 <= max|k_i| <= kmax` with spectral weight `1/(1+|k|^2)`. Coefficients
/// are drawn in storage order.
pub fn random_solenoidal(grid: &Grid, kmax: i64, rng: &mut ChaCha8Rng) -> Result<SpectralField> {
    if kmax < 1 || grid.is_aliased([kmax, 0, 0]) {
        return Err(Error::ModeOutsideGrid {
            mode: [kmax, 0, 0],
            n: grid.n(),
        });
    }
    let mut f = SpectralField::zeros(grid);
    grid.for_each_mode(|idx, k| {
        let m = k.iter().map(|c| c.abs()).max().unwrap_or(0);
        if m == 0 || m > kmax {
            return;
        }
        let w = 1.0 / (1.0 + (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64);
        for c in 0..3 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            f.comp_mut(c)[idx] = Complex64::new(w * re, w * im);
        }
    });
    let mut f = leray_project(&make_hermitian(&f));
    let e = norm_sq(&f);
    if e == 0.0 {
        return Err(Error::param("kmax", "band holds no solenoidal modes"));
    }
    f.scale(1.0 / e.sqrt());
    Ok(f)
}

fn set_mean(f: &mut SpectralField, mean: [f64; 3]) {
    for (c, m) in mean.iter().enumerate() {
        f.comp_mut(c)[0] = Complex64::new(*m, 0.0);
    }
}

/// Build the initial state at `t = 0`.
pub fn make_ic(spec: &ICSpec, grid: &Grid) -> Result<State> {
    for (name, v) in [("u_scale", spec.u_scale), ("b_scale", spec.b_scale)] {
        if !v.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    let (mut u, mut b) = match &spec.kind {
        IcKind::SingleMode { k, direction } => {
            let k = *k;
            if k == [0, 0, 0] || grid.locate(k).is_none() && grid.locate(k.map(|c| -c)).is_none() || grid.is_aliased(k) {
                return Err(Error::ModeOutsideGrid { mode: k, n: grid.n() });
            }
            let e = *direction;
            let dot: f64 = (0..3).map(|i| e[i] * k[i] as f64).sum();
            let en = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            let kn = k.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
            if en == 0.0 || dot.abs() > 1e-12 * en * kn {
                return Err(Error::param("direction", "must be nonzero and orthogonal to k"));
            }
            // store at whichever of ±k is in the half-spectrum
            let kk = if grid.locate(k).is_some() { k } else { k.map(|c| -c) };
            let mode = |amp: f64| -> Result<SpectralField> {
                let mut f = SpectralField::zeros(grid);
                f.set_conjugate_pair(kk, e.map(|v| Complex64::new(0.5 * amp * v, 0.0)))?;
                Ok(f)
            };
            (mode(spec.u_scale)?, mode(spec.b_scale)?)
        }
        IcKind::RandomBand { kmax } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut u = random_solenoidal(grid, *kmax, &mut rng)?;
            let mut b = random_solenoidal(grid, *kmax, &mut rng)?;
            if spec.u_scale < 0.0 || spec.b_scale < 0.0 {
                return Err(Error::param("energy", "targets must be >= 0"));
            }
            u.scale(spec.u_scale.sqrt());
            b.scale(spec.b_scale.sqrt());
            (u, b)
        }
        IcKind::TaylorGreenLike => {
            if grid.is_aliased([1, 1, 1]) {
                return Err(Error::ModeOutsideGrid { mode: [1, 1, 1], n: grid.n() });
            }
            let k0 = grid.k0();
            let (au, ab) = (spec.u_scale, spec.b_scale);
            let u = transform_forward(&PhysicalField::from_fn(grid, Padding::None, |x| {
                let (sx, cx) = (k0 * x[0]).sin_cos();
                let (sy, cy) = (k0 * x[1]).sin_cos();
                let cz = (k0 * x[2]).cos();
                [au * sx * cy * cz, -au * cx * sy * cz, 0.0]
            }));
            let b = transform_forward(&PhysicalField::from_fn(grid, Padding::None, |x| {
                [ab * (k0 * x[2]).sin(), ab * (k0 * x[0]).sin(), ab * (k0 * x[1]).sin()]
            }));
            // clean roundoff outside the resolved modes
            (leray_project(&dealias(&u)), leray_project(&dealias(&b)))
        }
    };
    set_mean(&mut u, spec.mean_u);
    set_mean(&mut b, spec.mean_b);
    State::new(u, b, 0.0)
}

pub type Profile = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;

/// `amp(t) * profile(x)`, with `amp_dot` the derivative of `amp`.
#[derive(Clone)]
pub struct Separable {
    pub profile: Profile,
    pub amp: Weight,
    pub amp_dot: Weight,
}

impl Separable {
    pub fn zero() -> Self {
        Separable {
            profile: Arc::new(|_| [0.0; 3]),
            amp: Arc::new(|_| 0.0),
            amp_dot: Arc::new(|_| 0.0),
        }
    }
}

/// Manufactured `(u*, b*)` pair of separable fields on `[0, L]^3`.
#[derive(Clone)]
pub struct ManufacturedPair {
    pub u: Separable,
    pub b: Separable,
    pub l: f64,
}

impl ManufacturedPair {
    /// Transverse single mode decaying at the viscous rate: an exact
    /// solution of the undamped, unforced system.
    pub fn decaying_mode(l: f64, nu: f64) -> Self {
        let k0 = 2.0 * PI / l;
        let rate = nu * k0 * k0;
        ManufacturedPair {
            u: Separable {
                profile: Arc::new(move |x| [0.0, (k0 * x[0]).cos(), 0.0]),
                amp: Arc::new(move |t| (-rate * t).exp()),
                amp_dot: Arc::new(move |t| -rate * (-rate * t).exp()),
            },
            b: Separable::zero(),
            l,
        }
    }

    /// Time-independent profiles with all modes present: velocity
    /// `(φ(y), φ(z), φ(x))`, field `(ψ(z), ψ(x), ψ(y))` with
    /// `φ(s) = 1/(1 - r cos(2πs/L))`, `r = 2ρ/(1+ρ^2)`, whose Fourier
    /// coefficients decay like `ρ^|k|`; `ψ = φ - mean φ`.
    pub fn static_profiles(l: f64, rho: f64) -> Self {
        let mut pair = Self::geometric(l, rho);
        pair.u.amp = Arc::new(|_| 1.0);
        pair.u.amp_dot = Arc::new(|_| 0.0);
        pair.b.amp = Arc::new(|_| 0.5);
        pair.b.amp_dot = Arc::new(|_| 0.0);
        pair
    }

    /// Geometric-spectrum profiles (see [`Self::static_profiles`]) with
    /// amplitudes `1 + sin(3t)/4` and `cos(2t)/2`.
    pub fn geometric(l: f64, rho: f64) -> Self {
        let r = 2.0 * rho / (1.0 + rho * rho);
        let k0 = 2.0 * PI / l;
        let mean = 1.0 / (1.0 - r * r).sqrt();
        let phi = move |s: f64| 1.0 / (1.0 - r * (k0 * s).cos());
        ManufacturedPair {
            u: Separable {
                profile: Arc::new(move |x| [phi(x[1]), phi(x[2]), phi(x[0])]),
                amp: Arc::new(|t| 1.0 + 0.25 * (3.0 * t).sin()),
                amp_dot: Arc::new(|t| 0.75 * (3.0 * t).cos()),
            },
            b: Separable {
                profile: Arc::new(move |x| [phi(x[2]) - mean, phi(x[0]) - mean, phi(x[1]) - mean]),
                amp: Arc::new(|t| 0.5 * (2.0 * t).cos()),
                amp_dot: Arc::new(|t| -(2.0 * t).sin()),
            },
            l,
        }
    }

    /// Low-order trigonometric polynomial profiles (modes up to 2).
    pub fn trig_polynomial(l: f64) -> Self {
        let k0 = 2.0 * PI / l;
        let f = move |a: f64, b: f64| (k0 * a).sin() + 0.5 * (2.0 * k0 * b).cos();
        let g = move |a: f64, b: f64| (k0 * a).cos() + 0.3 * (2.0 * k0 * b).sin();
        ManufacturedPair {
            u: Separable {
                profile: Arc::new(move |x| [f(x[1], x[2]), f(x[2], x[0]), f(x[0], x[1])]),
                amp: Arc::new(|t| 0.5 + (2.0 * t).cos()),
                amp_dot: Arc::new(|t| -2.0 * (2.0 * t).sin()),
            },
            b: Separable {
                profile: Arc::new(move |x| [g(x[2], x[1]), g(x[0], x[2]), g(x[1], x[0])]),
                amp: Arc::new(|t| 0.2 + (3.0 * t).sin()),
                amp_dot: Arc::new(|t| 3.0 * (3.0 * t).cos()),
            },
            l,
        }
    }

    /// Reference grid for forcing assembly and error measurement.
    pub fn reference_grid(&self, solver: &Grid) -> Result<Grid> {
        Grid::new(solver.n().max(32) * 2, solver.l())
    }

    fn check_box(&self, grid: &Grid) -> Result<()> {
        if self.l.to_bits() != grid.l().to_bits() {
            return Err(Error::GridMismatch {
                left_n: grid.n(),
                left_l: grid.l(),
                right_n: grid.n(),
                right_l: self.l,
            });
        }
        Ok(())
    }

    /// Spectral profiles `(U, B)` on `grid`, checked for solenoidality.
    pub fn profiles(&self, grid: &Grid) -> Result<(SpectralField, SpectralField)> {
        self.check_box(grid)?;
        let u = transform_forward(&PhysicalField::from_fn(grid, Padding::None, |x| (self.u.profile)(x)));
        let b = transform_forward(&PhysicalField::from_fn(grid, Padding::None, |x| (self.b.profile)(x)));
        for (field, f) in [("u", &u), ("b", &b)] {
            let residual = divergence_residual(f);
            if residual > DIVERGENCE_TOLERANCE {
                return Err(Error::NotDivergenceFree { field, residual });
            }
        }
        Ok((u, b))
    }

    /// Exact state at time `t` on `grid` (sampled, no truncation).
    pub fn exact_on(&self, grid: &Grid, t: f64) -> Result<State> {
        let (u, b) = self.profiles(grid)?;
        State::new(u.scaled((self.u.amp)(t)), b.scaled((self.b.amp)(t)), t)
    }

    /// Exact state projected onto the solver's resolved band, for use as
    /// an initial condition.
    pub fn initial_state(&self, solver: &Grid, t: f64) -> Result<State> {
        let reference = self.exact_on(&self.reference_grid(solver)?, t)?;
        let mut u = reference.u_hat.resample(solver)?;
        let mut b = reference.b_hat.resample(solver)?;
        dealias_in_place(&mut u);
        dealias_in_place(&mut b);
        State::new(u, b, t)
    }
}

/// Forcing that makes `(u*, b*)` solve the system on `solver`.
///
/// Each term is assembled on the reference grid, truncated to the solver
/// grid and dealiased. The velocity terms are Leray-projected, which stands
/// in for adding `∇p*` (the tendency projects anyway).
pub fn manufactured_forcing(pair: &ManufacturedPair, params: &PhysParams, solver: &Grid) -> Result<Forcing> {
    params.validate()?;
    pair.check_box(solver)?;
    let reference = pair.reference_grid(solver)?;
    let (u, b) = pair.profiles(&reference)?;
    let down = |f: SpectralField| -> Result<SpectralField> {
        let mut g = f.resample(solver)?;
        dealias_in_place(&mut g);
        Ok(g)
    };
    let (nu, kappa, a, alpha) = (params.nu, params.kappa, params.a, params.alpha);

    let mut forcing = Forcing::none();
    let (gu, gu_dot, gb, gb_dot) = (
        pair.u.amp.clone(),
        pair.u.amp_dot.clone(),
        pair.b.amp.clone(),
        pair.b.amp_dot.clone(),
    );

    forcing.push(gu_dot, Some(down(u.clone())?), None);
    forcing.push(gu.clone(), Some(down(laplacian(&u).scaled(-nu))?), None);
    let g2 = gu.clone();
    forcing.push(
        Arc::new(move |t| g2(t) * g2(t)),
        Some(down(leray_project(&advect(&u, &u)?))?),
        None,
    );
    let h2 = gb.clone();
    forcing.push(
        Arc::new(move |t| h2(t) * h2(t)),
        Some(down(leray_project(&advect(&b, &b)?).scaled(-1.0))?),
        None,
    );
    if a != 0.0 {
        let gd = gu.clone();
        forcing.push(
            Arc::new(move |t| {
                let g = gd(t);
                a * g.abs().powf(2.0 * alpha) * g
            }),
            Some(down(leray_project(&damping(&u, 1.0, alpha)?))?),
            None,
        );
    }

    forcing.push(gb_dot, None, Some(down(b.clone())?));
    forcing.push(gb.clone(), None, Some(down(laplacian(&b).scaled(-kappa))?));
    let mut induction = advect(&u, &b)?;
    induction.axpy(-1.0, &advect(&b, &u)?);
    let (gu2, gb2) = (gu, gb);
    forcing.push(Arc::new(move |t| gu2(t) * gb2(t)), None, Some(down(induction)?));
    Ok(forcing)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    /// Levels are resolutions `N`; `dt` is held fixed.
    Spatial,
    /// Levels are step sizes; `N` is held fixed.
    Temporal,
}

#[derive(Clone)]
pub struct MmsConfig {
    pub pair: ManufacturedPair,
    pub params: PhysParams,
    pub t_end: f64,
    pub rk_order: RkOrder,
    /// Resolution for temporal studies.
    pub n: usize,
    /// Step for spatial studies.
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub kind: StudyKind,
    pub levels: Vec<f64>,
    /// Relative `L^2` error of `(u, b)` at `t_end`, per level.
    pub errors: Vec<f64>,
    /// `errors[i] / errors[i+1]`.
    pub ratios: Vec<f64>,
    /// `log(errors[i]/errors[i+1]) / log(refinement factor)`.
    pub orders: Vec<f64>,
}

fn check_levels(kind: StudyKind, levels: &[f64]) -> Result<()> {
    if levels.len() < 3 {
        return Err(Error::InvalidLevels(format!("need at least 3 levels, got {}", levels.len())));
    }
    for w in levels.windows(2) {
        let ok = match kind {
            StudyKind::Spatial => w[1] > w[0],
            StudyKind::Temporal => w[1] < w[0],
        };
        if !ok {
            return Err(Error::InvalidLevels(format!(
                "levels must strictly refine, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if levels.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidLevels("levels must be positive".into()));
    }
    if kind == StudyKind::Spatial && levels.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::InvalidLevels("resolutions must be integers".into()));
    }
    Ok(())
}

/// Forced run of the manufactured problem on `grid` with step `dt`;
/// returns the relative error at `t_end`.
pub fn mms_error(config: &MmsConfig, grid: &Grid, dt: f64) -> Result<f64> {
    let forcing = manufactured_forcing(&config.pair, &config.params, grid)?;
    let ic = config.pair.initial_state(grid, 0.0)?;
    let controls = TimeControls::fixed(dt, config.t_end, config.rk_order);
    let out = run(&ic, &config.params, &controls, &forcing, &mut [])?;
    let reference = config.pair.reference_grid(grid)?;
    let exact = config.pair.exact_on(&reference, config.t_end)?;
    let numerical = State::new(
        out.u_hat.resample(&reference)?,
        out.b_hat.resample(&reference)?,
        out.t,
    )?;
    Ok((separation_sq(&numerical, &exact)? / exact.energy()).sqrt())
}

pub fn convergence_study(kind: StudyKind, config: &MmsConfig, levels: &[f64]) -> Result<ConvergenceReport> {
    check_levels(kind, levels)?;
    let mut errors = Vec::with_capacity(levels.len());
    for &level in levels {
        let e = match kind {
            StudyKind::Spatial => mms_error(config, &Grid::new(level as usize, config.pair.l)?, config.dt)?,
            StudyKind::Temporal => mms_error(config, &Grid::new(config.n, config.pair.l)?, level)?,
        };
        errors.push(e);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let orders = ratios
        .iter()
        .zip(levels.windows(2))
        .map(|(r, w)| r.ln() / (w[0] / w[1]).ln().abs())
        .collect();
    Ok(ConvergenceReport {
        kind,
        levels: levels.to_vec(),
        errors,
        ratios,
        orders,
    })
}

/// One box-crossing time `L / ||u0||_inf` (nodal maximum).
pub fn default_horizon(state: &State) -> f64 {
    let umax = transform_backward(&state.u_hat, Padding::None).max_magnitude();
    state.grid().l() / umax
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependenceReport {
    pub deltas: Vec<f64>,
    /// `S(δ) = ||u_δ(T) - u(T)||^2 + ||b_δ(T) - b(T)||^2`.
    pub separations: Vec<f64>,
    /// `S(δ)/δ^2` (`None` for `δ = 0`).
    pub normalized: Vec<Option<f64>>,
    /// Ratios of successive normalized separations over the positive deltas.
    pub successive_ratios: Vec<f64>,
    pub t_end: f64,
    /// `S(0) = 0` wherever `δ = 0` was requested.
    pub zero_exact: bool,
    /// Last successive ratio within 10% of one.
    pub scaling_pass: bool,
    /// `α >= 3/2`; the scaling law is only claimed under it.
    pub hypothesis_ok: bool,
}

/// Perturb `base` along a fixed random solenoidal direction `(v, d)` with
/// `||v||^2 + ||d||^2 = δ^2` and compare trajectories at `controls.t_end`.
/// Every run shares `params` and `controls`.
pub fn dependence_experiment(
    base: &State,
    deltas: &[f64],
    params: &PhysParams,
    controls: &TimeControls,
    seed: u64,
) -> Result<DependenceReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidLevels("no deltas".into()));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidLevels("deltas must be finite and >= 0".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidLevels("deltas must strictly decrease".into()));
    }
    let grid = base.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kmax = band_limit(grid);
    let mut v = random_solenoidal(grid, kmax, &mut rng)?;
    let mut d = random_solenoidal(grid, kmax, &mut rng)?;
    v.scale(std::f64::consts::FRAC_1_SQRT_2);
    d.scale(std::f64::consts::FRAC_1_SQRT_2);

    let forcing = Forcing::none();
    let reference = run(base, params, controls, &forcing, &mut [])?;
    let mut separations = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut ic = base.clone();
        ic.u_hat.axpy(delta, &v);
        ic.b_hat.axpy(delta, &d);
        let out = run(&ic, params, controls, &forcing, &mut [])?;
        separations.push(separation_sq(&out, &reference)?);
    }
    let normalized: Vec<Option<f64>> = deltas
        .iter()
        .zip(&separations)
        .map(|(d, s)| (*d > 0.0).then(|| s / (d * d)))
        .collect();
    let positive: Vec<f64> = normalized.iter().flatten().copied().collect();
    let successive_ratios: Vec<f64> = positive.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(DependenceReport {
        deltas: deltas.to_vec(),
        zero_exact: deltas
            .iter()
            .zip(&separations)
            .all(|(d, s)| *d != 0.0 || *s == 0.0),
        scaling_pass: successive_ratios.last().is_some_and(|r| (r - 1.0).abs() <= 0.1),
        separations,
        normalized,
        successive_ratios,
        t_end: controls.t_end,
        hypothesis_ok: params.alpha >= 1.5,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementReport {
    pub resolutions: Vec<usize>,
    /// `||(u,b)_{N_i}(T) - (u,b)_{N_{i+1}}(T)||_2`, measured on the finer grid.
    pub differences: Vec<f64>,
    pub decreasing: bool,
}

/// Run the same initial condition at each resolution (zero-padded from
/// `ic`) and compare consecutive results. All grids must share `ic`'s box.
pub fn mode_refinement_check(
    ic: &State,
    params: &PhysParams,
    controls: &TimeControls,
    grids: &[Grid],
) -> Result<RefinementReport> {
    if grids.len() < 2 {
        return Err(Error::InvalidLevels("need at least two resolutions".into()));
    }
    if grids.windows(2).any(|w| w[1].n() <= w[0].n()) {
        return Err(Error::InvalidLevels("resolutions must increase".into()));
    }
    let coarse = &grids[0];
    let mut bad = None;
    ic.grid().for_each_mode(|idx, k| {
        let nonzero = (0..3).any(|c| ic.u_hat.comp(c)[idx] != Complex64::default() || ic.b_hat.comp(c)[idx] != Complex64::default());
        if nonzero && bad.is_none() && coarse.is_aliased(k) {
            bad = Some(k);
        }
    });
    if let Some(mode) = bad {
        return Err(Error::ModeOutsideGrid { mode, n: coarse.n() });
    }
    let mut finals = Vec::with_capacity(grids.len());
    for g in grids {
        let start = State::new(ic.u_hat.resample(g)?, ic.b_hat.resample(g)?, ic.t)?;
        finals.push(run(&start, params, controls, &Forcing::none(), &mut [])?);
    }
    let mut differences = Vec::with_capacity(grids.len() - 1);
    for (a, b) in finals.iter().zip(&finals[1..]) {
        let up = State::new(a.u_hat.resample(b.grid())?, a.b_hat.resample(b.grid())?, a.t)?;
        differences.push(separation_sq(&up, b)?.sqrt());
    }
    Ok(RefinementReport {
        resolutions: grids.iter().map(|g| g.n()).collect(),
        decreasing: differences.windows(2).all(|w| w[1] < w[0]),
        differences,
    })
}
