//! Monitors and inequality checks.

use crate::error::{Error, Result};
use crate::integrator::{RkOrder, StepSink};
use crate::rhs::{damping_factor, PhysParams};
use crate::spectral::{
    divergence_residual, grad_norm_sq, lp_integral, lp_norm, norm_sq, pow_half, scalar_forward,
    transform_backward, transform_forward, Grid, Padding, PhysicalField, PhysicalScalar,
    SpectralField,
};
use crate::state::State;

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    /// `||u||_2^2 + ||b||_2^2`.
    pub energy: f64,
    pub grad_u_sq: f64,
    pub grad_b_sq: f64,
    /// `||u||_{2α+2}^{2α+2}`.
    pub u_damp_norm: f64,
    /// `||b||_{3(α+1)/α}`; absent for `α = 0`.
    pub b_crit_norm: Option<f64>,
    pub div_u_res: f64,
    pub div_b_res: f64,
    pub mean_u: [f64; 3],
    pub mean_b: [f64; 3],
}

impl MonitorRecord {
    /// `2 nu ||∇u||^2 + 2 kappa ||∇b||^2 + 2 a ||u||_{2α+2}^{2α+2}`.
    pub fn dissipation(&self, params: &PhysParams) -> f64 {
        2.0 * (params.nu * self.grad_u_sq + params.kappa * self.grad_b_sq + params.a * self.u_damp_norm)
    }
}

/// Lebesgue norms are evaluated on the 3/2-padded grid.
pub fn monitor(state: &State, params: &PhysParams) -> Result<MonitorRecord> {
    let alpha = params.alpha;
    let u_pad = transform_backward(&state.u_hat, Padding::ThreeHalves);
    let u_damp_norm = lp_integral(&u_pad, 2.0 * alpha + 2.0)?;
    let b_crit_norm = if alpha > 0.0 {
        let b_pad = transform_backward(&state.b_hat, Padding::ThreeHalves);
        Some(lp_norm(&b_pad, 3.0 * (alpha + 1.0) / alpha)?)
    } else {
        None
    };
    Ok(MonitorRecord {
        t: state.t,
        energy: state.energy(),
        grad_u_sq: grad_norm_sq(&state.u_hat),
        grad_b_sq: grad_norm_sq(&state.b_hat),
        u_damp_norm,
        b_crit_norm,
        div_u_res: divergence_residual(&state.u_hat),
        div_b_res: divergence_residual(&state.b_hat),
        mean_u: state.u_hat.mean(),
        mean_b: state.b_hat.mean(),
    })
}

/// Records a [`MonitorRecord`] every `cadence` steps.
#[derive(Debug)]
pub struct MonitorSink {
    pub params: PhysParams,
    pub cadence: usize,
    pub records: Vec<MonitorRecord>,
}

impl MonitorSink {
    pub fn new(params: PhysParams, cadence: usize) -> Self {
        MonitorSink {
            params,
            cadence: cadence.max(1),
            records: Vec::new(),
        }
    }
}

impl StepSink for MonitorSink {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, _step: usize, state: &State) -> Result<()> {
        self.records.push(monitor(state, &self.params)?);
        Ok(())
    }
}

/// Squared absorbing-ball radius
/// `R^2 = L^3 a^{-1/(2α-1)} / max(kappa, nu) * (nu/λ)^{(2α+2)/(2α-1)}`.
pub fn absorbing_ball_radius(params: &PhysParams, l: f64) -> Result<f64> {
    params.check_long_time_hypotheses()?;
    let alpha = params.alpha;
    if alpha <= 0.5 {
        return Err(Error::UndefinedExponent { alpha });
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::param("L", format!("must be positive, got {l}")));
    }
    let lambda = (2.0 * std::f64::consts::PI / l).powi(2);
    let d = 2.0 * alpha - 1.0;
    Ok(l.powi(3) * params.a.powf(-1.0 / d) / params.kappa.max(params.nu)
        * (params.nu / lambda).powf((2.0 * alpha + 2.0) / d))
}

/// Constants of the provable envelope `E(t) <= E0 e^{-μt} + (K/μ)(1 - e^{-μt})`.
///
/// With `X = ||u||_2^2` and Hölder, `||u||_{2α+2}^{2α+2} >= |Ω|^{-α} X^{α+1}`,
/// so `μ_u X - 2a ||u||_{2α+2}^{2α+2} <= K = max_X (μ_u X - 2a|Ω|^{-α}X^{α+1})`.
/// `μ_u` is fixed by asking `K/μ_u = R^2`. The magnetic part uses Poincaré
/// (`b` has zero mean), giving `μ = min(2 kappa λ, μ_u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeRate {
    pub r_sq: f64,
    pub mu_u: f64,
    pub k_const: f64,
    pub mu: f64,
    /// `K / μ`, the level the envelope relaxes to.
    pub asymptote: f64,
}

pub fn envelope_rate(params: &PhysParams, l: f64) -> Result<EnvelopeRate> {
    let r_sq = absorbing_ball_radius(params, l)?;
    let alpha = params.alpha;
    let vol = l.powi(3);
    let lambda = (2.0 * std::f64::consts::PI / l).powi(2);
    let x_star = r_sq * (alpha + 1.0) / alpha;
    let mu_u = 2.0 * params.a * (alpha + 1.0) * (x_star / vol).powf(alpha);
    let k_const = mu_u * x_star * alpha / (alpha + 1.0);
    let mu = mu_u.min(2.0 * params.kappa * lambda);
    Ok(EnvelopeRate {
        r_sq,
        mu_u,
        k_const,
        mu,
        asymptote: k_const / mu,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub rate: EnvelopeRate,
    pub rigorous_pass: bool,
    pub rigorous_first_violation: Option<f64>,
    /// `(2/λ) max(kappa, nu)`, checked against `R^2` but only recorded.
    pub literal_rate: f64,
    pub literal_pass: bool,
    pub literal_first_violation: Option<f64>,
    /// Time after which the rigorous envelope lies below `1.05 R^2`
    /// (infinite if the asymptote is above that).
    pub entry_time: f64,
    /// First record with `E <= R^2`.
    pub entered_at: Option<f64>,
    pub final_quartile_max: f64,
    /// The final quartile starts after `entry_time`.
    pub limsup_applies: bool,
    pub limsup_pass: bool,
    pub nonincreasing: bool,
}

fn first_violation(series: &[MonitorRecord], e0: f64, t0: f64, rate: f64, level: f64) -> Option<f64> {
    let slack = 1e-10 * e0;
    series.iter().find_map(|r| {
        let decay = (-rate * (r.t - t0)).exp();
        let bound = e0 * decay + level * (1.0 - decay);
        (r.energy > bound + slack).then_some(r.t)
    })
}

/// Check an unforced series against the exponential envelope toward the
/// absorbing ball. The run must start with zero magnetic mean.
pub fn decay_envelope_check(
    series: &[MonitorRecord],
    params: &PhysParams,
    l: f64,
) -> Result<EnvelopeReport> {
    if series.len() < 16 {
        return Err(Error::SeriesTooShort {
            needed: 16,
            got: series.len(),
        });
    }
    let rate = envelope_rate(params, l)?;
    let first = &series[0];
    let (t0, e0) = (first.t, first.energy);
    let mean_b = first.mean_b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if mean_b > 1e-12 * (1.0 + (e0 / l.powi(3)).sqrt()) {
        return Err(Error::param("mean_b", format!("must be zero for the envelope, got {mean_b:e}")));
    }

    let rigorous = first_violation(series, e0, t0, rate.mu, rate.asymptote);
    let lambda = (2.0 * std::f64::consts::PI / l).powi(2);
    let literal_rate = 2.0 / lambda * params.kappa.max(params.nu);
    let literal = first_violation(series, e0, t0, literal_rate, rate.r_sq);

    let target = 1.05 * rate.r_sq;
    let entry_time = if e0 <= target {
        0.0
    } else if rate.asymptote >= target {
        f64::INFINITY
    } else {
        ((e0 - rate.asymptote) / (target - rate.asymptote)).ln() / rate.mu
    };
    let t1 = series.last().map_or(t0, |r| r.t);
    let q_start = t0 + 0.75 * (t1 - t0);
    let final_quartile_max = series
        .iter()
        .filter(|r| r.t >= q_start)
        .map(|r| r.energy)
        .fold(0.0, f64::max);
    let nonincreasing = series
        .windows(2)
        .all(|w| w[1].energy <= w[0].energy + 1e-12 * e0);

    Ok(EnvelopeReport {
        rate,
        rigorous_pass: rigorous.is_none(),
        rigorous_first_violation: rigorous,
        literal_rate,
        literal_pass: literal.is_none(),
        literal_first_violation: literal,
        entry_time,
        entered_at: series.iter().find(|r| r.energy <= rate.r_sq).map(|r| r.t),
        final_quartile_max,
        limsup_applies: q_start >= t0 + entry_time,
        limsup_pass: final_quartile_max <= target,
        nonincreasing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityReport {
    /// `(|x|^{2α}x - |y|^{2α}y).(x - y)`.
    pub rhs: f64,
    /// `rhs / (|x-y|^2 (|x|+|y|)^{2α})`, when the denominator is positive.
    pub ratio: Option<f64>,
}

pub fn monotonicity_check(x: [f64; 3], y: [f64; 3], alpha: f64) -> Result<MonotonicityReport> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be finite and >= 0, got {alpha}")));
    }
    let sq = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let (sx, sy) = (sq(x), sq(y));
    let (fx, fy) = (damping_factor(sx, alpha), damping_factor(sy, alpha));
    let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let rhs: f64 = (0..3).map(|i| (fx * x[i] - fy * y[i]) * d[i]).sum();
    let denom = sq(d) * (sx.sqrt() + sy.sqrt()).powf(2.0 * alpha);
    Ok(MonotonicityReport {
        rhs,
        ratio: (denom > 0.0).then(|| rhs / denom),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvReport {
    /// `∫ ∇b : ∇(b |b|^{(α+3)/α})`.
    pub lhs: f64,
    /// `(4/9) (α(2α+3)/(α+1)^2) ||∇ |b|^{3(α+1)/(2α)}||_2^2`.
    pub rhs0: f64,
    /// `lhs / rhs0`; `None` when `rhs0 = 0`.
    pub ratio: Option<f64>,
    /// The field vanished identically.
    pub empty: bool,
}

impl SvReport {
    pub fn passes(&self, slack: f64) -> bool {
        !self.empty && self.ratio.map_or(self.lhs >= 0.0, |r| r >= 1.0 - slack)
    }
}

pub fn sv_prefactor(alpha: f64) -> f64 {
    4.0 / 9.0 * (alpha * (2.0 * alpha + 3.0) / (alpha + 1.0).powi(2))
}

/// Coefficient-space `L^3 sum |k|^2 Re(f . conj g)` over the full spectrum.
fn weighted_gradient_pairing(f: &[&[crate::spectral::Complex64]], g: &[&[crate::spectral::Complex64]], grid: &Grid) -> f64 {
    let nz = grid.nz();
    let ksq = grid.k_squared();
    let mut sum = 0.0;
    for (fc, gc) in f.iter().zip(g) {
        for (idx, (a, b)) in fc.iter().zip(gc.iter()).enumerate() {
            sum += grid.weight(idx % nz) * ksq[idx] * (a.re * b.re + a.im * b.im);
        }
    }
    sum * grid.volume()
}

/// Both sides of the Stroock–Varopoulos step, by quadrature on a grid of
/// `padding.size(N)` points per side (the Nyquist mode of `b` is dropped).
pub fn stroock_varopoulos_check(b: &SpectralField, alpha: f64, padding: Padding) -> Result<SvReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
    }
    if b.max_mode_norm() == 0.0 {
        return Ok(SvReport {
            lhs: 0.0,
            rhs0: 0.0,
            ratio: None,
            empty: true,
        });
    }
    let grid = b.grid();
    let m = padding.size(grid.n());
    let fine = Grid::new(m, grid.l())?;
    let bf = b.resample(&fine)?;
    let phys = transform_backward(&bf, Padding::None);
    let q = (alpha + 3.0) / alpha;
    let p = 3.0 * (alpha + 1.0) / (2.0 * alpha);

    let len = phys.len();
    let mut g = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut h = vec![0.0; len];
    for i in 0..len {
        let s = phys.comp(0)[i].powi(2) + phys.comp(1)[i].powi(2) + phys.comp(2)[i].powi(2);
        let w = pow_half(s, q);
        for (c, gc) in g.iter_mut().enumerate() {
            gc[i] = phys.comp(c)[i] * w;
        }
        h[i] = pow_half(s, p);
    }
    let g_hat = transform_forward(&PhysicalField::new(&fine, Padding::None, g)?);
    let h_hat = scalar_forward(&PhysicalScalar::new(&fine, Padding::None, h)?);

    let lhs = weighted_gradient_pairing(
        &[bf.comp(0), bf.comp(1), bf.comp(2)],
        &[g_hat.comp(0), g_hat.comp(1), g_hat.comp(2)],
        &fine,
    );
    let rhs0 = sv_prefactor(alpha)
        * weighted_gradient_pairing(&[h_hat.coeffs()], &[h_hat.coeffs()], &fine);
    Ok(SvReport {
        lhs,
        rhs0,
        ratio: (rhs0 > 0.0).then(|| lhs / rhs0),
        empty: false,
    })
}

/// Windowed terms of the energy identity
/// `E(t1) - E(t0) + ∫ (2nu||∇u||^2 + 2kappa||∇b||^2 + 2a||u||^{2α+2}) dt = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBudget {
    pub t0: f64,
    pub t1: f64,
    pub d_e: f64,
    /// Trapezoid rule over the records.
    pub dissipation_integral: f64,
    pub residual: f64,
    pub max_dt: f64,
    /// Expected residual scale `max_dt^{min(order, 2)}`, when an order is given.
    pub residual_scale: Option<f64>,
}

pub fn energy_budget(
    window: &[MonitorRecord],
    params: &PhysParams,
    order: Option<RkOrder>,
) -> Result<EnergyBudget> {
    if window.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: window.len(),
        });
    }
    let mut integral = 0.0;
    let mut max_dt: f64 = 0.0;
    for w in window.windows(2) {
        let dt = w[1].t - w[0].t;
        max_dt = max_dt.max(dt);
        integral += 0.5 * dt * (w[0].dissipation(params) + w[1].dissipation(params));
    }
    let (first, last) = (&window[0], &window[window.len() - 1]);
    let d_e = last.energy - first.energy;
    Ok(EnergyBudget {
        t0: first.t,
        t1: last.t,
        d_e,
        dissipation_integral: integral,
        residual: d_e + integral,
        max_dt,
        residual_scale: order.map(|o| max_dt.powi(o.order().min(2) as i32)),
    })
}

/// `norm_sq` of the difference of two states.
pub fn separation_sq(a: &State, b: &State) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    Ok(norm_sq(&a.u_hat.sub(&b.u_hat)) + norm_sq(&a.b_hat.sub(&b.b_hat)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::Complex64;

    fn params(alpha: f64) -> PhysParams {
        PhysParams::new(0.1, 0.1, 1.0, alpha).unwrap()
    }

    #[test]
    fn zero_state_monitor() {
        let g = Grid::new(8, 1.0).unwrap();
        let r = monitor(&State::zeros(&g), &params(1.0)).unwrap();
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.u_damp_norm, 0.0);
        assert_eq!(r.b_crit_norm, Some(0.0));
        assert_eq!((r.div_u_res, r.div_b_res), (0.0, 0.0));
        let r0 = monitor(&State::zeros(&g), &params(0.0)).unwrap();
        assert_eq!(r0.b_crit_norm, None);
    }

    #[test]
    fn single_mode_energy() {
        let l = 1.7;
        let g = Grid::new(8, l).unwrap();
        let amp = 1.3;
        let mut u = SpectralField::zeros(&g);
        u.set_conjugate_pair([0, 1, 0], [Complex64::new(0.5 * amp, 0.0), Complex64::default(), Complex64::default()])
            .unwrap();
        let s = State::new(u, SpectralField::zeros(&g), 0.0).unwrap();
        let r = monitor(&s, &params(1.0)).unwrap();
        assert!((r.energy - amp * amp * l.powi(3) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn radius_examples() {
        let l = 2.0 * PI;
        let r = absorbing_ball_radius(&params(2.0), l).unwrap();
        assert!((r - (2.0 * PI).powi(3) * 0.1).abs() < 1e-12);
        assert!((r - 24.805).abs() < 1e-3);

        let mut last = f64::INFINITY;
        for a in [0.5, 1.0, 10.0, 1e3, 1e6, 1e9] {
            let p = PhysParams::new(0.1, 0.1, a, 2.0).unwrap();
            let r = absorbing_ball_radius(&p, l).unwrap();
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-2 * r);
        assert!(matches!(
            absorbing_ball_radius(&params(0.5), l),
            Err(Error::UndefinedExponent { .. })
        ));
    }

    #[test]
    fn envelope_constant_is_maximum() {
        let l = 2.0 * PI;
        let p = params(2.0);
        let rate = envelope_rate(&p, l).unwrap();
        let vol = l.powi(3);
        // dense scan of mu_u X - 2a|Ω|^{-α}X^{α+1}
        let mut best: f64 = 0.0;
        for i in 0..200_000 {
            let x = i as f64 * 1e-3;
            best = best.max(rate.mu_u * x - 2.0 * p.a * vol.powf(-p.alpha) * x.powf(p.alpha + 1.0));
        }
        assert!((best - rate.k_const).abs() < 1e-6 * rate.k_const);
        assert!((rate.k_const / rate.mu_u - rate.r_sq).abs() < 1e-12 * rate.r_sq);
        assert!((rate.mu_u - 0.1349).abs() < 1e-3);
        assert_eq!(rate.mu, rate.mu_u);
    }

    fn synthetic(energies: impl Fn(f64) -> f64) -> Vec<MonitorRecord> {
        (0..40)
            .map(|i| {
                let t = i as f64;
                MonitorRecord {
                    t,
                    energy: energies(t),
                    grad_u_sq: 0.0,
                    grad_b_sq: 0.0,
                    u_damp_norm: 0.0,
                    b_crit_norm: None,
                    div_u_res: 0.0,
                    div_b_res: 0.0,
                    mean_u: [0.0; 3],
                    mean_b: [0.0; 3],
                }
            })
            .collect()
    }

    #[test]
    fn envelope_reports() {
        let l = 2.0 * PI;
        let p = params(2.0);
        let r2 = absorbing_ball_radius(&p, l).unwrap();
        let inside = decay_envelope_check(&synthetic(|t| 0.5 * r2 * (-0.1 * t).exp()), &p, l).unwrap();
        assert!(inside.rigorous_pass && inside.nonincreasing && inside.limsup_pass);
        assert_eq!(inside.entered_at, Some(0.0));
        assert_eq!(inside.entry_time, 0.0);

        let bad = decay_envelope_check(&synthetic(|t| if t < 10.0 { 5.0 * r2 } else { 9.0 * r2 }), &p, l).unwrap();
        assert!(!bad.rigorous_pass);
        assert_eq!(bad.rigorous_first_violation, Some(1.0));
        assert!(!bad.nonincreasing);

        let short = synthetic(|_| 1.0);
        assert!(matches!(
            decay_envelope_check(&short[..15], &p, l),
            Err(Error::SeriesTooShort { needed: 16, got: 15 })
        ));
    }

    #[test]
    fn monotonicity_examples() {
        let x = [0.3, -1.2, 0.7];
        let same = monotonicity_check(x, x, 1.5).unwrap();
        assert_eq!(same.rhs, 0.0);
        assert_eq!(same.ratio, None);
        let origin = monotonicity_check(x, [0.0; 3], 1.5).unwrap();
        let n2: f64 = x.iter().map(|v| v * v).sum();
        assert!((origin.rhs - n2.powf(2.5)).abs() < 1e-14);
        assert!((origin.ratio.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sv_constant_magnitude_and_empty() {
        let l = 2.0 * PI;
        let g = Grid::new(16, l).unwrap();
        let c = 1.7;
        let b = transform_forward(&PhysicalField::from_fn(&g, Padding::None, |x| {
            [c * x[2].cos(), c * x[2].sin(), 0.0]
        }));
        let r = stroock_varopoulos_check(&b, 1.5, Padding::Times(2)).unwrap();
        assert!(r.rhs0.abs() < 1e-20 * r.lhs);
        assert!(r.lhs > 0.0 && r.passes(1e-3));
        let z = stroock_varopoulos_check(&SpectralField::zeros(&g), 1.0, Padding::Times(2)).unwrap();
        assert!(z.empty && !z.passes(1e-3));
        assert!(stroock_varopoulos_check(&b, 0.0, Padding::Times(2)).is_err());
    }

    #[test]
    fn sv_prefactor_alpha_three() {
        assert!((sv_prefactor(3.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn budget_examples() {
        let series = synthetic(|_| 0.0);
        let b = energy_budget(&series, &params(1.0), Some(RkOrder::Four)).unwrap();
        assert_eq!((b.d_e, b.dissipation_integral, b.residual), (0.0, 0.0, 0.0));
        assert_eq!(b.residual_scale, Some(1.0));
        assert!(energy_budget(&series[..1], &params(1.0), None).is_err());
    }
}
