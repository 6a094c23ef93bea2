//! Integrating-factor Runge–Kutta time stepping.
//!
//! With `E(h) = exp(-nu |k|^2 h)` for `u` (and `kappa` for `b`) the diffusion
//! is integrated exactly and only the remainder `N` (projected advection,
//! Lorentz force, damping, forcing) goes through the explicit tableau.

use crate::error::{Error, Result};
use crate::rhs::{check_divergence, nonlinear_tendency, Forcing, PhysParams};
use crate::spectral::{transform_backward, Padding, SpectralField};
use crate::state::State;

const EPS: f64 = 1e-30;
const MAX_HALVINGS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RkOrder {
    Two,
    Four,
}

impl RkOrder {
    pub fn order(self) -> u32 {
        match self {
            RkOrder::Two => 2,
            RkOrder::Four => 4,
        }
    }

    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(RkOrder::Two),
            4 => Ok(RkOrder::Four),
            _ => Err(Error::param("rk_order", format!("must be 2 or 4, got {order}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub rk_order: RkOrder,
}

impl TimeControls {
    /// Constant step `dt` (`dt_min = dt_init = dt_max`).
    pub fn fixed(dt: f64, t_end: f64, rk_order: RkOrder) -> Self {
        TimeControls {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            cfl_safety: 1.0,
            t_end,
            rk_order,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.dt_min == self.dt_max
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::param(
                "dt_init",
                format!(
                    "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                    self.dt_min, self.dt_init, self.dt_max
                ),
            ));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::param(
                "cfl_safety",
                format!("must lie in (0, 1], got {}", self.cfl_safety),
            ));
        }
        if !self.t_end.is_finite() {
            return Err(Error::param("t_end", "must be finite"));
        }
        Ok(())
    }
}

/// Step size and whether it lands exactly on `t_end`.
fn plan_step(state: &State, params: &PhysParams, controls: &TimeControls) -> (f64, bool) {
    let dt = if controls.is_fixed() {
        controls.dt_max
    } else {
        let grid = state.grid();
        let umax = transform_backward(&state.u_hat, Padding::None).max_magnitude();
        let bmax = transform_backward(&state.b_hat, Padding::None).max_magnitude();
        let advective = grid.dx() / (umax + bmax + EPS);
        let drag = 1.0 / (params.a * umax.powf(2.0 * params.alpha) + EPS);
        (controls.cfl_safety * advective.min(drag)).clamp(controls.dt_min, controls.dt_max)
    };
    let remaining = controls.t_end - state.t;
    if remaining <= dt * (1.0 + 1e-10) {
        (remaining.max(0.0), true)
    } else {
        (dt, false)
    }
}

/// `clamp(cfl * min(dx / (|u|_inf + |b|_inf), 1 / (a |u|_inf^{2α})), dt_min,
/// dt_max)`, cut to the time left before `t_end`. Sup norms are taken at the
/// collocation nodes.
pub fn choose_dt(state: &State, params: &PhysParams, controls: &TimeControls) -> f64 {
    plan_step(state, params, controls).0
}

struct Factors {
    u_full: Vec<f64>,
    u_half: Vec<f64>,
    b_full: Vec<f64>,
    b_half: Vec<f64>,
}

impl Factors {
    fn new(ksq: &[f64], params: &PhysParams, h: f64) -> Self {
        let f = |c: f64, tau: f64| ksq.iter().map(|k2| (-c * k2 * tau).exp()).collect();
        Factors {
            u_full: f(params.nu, h),
            u_half: f(params.nu, 0.5 * h),
            b_full: f(params.kappa, h),
            b_half: f(params.kappa, 0.5 * h),
        }
    }
}

fn lin(f: &SpectralField, e: &[f64]) -> SpectralField {
    let mut out = f.clone();
    out.apply_diagonal(e);
    out
}

/// `E x + h y` with the factor applied to `x` only.
fn lin_axpy(x: &SpectralField, e: &[f64], h: f64, y: &SpectralField) -> SpectralField {
    let mut out = lin(x, e);
    out.axpy(h, y);
    out
}

/// One integrating-factor RK step of size `dt` without retries. The input
/// must satisfy the divergence constraint.
pub fn if_rk_step(
    state: &State,
    dt: f64,
    params: &PhysParams,
    forcing: &Forcing,
    order: RkOrder,
) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    params.validate()?;
    check_divergence(state)?;
    let ksq = state.grid().k_squared();
    let e = Factors::new(&ksq, params, dt);
    let (u, b, t, h) = (&state.u_hat, &state.b_hat, state.t, dt);
    let n = |u: &SpectralField, b: &SpectralField, t: f64| nonlinear_tendency(u, b, t, params, forcing);

    let (u_next, b_next) = match order {
        RkOrder::Two => {
            let (ku1, kb1) = n(u, b, t)?;
            let us = lin(&u.add(&ku1.scaled(h)), &e.u_full);
            let bs = lin(&b.add(&kb1.scaled(h)), &e.b_full);
            let (ku2, kb2) = n(&us, &bs, t + h)?;
            let mut un = lin(&u.add(&ku1.scaled(0.5 * h)), &e.u_full);
            un.axpy(0.5 * h, &ku2);
            let mut bn = lin(&b.add(&kb1.scaled(0.5 * h)), &e.b_full);
            bn.axpy(0.5 * h, &kb2);
            (un, bn)
        }
        RkOrder::Four => {
            let (ku1, kb1) = n(u, b, t)?;
            let ua = lin(&u.add(&ku1.scaled(0.5 * h)), &e.u_half);
            let ba = lin(&b.add(&kb1.scaled(0.5 * h)), &e.b_half);
            let (ku2, kb2) = n(&ua, &ba, t + 0.5 * h)?;
            let ub = lin_axpy(u, &e.u_half, 0.5 * h, &ku2);
            let bb = lin_axpy(b, &e.b_half, 0.5 * h, &kb2);
            let (ku3, kb3) = n(&ub, &bb, t + 0.5 * h)?;
            let uc = lin_axpy(u, &e.u_full, h, &lin(&ku3, &e.u_half));
            let bc = lin_axpy(b, &e.b_full, h, &lin(&kb3, &e.b_half));
            let (ku4, kb4) = n(&uc, &bc, t + h)?;

            let mut un = lin(u, &e.u_full);
            un.axpy(h / 6.0, &lin(&ku1, &e.u_full));
            un.axpy(h / 3.0, &lin(&ku2.add(&ku3), &e.u_half));
            un.axpy(h / 6.0, &ku4);
            let mut bn = lin(b, &e.b_full);
            bn.axpy(h / 6.0, &lin(&kb1, &e.b_full));
            bn.axpy(h / 3.0, &lin(&kb2.add(&kb3), &e.b_half));
            bn.axpy(h / 6.0, &kb4);
            (un, bn)
        }
    };
    let next = State {
        u_hat: u_next,
        b_hat: b_next,
        t: t + h,
    };
    if !next.is_finite() {
        return Err(Error::BlowUp { t: next.t, retries: 0 });
    }
    Ok(next)
}

/// A step with rejection: on non-finite output `dt` is halved, at most
/// eight times. Returns the new state and the step actually taken.
pub fn advance(
    state: &State,
    dt: f64,
    params: &PhysParams,
    forcing: &Forcing,
    order: RkOrder,
) -> Result<(State, f64)> {
    let mut h = dt;
    for _ in 0..=MAX_HALVINGS {
        match if_rk_step(state, h, params, forcing, order) {
            Ok(next) => return Ok((next, h)),
            Err(Error::BlowUp { .. }) => h *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::BlowUp {
        t: state.t,
        retries: MAX_HALVINGS,
    })
}

/// Observer invoked by [`run`] at step 0, every `cadence()` steps and after
/// the final step.
pub trait StepSink {
    fn cadence(&self) -> usize {
        1
    }

    fn observe(&mut self, step: usize, state: &State) -> Result<()>;
}

/// Collects every observed state (cloned). Mostly useful in tests.
#[derive(Debug, Default)]
pub struct StateLog {
    pub cadence: usize,
    pub states: Vec<(usize, State)>,
}

impl StepSink for StateLog {
    fn cadence(&self) -> usize {
        self.cadence.max(1)
    }

    fn observe(&mut self, step: usize, state: &State) -> Result<()> {
        self.states.push((step, state.clone()));
        Ok(())
    }
}

/// Outcome of [`run_counted`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub state: State,
    pub steps: usize,
}

/// Integrate from `ic.t` to `controls.t_end`.
pub fn run(
    ic: &State,
    params: &PhysParams,
    controls: &TimeControls,
    forcing: &Forcing,
    sinks: &mut [&mut dyn StepSink],
) -> Result<State> {
    run_counted(ic, params, controls, forcing, sinks).map(|o| o.state)
}

/// [`run`], also reporting the number of steps taken.
pub fn run_counted(
    ic: &State,
    params: &PhysParams,
    controls: &TimeControls,
    forcing: &Forcing,
    sinks: &mut [&mut dyn StepSink],
) -> Result<RunOutcome> {
    controls.validate()?;
    params.validate()?;
    let mut state = ic.clone();
    let mut step = 0usize;
    let mut last_seen = vec![None; sinks.len()];
    notify(sinks, &mut last_seen, step, &state, false)?;
    while state.t < controls.t_end {
        let (dt, lands) = plan_step(&state, params, controls);
        if dt <= 0.0 {
            break;
        }
        let (mut next, taken) = advance(&state, dt, params, forcing, controls.rk_order)?;
        if lands && taken == dt {
            next.t = controls.t_end;
        }
        state = next;
        step += 1;
        notify(sinks, &mut last_seen, step, &state, false)?;
    }
    notify(sinks, &mut last_seen, step, &state, true)?;
    Ok(RunOutcome { state, steps: step })
}

fn notify(
    sinks: &mut [&mut dyn StepSink],
    last_seen: &mut [Option<usize>],
    step: usize,
    state: &State,
    finished: bool,
) -> Result<()> {
    for (sink, seen) in sinks.iter_mut().zip(last_seen.iter_mut()) {
        let due = if finished {
            *seen != Some(step)
        } else {
            step.is_multiple_of(sink.cadence().max(1))
        };
        if due {
            sink.observe(step, state)?;
            *seen = Some(step);
        }
    }
    Ok(())
}
