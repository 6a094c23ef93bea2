//! End-to-end acceptance checks. All criteria run inside one test so the
//! runtime budgets are measured without other tests competing for the CPU.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use mhdbfed_core::diagnostics::{
    absorbing_ball_radius, decay_envelope_check, energy_budget, monotonicity_check,
    stroock_varopoulos_check, MonitorSink,
};
use mhdbfed_core::integrator::{run, run_counted, RkOrder, TimeControls};
use mhdbfed_core::io::{read_snapshot_strict, CheckpointSink, TimeseriesSink};
use mhdbfed_core::spectral::divergence_residual;
use mhdbfed_core::verification::{
    convergence_study, dependence_experiment, make_ic, random_solenoidal, ICSpec,
    ManufacturedPair, MmsConfig, StudyKind,
};
use mhdbfed_core::{Forcing, Grid, Padding, PhysParams, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn line(text: &str) {
    // bypass the harness capture so the summary always reaches the log
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
    let _ = out.flush();
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn box_grid(n: usize) -> Grid {
    Grid::new(n, 2.0 * PI).unwrap()
}

fn params(nu: f64, kappa: f64, a: f64, alpha: f64) -> PhysParams {
    PhysParams::new(nu, kappa, a, alpha).unwrap()
}

fn exact_linear_decay() -> Outcome {
    let g = box_grid(16);
    let nu = 0.01;
    let ic = make_ic(&ICSpec::single_mode([1, 0, 0], [0.0, 1.0, 0.0], 1.0), &g).unwrap();
    let p = params(nu, nu, 0.0, 2.0);
    // the shear mode has no nonlinear term, so the integrating factor is
    // exact at any step
    let controls = TimeControls::fixed(0.05, 1.0, RkOrder::Four);
    let out = run(&ic, &p, &controls, &Forcing::none(), &mut []).unwrap();
    let c0 = ic.u_hat.mode([1, 0, 0]).unwrap()[1];
    let c1 = out.u_hat.mode([1, 0, 0]).unwrap()[1];
    let amplitude = c1 / c0;
    let err = (amplitude - (-nu).exp()).norm();
    Outcome {
        pass: err <= 1e-12 && out.t == 1.0,
        detail: format!("amplitude {:.15}, |error| {err:.2e}", amplitude.re),
    }
}

fn energy_identity() -> Outcome {
    let g = box_grid(16);
    let p = params(0.1, 0.1, 1.0, 2.0);
    let ic = make_ic(&ICSpec::random_band(4, 1.0, 1.0, 11), &g).unwrap();
    let order = RkOrder::Two;
    let mut residuals = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let mut sink = MonitorSink::new(p, 1);
        let controls = TimeControls::fixed(dt, 1.0, order);
        run(&ic, &p, &controls, &Forcing::none(), &mut [&mut sink]).unwrap();
        let budget = energy_budget(&sink.records, &p, Some(order)).unwrap();
        residuals.push(budget.residual.abs());
    }
    let orders: Vec<f64> = residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let nominal = order.order() as f64;
    Outcome {
        pass: orders.iter().all(|o| (o - nominal).abs() <= 0.2),
        detail: format!("residuals {}, orders {orders:.3?} (nominal {nominal})", sci(&residuals)),
    }
}

fn constraint_propagation() -> Outcome {
    let g = box_grid(8);
    let p = params(0.05, 0.05, 1.0, 2.0);
    let mut spec = ICSpec::random_band(2, 0.05, 0.05, 5);
    spec.mean_u = [0.6, -0.3, 0.2];
    spec.mean_b = [0.2, 0.1, -0.4];
    let ic = make_ic(&spec, &g).unwrap();
    let controls = TimeControls::fixed(1e-3, 10.0, RkOrder::Two);
    let mut sink = MonitorSink::new(p, 1);
    let out = run_counted(&ic, &p, &controls, &Forcing::none(), &mut [&mut sink]).unwrap();
    let recs = &sink.records;
    let max_div = recs
        .iter()
        .map(|r| r.div_u_res.max(r.div_b_res))
        .fold(0.0, f64::max);
    let b0 = recs[0].mean_b;
    let drift = recs
        .iter()
        .flat_map(|r| (0..3).map(move |c| (r.mean_b[c] - b0[c]).abs()))
        .fold(0.0, f64::max);
    let norm = |m: [f64; 3]| (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    let strictly = recs.windows(2).all(|w| norm(w[1].mean_u) < norm(w[0].mean_u));
    let (u0, u1) = (norm(recs[0].mean_u), norm(recs[recs.len() - 1].mean_u));
    Outcome {
        pass: out.steps >= 10_000 && max_div < 1e-10 && drift < 1e-13 && strictly,
        detail: format!(
            "{} steps, max div residual {max_div:.2e}, mean b drift {drift:.2e}, |mean u| {u0:.4} -> {u1:.4} strictly decreasing: {strictly}",
            out.steps
        ),
    }
}

fn absorbing_ball() -> Outcome {
    let g = box_grid(16);
    let p = params(0.1, 0.1, 1.0, 2.0);
    let r_sq = absorbing_ball_radius(&p, g.l()).unwrap();
    let e0 = 10.0 * r_sq;
    let ic = make_ic(&ICSpec::random_band(4, 0.5 * e0, 0.5 * e0, 3), &g).unwrap();
    let controls = TimeControls {
        dt_init: 1e-3,
        dt_min: 1e-6,
        dt_max: 0.02,
        cfl_safety: 0.5,
        t_end: 50.0,
        rk_order: RkOrder::Four,
    };
    let mut sink = MonitorSink::new(p, 1);
    run(&ic, &p, &controls, &Forcing::none(), &mut [&mut sink]).unwrap();
    let report = decay_envelope_check(&sink.records, &p, g.l()).unwrap();
    let entered = report.entered_at.is_some_and(|t| t < 50.0);
    let bounded = report.final_quartile_max <= 1.05 * r_sq;
    Outcome {
        pass: (r_sq - 24.805).abs() < 5e-4 && report.nonincreasing && entered && bounded,
        detail: format!(
            "R^2 {r_sq:.4}, E0 {:.2}, nonincreasing {}, entered at t = {:?}, final-quartile max E {:.3e}",
            sink.records[0].energy, report.nonincreasing, report.entered_at, report.final_quartile_max
        ),
    }
}

fn random_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    [0; 3].map(|_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Minimum over `t` in `[-1, 1]` of the ratio for collinear `x = e`,
/// `y = t e`, scanned on a fine grid. Rotation and scaling invariance
/// reduce the general case to this one.
fn collinear_oracle(alpha: f64) -> f64 {
    let f = |s: f64| s.abs().powf(2.0 * alpha) * s;
    (0..=200_000)
        .map(|i| -1.0 + i as f64 * 1e-5)
        .filter(|t| (1.0 - t).abs() > 1e-9)
        .map(|t| (f(1.0) - f(t)) * (1.0 - t) / ((1.0 - t).powi(2) * (1.0 + t.abs()).powf(2.0 * alpha)))
        .fold(f64::INFINITY, f64::min)
}

fn monotonicity() -> Outcome {
    // frozen from `collinear_oracle`; attained at y = -x
    let frozen = [(1.5, 0.125), (2.0, 0.0625)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pass = true;
    let mut detail = Vec::new();
    for (alpha, c) in frozen {
        let oracle = collinear_oracle(alpha);
        pass &= (oracle - c).abs() <= 1e-12;
        let mut min_ratio = f64::INFINITY;
        let mut min_rhs = f64::INFINITY;
        for i in 0..1_000_000 {
            let x = random_vector(&mut rng);
            let y = if i % 10 == 0 {
                let s = -rng.random_range(0.5..2.0);
                x.map(|v| s * v)
            } else {
                random_vector(&mut rng)
            };
            let r = monotonicity_check(x, y, alpha).unwrap();
            min_rhs = min_rhs.min(r.rhs);
            if let Some(q) = r.ratio {
                min_ratio = min_ratio.min(q);
            }
        }
        pass &= min_rhs >= 0.0 && min_ratio >= c * (1.0 - 1e-12);
        detail.push(format!("alpha {alpha}: oracle c {oracle:.6}, min ratio {min_ratio:.6}, min rhs {min_rhs:.2e}"));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn stroock_varopoulos() -> Outcome {
    let g = box_grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let alphas = [1.0, 1.5, 2.0, 3.0];
    let mut worst = [f64::INFINITY; 4];
    let mut all = true;
    for i in 0..500 {
        let kmax = 1 + (i % 5) as i64;
        let b = random_solenoidal(&g, kmax, &mut rng).unwrap();
        for (j, alpha) in alphas.iter().enumerate() {
            let r = stroock_varopoulos_check(&b, *alpha, Padding::Times(2)).unwrap();
            all &= r.passes(1e-3);
            worst[j] = worst[j].min(r.ratio.unwrap_or(f64::NAN));
        }
    }
    Outcome {
        pass: all,
        detail: format!("500 fields, min ratio per alpha {alphas:?}: {worst:.6?}"),
    }
}

fn continuous_dependence() -> Outcome {
    let g = box_grid(16);
    let p = params(0.1, 0.1, 1.0, 2.0);
    let base = make_ic(&ICSpec::random_band(4, 2.0, 1.0, 21), &g).unwrap();
    let controls = TimeControls::fixed(0.01, 1.0, RkOrder::Four);
    let r = dependence_experiment(&base, &[1e-3, 1e-4, 1e-5, 0.0], &p, &controls, 99).unwrap();
    let within = r.successive_ratios.iter().all(|q| (q - 1.0).abs() <= 0.1);
    Outcome {
        pass: within && r.zero_exact && r.hypothesis_ok && r.successive_ratios.len() == 2,
        detail: format!(
            "S/delta^2 {}, successive ratios {:.6?}, S(0) = {:e}",
            sci(&r.normalized.iter().flatten().copied().collect::<Vec<_>>()),
            r.successive_ratios,
            r.separations[3]
        ),
    }
}

fn mms_convergence() -> Outcome {
    let l = 2.0 * PI;
    let mut pass = true;
    let mut detail = Vec::new();
    // explicit damping stiffness grows like a|u|^{2α}; a = 1 at α = 2 is
    // unstable at the coarsest step for these amplitudes
    for (alpha, a_temporal) in [(1.0, 1.0), (2.0, 0.05)] {
        for order in [RkOrder::Two, RkOrder::Four] {
            let config = MmsConfig {
                pair: ManufacturedPair::trig_polynomial(l),
                params: params(0.1, 0.1, a_temporal, alpha),
                t_end: 0.5,
                rk_order: order,
                n: 16,
                dt: 0.0,
            };
            let r = convergence_study(StudyKind::Temporal, &config, &[1e-2, 5e-3, 2.5e-3]).unwrap();
            let nominal = order.order() as f64;
            pass &= r.orders.iter().all(|o| (o - nominal).abs() <= 0.2);
            detail.push(format!("temporal alpha {alpha} rk{nominal}: orders {:.3?}", r.orders));
        }
        let config = MmsConfig {
            pair: ManufacturedPair::geometric(l, 0.3),
            params: params(0.1, 0.1, 1.0, alpha),
            t_end: 0.1,
            rk_order: RkOrder::Four,
            n: 0,
            dt: 2.5e-3,
        };
        let r = convergence_study(StudyKind::Spatial, &config, &[8.0, 16.0, 32.0]).unwrap();
        pass &= r.ratios.iter().all(|q| *q >= 10.0);
        detail.push(format!(
            "spatial alpha {alpha}: errors {}, collapse {:.1?}",
            sci(&r.errors),
            r.ratios
        ));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn determinism_restart() -> Outcome {
    let g = box_grid(16);
    let p = params(0.1, 0.1, 1.0, 2.0);
    let ic = make_ic(&ICSpec::random_band(5, 2.0, 1.0, 8), &g).unwrap();
    let t_end = 1.0;
    let controls = TimeControls::fixed(0.01, t_end, RkOrder::Four);
    let dir = tempfile::tempdir().unwrap();

    let mut ckpt = CheckpointSink::new(dir.path(), p, 50);
    let full = run(&ic, &p, &controls, &Forcing::none(), &mut [&mut ckpt]).unwrap();
    let (_, t_half, path) = ckpt.written.iter().find(|(s, _, _)| *s == 50).unwrap().clone();
    let restart = read_snapshot_strict(&path, &g, &p).unwrap();
    let resumed = run(&restart, &p, &controls, &Forcing::none(), &mut []).unwrap();
    let diff = full.max_abs_diff(&resumed);

    let series = |name: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let mut sink = TimeseriesSink::create(&path, p, 5).unwrap();
        let ic = make_ic(&ICSpec::random_band(5, 2.0, 1.0, 8), &g).unwrap();
        run(&ic, &p, &controls, &Forcing::none(), &mut [&mut sink]).unwrap();
        sink.finish().unwrap();
        std::fs::read(path).unwrap()
    };
    let identical = series("a.csv") == series("b.csv");
    Outcome {
        pass: diff <= 1e-12 && resumed.t == full.t && identical,
        detail: format!(
            "checkpoint at t = {t_half}, max coefficient difference at T: {diff:e}, time series identical: {identical}"
        ),
    }
}

#[test]
fn acceptance_criteria() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 9] = [
        ("exact linear decay", exact_linear_decay, Duration::from_secs(1)),
        ("energy identity", energy_identity, Duration::from_secs(60)),
        ("constraint propagation", constraint_propagation, Duration::MAX),
        ("absorbing ball", absorbing_ball, Duration::from_secs(300)),
        ("monotonicity", monotonicity, Duration::from_secs(10)),
        ("Stroock-Varopoulos", stroock_varopoulos, Duration::from_secs(120)),
        ("continuous dependence", continuous_dependence, Duration::from_secs(300)),
        ("MMS convergence", mms_convergence, Duration::from_secs(300)),
        ("determinism/restart", determinism_restart, Duration::MAX),
    ];
    let mut failed = Vec::new();
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = outcome.pass && in_time;
        let limit = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(" (limit {}s)", budget.as_secs())
        };
        line(&format!(
            "criterion {} {name}: {} [{:.2}s{limit}] {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        ));
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn ic_divergence_is_roundoff() {
    let g = box_grid(16);
    let s: State = make_ic(&ICSpec::random_band(5, 1.0, 1.0, 1), &g).unwrap();
    assert!(divergence_residual(&s.u_hat) < 1e-14);
    assert!(divergence_residual(&s.b_hat) < 1e-14);
}
