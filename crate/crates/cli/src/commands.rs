use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhdbfed_core::diagnostics::{absorbing_ball_radius, decay_envelope_check, MonitorRecord};
use mhdbfed_core::integrator::{run_counted, StepSink};
use mhdbfed_core::io::{read_snapshot_strict, read_timeseries, write_snapshot, CheckpointSink, TimeseriesSink, TIMESERIES_HEADER};
use mhdbfed_core::verification::{convergence_study, dependence_experiment, make_ic, IcKind, MmsConfig, StudyKind};
use mhdbfed_core::{Forcing, PhysParams, State};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::SimConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Contract {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Contract {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Contract {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub command: String,
    pub passed: bool,
    pub contracts: Vec<Contract>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub results: Value,
}

impl Summary {
    fn new(command: &str, contracts: Vec<Contract>, results: Value) -> Self {
        Summary {
            command: command.into(),
            passed: contracts.iter().all(|c| c.passed),
            contracts,
            warnings: Vec::new(),
            error: None,
            results,
        }
    }

    pub fn failed(command: &str, error: String, warnings: Vec<String>) -> Self {
        Summary {
            command: command.into(),
            passed: false,
            warnings,
            error: Some(error),
            results: Value::Null,
            ..Default::default()
        }
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let path = out.join("summary.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub struct Ctx {
    pub config: SimConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

fn initial_state(ctx: &Ctx) -> Result<State> {
    let grid = ctx.config.grid()?;
    match &ctx.config.output.restart {
        Some(path) => Ok(read_snapshot_strict(path, &grid, &ctx.config.params()?)?),
        None => Ok(make_ic(&ctx.config.ic_spec(ctx.seed), &grid)?),
    }
}

fn max_abs_drift(records: &[MonitorRecord], pick: impl Fn(&MonitorRecord) -> [f64; 3]) -> f64 {
    let first = pick(&records[0]);
    records
        .iter()
        .flat_map(|r| {
            let m = pick(r);
            (0..3).map(move |c| (m[c] - first[c]).abs())
        })
        .fold(0.0, f64::max)
}

/// Contracts every unforced run must satisfy.
fn run_contracts(records: &[MonitorRecord], params: &PhysParams, l: f64) -> Vec<Contract> {
    let mut out = Vec::new();
    let max_div = records.iter().map(|r| r.div_u_res.max(r.div_b_res)).fold(0.0, f64::max);
    out.push(Contract::new("divergence", max_div < 1e-10, format!("max residual {max_div:e}")));
    let drift = max_abs_drift(records, |r| r.mean_b);
    out.push(Contract::new("mean_b_conserved", drift < 1e-13, format!("max drift {drift:e}")));
    let e0 = records[0].energy;
    let nonincreasing = records.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12 * e0);
    out.push(Contract::new("energy_nonincreasing", nonincreasing, format!("E0 {e0:e}")));
    let mean_b_zero = records[0].mean_b.iter().all(|m| *m == 0.0);
    if records.len() >= 16 && mean_b_zero && params.check_long_time_hypotheses().is_ok() && params.alpha > 0.5 {
        if let Ok(r) = decay_envelope_check(records, params, l) {
            out.push(Contract::new(
                "decay_envelope",
                r.rigorous_pass,
                format!(
                    "rate {:e}, asymptote {:e}, first violation {:?}",
                    r.rate.mu, r.rate.asymptote, r.rigorous_first_violation
                ),
            ));
        }
    }
    out
}

pub fn run(ctx: &Ctx) -> Result<Summary> {
    let config = &ctx.config;
    let params = config.params()?;
    let controls = config.controls()?;
    let ic = initial_state(ctx)?;
    let grid = ic.grid().clone();

    let series_path = ctx.out.join("timeseries.csv");
    let mut series = TimeseriesSink::create(&series_path, params, config.output.monitor_cadence)?;
    let mut checkpoints = (config.output.checkpoint_cadence > 0)
        .then(|| -> Result<CheckpointSink> {
            let dir = ctx.out.join("checkpoints");
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(CheckpointSink::new(dir, params, config.output.checkpoint_cadence))
        })
        .transpose()?;
    let outcome = {
        let mut sinks: Vec<&mut dyn StepSink> = vec![&mut series];
        if let Some(c) = checkpoints.as_mut() {
            sinks.push(c);
        }
        run_counted(&ic, &params, &controls, &Forcing::none(), &mut sinks)?
    };
    series.finish()?;
    write_snapshot(&outcome.state, &params, &ctx.out.join("final.bin"))?;

    let records = read_timeseries(&series_path)?;
    let mut contracts = run_contracts(&records, &params, grid.l());

    // a lone shear mode with nothing to couple to decays at the viscous rate
    let ic_spec = config.ic_spec(ctx.seed);
    let last = &records[records.len() - 1];
    if let IcKind::SingleMode { k, .. } = ic_spec.kind {
        if config.output.restart.is_none()
            && params.a == 0.0
            && ic_spec.b_scale == 0.0
            && ic_spec.mean_u == [0.0; 3]
            && ic_spec.mean_b == [0.0; 3]
        {
            let ksq = grid.lambda() * k.iter().map(|c| (c * c) as f64).sum::<f64>();
            let expected = records[0].energy * (-2.0 * params.nu * ksq * (last.t - records[0].t)).exp();
            let rel = (last.energy - expected).abs() / expected;
            contracts.push(Contract::new(
                "exact_decay",
                rel <= 1e-12,
                format!("E(T) {:e}, expected {expected:e}, relative error {rel:e}", last.energy),
            ));
        }
    }
    let r_sq = absorbing_ball_radius(&params, grid.l()).ok();
    let results = json!({
        "steps": outcome.steps,
        "t_final": outcome.state.t,
        "energy_initial": records[0].energy,
        "energy_final": last.energy,
        "absorbing_ball_r_sq": r_sq,
        "timeseries": "timeseries.csv",
        "final_snapshot": "final.bin",
        "checkpoints": checkpoints.map(|c| c.written.iter().map(|(s, t, p)| json!({"step": s, "t": t, "path": p})).collect::<Vec<_>>()),
    });
    Ok(Summary::new("run", contracts, results))
}

pub fn mms(ctx: &Ctx) -> Result<Summary> {
    let config = &ctx.config;
    let (kind, pair, levels) = config.mms_pair()?;
    let rk_order = config.rk_order()?;
    let mms = MmsConfig {
        pair,
        params: config.params()?,
        t_end: config.time.t_end,
        rk_order,
        n: config.grid.n,
        dt: config.time.dt.unwrap_or(config.time.dt_max),
    };
    let report = convergence_study(kind, &mms, &levels)?;
    let mut dat = String::from("# level error\n");
    for (l, e) in report.levels.iter().zip(&report.errors) {
        dat.push_str(&format!("{l:.16e} {e:.16e}\n"));
    }
    write_text(&ctx.out.join("mms.dat"), &dat)?;
    let contract = match kind {
        StudyKind::Temporal => {
            let nominal = rk_order.order() as f64;
            Contract::new(
                "temporal_order",
                report.orders.iter().all(|o| (o - nominal).abs() <= 0.2),
                format!("orders {:?}, nominal {nominal}", report.orders),
            )
        }
        StudyKind::Spatial => Contract::new(
            "spatial_collapse",
            report.ratios.iter().all(|r| *r >= 10.0),
            format!("error ratios {:?}", report.ratios),
        ),
    };
    let results = json!({
        "levels": report.levels,
        "errors": report.errors,
        "ratios": report.ratios,
        "orders": report.orders,
    });
    Ok(Summary::new("mms", vec![contract], results))
}

struct Cell {
    index: usize,
    params: [f64; 4],
}

struct CellResult {
    row: Value,
    contract: Contract,
}

fn run_cell(ctx: &Ctx, cell: &Cell, dir: &Path) -> Result<CellResult> {
    let [alpha, a, nu, kappa] = cell.params;
    let params = PhysParams::new(nu, kappa, a, alpha)?;
    let controls = ctx.config.controls()?;
    let ic = initial_state(ctx)?;
    let name = format!("cell_{:03}.csv", cell.index);
    let path = dir.join(&name);
    let mut sink = TimeseriesSink::create(&path, params, ctx.config.output.monitor_cadence)?;
    run_counted(&ic, &params, &controls, &Forcing::none(), &mut [&mut sink])?;
    sink.finish()?;
    let records = read_timeseries(&path)?;
    let (t0, t1) = (records[0].t, records[records.len() - 1].t);
    let q = t0 + 0.75 * (t1 - t0);
    let limsup = records.iter().filter(|r| r.t >= q).map(|r| r.energy).fold(0.0, f64::max);
    let r_sq = absorbing_ball_radius(&params, ic.grid().l()).ok();
    let contract = match r_sq {
        Some(r) => Contract::new(
            format!("cell_{:03}_limsup_below_r_sq", cell.index),
            limsup <= r,
            format!("limsup E {limsup:e}, R^2 {r:e}"),
        ),
        None => Contract::new(
            format!("cell_{:03}_completed", cell.index),
            true,
            "absorbing-ball radius undefined for these parameters",
        ),
    };
    let row = json!({
        "cell": cell.index, "alpha": alpha, "a": a, "nu": nu, "kappa": kappa,
        "r_sq": r_sq, "limsup_energy": limsup, "timeseries": format!("cells/{name}"),
        "passed": contract.passed,
    });
    Ok(CellResult { row, contract })
}

pub fn sweep(ctx: &Ctx) -> Result<Summary> {
    let Some(s) = &ctx.config.sweep else {
        bail!("the sweep command needs a [sweep] section");
    };
    let mut cells = Vec::new();
    for &alpha in &s.alpha {
        for &a in &s.a {
            for &nu in &s.nu {
                for &kappa in &s.kappa {
                    cells.push(Cell {
                        index: cells.len(),
                        params: [alpha, a, nu, kappa],
                    });
                }
            }
        }
    }
    let dir = ctx.out.join("cells");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.threads).build()?;
    let results: Vec<(usize, Result<CellResult>)> =
        pool.install(|| cells.par_iter().map(|c| (c.index, run_cell(ctx, c, &dir))).collect());

    let mut contracts = Vec::new();
    let mut rows = Vec::new();
    let mut dat = String::from("# cell alpha a nu kappa r_sq limsup_energy pass\n");
    for ((index, result), cell) in results.into_iter().zip(&cells) {
        let [alpha, a, nu, kappa] = cell.params;
        match result {
            Ok(r) => {
                let r_sq = r.row["r_sq"].as_f64().map_or("nan".to_string(), |v| format!("{v:.16e}"));
                let limsup = r.row["limsup_energy"].as_f64().unwrap_or(f64::NAN);
                dat.push_str(&format!(
                    "{index} {alpha} {a} {nu} {kappa} {r_sq} {limsup:.16e} {}\n",
                    u8::from(r.contract.passed)
                ));
                rows.push(r.row);
                contracts.push(r.contract);
            }
            Err(e) => {
                dat.push_str(&format!("{index} {alpha} {a} {nu} {kappa} nan nan 0\n"));
                rows.push(json!({"cell": index, "alpha": alpha, "a": a, "nu": nu, "kappa": kappa, "error": format!("{e:#}")}));
                contracts.push(Contract::new(format!("cell_{index:03}_completed"), false, format!("{e:#}")));
            }
        }
    }
    write_text(&ctx.out.join("sweep_summary.dat"), &dat)?;
    Ok(Summary::new("sweep", contracts, json!({ "cells": rows })))
}

pub fn dependence(ctx: &Ctx) -> Result<Summary> {
    let config = &ctx.config;
    let deltas = config.dependence.as_ref().map(|d| d.deltas.clone()).unwrap_or_else(|| vec![1e-3, 1e-4, 1e-5, 0.0]);
    let params = config.params()?;
    let controls = config.controls()?;
    let base = initial_state(ctx)?;
    let report = dependence_experiment(&base, &deltas, &params, &controls, ctx.seed)?;
    let mut dat = String::from("# delta separation separation_over_delta_sq\n");
    for ((d, s), n) in report.deltas.iter().zip(&report.separations).zip(&report.normalized) {
        let n = n.map_or("nan".to_string(), |v| format!("{v:.16e}"));
        dat.push_str(&format!("{d:.16e} {s:.16e} {n}\n"));
    }
    write_text(&ctx.out.join("dependence.dat"), &dat)?;
    let mut contracts = vec![Contract::new(
        "quadratic_scaling",
        !report.successive_ratios.is_empty() && report.successive_ratios.iter().all(|r| (r - 1.0).abs() <= 0.1),
        format!("successive ratios {:?}", report.successive_ratios),
    )];
    if deltas.contains(&0.0) {
        contracts.push(Contract::new("zero_delta_exact", report.zero_exact, "S(0) must vanish exactly"));
    }
    let results = json!({
        "deltas": report.deltas,
        "separations": report.separations,
        "normalized": report.normalized,
        "successive_ratios": report.successive_ratios,
        "t_end": report.t_end,
        "hypothesis_ok": report.hypothesis_ok,
    });
    Ok(Summary::new("dependence", contracts, results))
}

fn find_series(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            find_series(&path, found)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            let first = fs::read_to_string(&path)?.lines().next().map(str::to_owned);
            if first.as_deref() == Some(TIMESERIES_HEADER) {
                found.push(path);
            }
        }
    }
    Ok(())
}

/// Text summary plus gnuplot-ready columns for every time series under `input`.
pub fn report(input: &Path, out: &Path) -> Result<Summary> {
    let mut files = Vec::new();
    find_series(input, &mut files)?;
    if files.is_empty() {
        bail!("no time-series files under {}: nothing to report", input.display());
    }
    let mut text = String::new();
    let mut dat = String::new();
    let mut rows = Vec::new();
    for path in &files {
        let rel = path.strip_prefix(input).unwrap_or(path);
        let records = read_timeseries(path)?;
        let (Some(first), Some(last)) = (records.first(), records.last()) else {
            text.push_str(&format!("{}: no rows\n", rel.display()));
            continue;
        };
        let max_div = records.iter().map(|r| r.div_u_res.max(r.div_b_res)).fold(0.0, f64::max);
        let max_e = records.iter().map(|r| r.energy).fold(0.0, f64::max);
        text.push_str(&format!(
            "{}\n  rows {}\n  t {:e} .. {:e}\n  E initial {:e}, final {:e}, max {:e}\n  max divergence residual {:e}\n",
            rel.display(),
            records.len(),
            first.t,
            last.t,
            first.energy,
            last.energy,
            max_e,
            max_div
        ));
        dat.push_str(&format!("# {}\n# t E grad_u_sq grad_b_sq u_damp_norm div_u_res div_b_res\n", rel.display()));
        for r in &records {
            dat.push_str(&format!(
                "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}\n",
                r.t, r.energy, r.grad_u_sq, r.grad_b_sq, r.u_damp_norm, r.div_u_res, r.div_b_res
            ));
        }
        // two blank lines separate gnuplot data blocks (`index`)
        dat.push_str("\n\n");
        rows.push(json!({"file": rel, "rows": records.len(), "t_final": last.t, "energy_final": last.energy}));
    }
    write_text(&out.join("report.txt"), &text)?;
    write_text(&out.join("report.dat"), &dat)?;
    let contract = Contract::new("series_parsed", true, format!("{} files", files.len()));
    Ok(Summary::new("report", vec![contract], json!({ "series": rows })))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}
