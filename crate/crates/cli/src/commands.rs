use oncovir::continuation::{
    bifurcation_table, continue_equilibrium, cycle_table, eradication_branch_stability, hopf_locus,
    locate_generalized_hopf, track_cycles, BifurcationPoint, BranchKind,
};
use oncovir::csv::{fmt_f64, Table};
use oncovir::protocol::{basin_slice, basin_table, dosage_sweep, kappa_sweep, run_protocol};
use oncovir::stability::{self, Linspace, RegionGrid};
use oncovir::{equilibria, integrate_to_outcome, OutcomeReport, Trajectory};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Output;

fn outcome_json(r: &OutcomeReport, post: Option<(f64, f64)>) -> Value {
    let mut v = json!({
        "outcome": r.outcome.label(),
        "finalU": r.final_state.u,
        "finalI": r.final_state.i,
        "finalV": r.final_state.v,
        "final_time": r.final_time,
        "Umax": r.u_max,
        "Umin": r.u_min,
        "cycle": r.cycle,
        "absorbed_at": r.absorbed_at,
    });
    if let Some((lo, hi)) = post {
        v["post_injection_Umax"] = json!(hi);
        v["post_injection_Umin"] = json!(lo);
    }
    v
}

fn write_run(out: &mut Output, traj: &Trajectory, outcome: Value) -> Result<(), CliError> {
    out.table("trajectory", &traj.to_table())?;
    if !traj.events.is_empty() {
        out.table("events", &traj.events_table())?;
    }
    out.json("outcome.json", &outcome)?;
    out.summarize("outcome", &outcome["outcome"]);
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let s0 = cfg.initial_state(&p)?;
    let horizon = cfg.horizon()?;
    let (outcome, traj) = match &cfg.schedule {
        Some(sched) => {
            let (rep, traj) = run_protocol(&p, s0, sched, horizon, &cfg.integrator)?;
            (
                outcome_json(&rep.report, Some((rep.post_u_min, rep.post_u_max))),
                traj,
            )
        }
        None => {
            let (rep, traj) = integrate_to_outcome(&p, s0, &cfg.integrator, None, horizon)?;
            (outcome_json(&rep, None), traj)
        }
    };
    out.summarize("params", &p);
    write_run(out, &traj, outcome)
}

pub fn equilibria_cmd(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let mut header = vec!["kind", "U", "I", "V", "physical", "classification"];
    header.extend([
        "lambda1_re",
        "lambda1_im",
        "lambda2_re",
        "lambda2_im",
        "lambda3_re",
        "lambda3_im",
    ]);
    let mut t = Table::new(&header);
    let eqs = equilibria(&p);
    for e in &eqs {
        let mut row = vec![
            e.kind.label().to_string(),
            fmt_f64(e.state.u),
            fmt_f64(e.state.i),
            fmt_f64(e.state.v),
            e.physical.to_string(),
            e.classification.label().to_string(),
        ];
        for z in &e.eigenvalues {
            row.push(fmt_f64(z.re));
            row.push(fmt_f64(z.im));
        }
        t.push(row);
    }
    out.table("equilibria", &t)?;
    let attraction = stability::eradication_attraction(&p, &Default::default())?;
    out.summarize("params", &p);
    out.summarize("eradication_attraction", &attraction.label());
    out.summarize("coexistence_physical", &p.coexistence_is_physical());
    Ok(())
}

pub fn region(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params().ok();
    let k = p.map_or(oncovir::model::DEFAULT_K, |p| p.k);
    let grid = cfg.region.grid.unwrap_or(RegionGrid {
        m: Linspace::new(0.01, 1.0, 50),
        xi: Linspace::new(0.001, 0.2, 50),
        gamma: Linspace::single(p.map_or(0.1, |p| p.gamma)),
        k,
    });
    let samples = stability::scan_region(&grid)?;
    out.table("region", &stability::region_table(&samples))?;
    if let Some([lo, hi]) = cfg.region.slice {
        let slice = stability::ustar_slice(&samples, lo, hi);
        out.table("region_slice", &stability::region_table(&slice))?;
        out.summarize("slice_samples", &slice.len());
    }
    if let Some(c) = &cfg.region.contour {
        out.table(
            "contour",
            &stability::contour_table(&c.m.values(), c.gamma, grid.k, c.u_t)?,
        )?;
    }
    out.summarize("samples", &samples.len());
    out.summarize(
        "stable_samples",
        &samples.iter().filter(|s| s.stable).count(),
    );
    Ok(())
}

fn bifurcation_summary(points: &[BifurcationPoint]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|b| {
                json!({
                    "kind": b.kind.label(),
                    "param1": b.param1.name(),
                    "value1": b.value1,
                    "param2": b.param2.map(|q| q.name()),
                    "value2": b.value2,
                    "criticality": b.criticality.label(),
                    "lyapunov": b.lyapunov,
                })
            })
            .collect(),
    )
}

pub fn branch(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let b = &cfg.branch;
    let range = (b.range[0], b.range[1]);
    let mut bifurcations = Vec::new();
    for &kind in &b.kinds {
        match kind {
            BranchKind::Coexistence | BranchKind::FailedTreatment => {
                let res = continue_equilibrium(&p, kind, b.param, range, &b.continuation)?;
                out.table(&format!("branch_{}", kind.label()), &res.branch.to_table())?;
                bifurcations.extend(res.bifurcations);
            }
            BranchKind::Eradication => {
                let res = eradication_branch_stability(&p, b.param, range, &b.eradication)?;
                out.table("branch_eradication", &res.branch.to_table())?;
                out.summarize("eradication_indeterminate", &res.indeterminate);
                bifurcations.extend(res.folds);
            }
            BranchKind::PeriodicOrbit => {
                return Err(CliError::Config(
                    "periodic orbits are measured through the `branch.cycles` block".into(),
                ))
            }
        }
    }
    if let Some(c) = &b.cycles {
        let records = track_cycles(&p, b.param, &c.values.values(), &c.settings)?;
        out.table("cycles", &cycle_table(&records))?;
    }
    bifurcations.sort_by(|a, b| a.value1.total_cmp(&b.value1));
    out.table("bifurcations", &bifurcation_table(&bifurcations))?;
    out.summarize("bifurcations", &bifurcation_summary(&bifurcations));
    Ok(())
}

pub fn hopf_curve(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let h = &cfg.hopf_curve;
    let y_range = (h.y_range[0], h.y_range[1]);
    let curve = hopf_locus(&p, h.x, &h.values.values(), h.y, y_range)?;
    out.table("hopf_curve", &curve.to_table())?;
    let mut points = curve.bifurcation_points();
    if let Some([lo, hi]) = h.generalized_hopf {
        let gh = locate_generalized_hopf(&p, h.x, (lo, hi), h.y, y_range);
        out.summarize(
            "generalized_hopf",
            &gh.as_ref().map(|g| (g.value1, g.value2)),
        );
        points.extend(gh);
    }
    out.table("bifurcations", &bifurcation_table(&points))?;
    out.summarize("curve_points", &curve.points.len());
    out.summarize(
        "unverified_points",
        &curve.points.iter().filter(|q| !q.verified).count(),
    );
    Ok(())
}

pub fn cycles(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let c = &cfg.cycles;
    let records = track_cycles(&p, c.param, &c.values.values(), &c.settings)?;
    out.table("cycles", &cycle_table(&records))?;
    let status: Vec<Value> = records
        .iter()
        .map(|r| json!({"param": r.param_value, "outcome": r.outcome.label(), "unconverged": r.unconverged}))
        .collect();
    out.summarize("records", &status);
    Ok(())
}

pub fn protocol(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    if cfg.schedule.is_none() && cfg.protocol.kappa_sweep.is_none() {
        return Err(CliError::Config(
            "protocol needs a `schedule` or a `protocol.kappa_sweep` block".into(),
        ));
    }
    if let Some(sched) = &cfg.schedule {
        let s0 = cfg.initial_state(&p)?;
        let (rep, traj) = run_protocol(&p, s0, sched, cfg.horizon()?, &cfg.integrator)?;
        write_run(
            out,
            &traj,
            outcome_json(&rep.report, Some((rep.post_u_min, rep.post_u_max))),
        )?;
    }
    if let Some(k) = &cfg.protocol.kappa_sweep {
        let sweep = kappa_sweep(&p, k.d0, &k.kappas.values(), &k.settings)?;
        out.table("kappa_sweep", &sweep.to_table())?;
        out.summarize("baseline_cycle", &sweep.baseline);
        out.summarize("phase_of_minimum", &sweep.phase_of_minimum);
        let outcomes: Vec<(f64, &str)> = sweep
            .records
            .iter()
            .map(|r| (r.kappa, r.outcome.label()))
            .collect();
        out.summarize("kappa_outcomes", &outcomes);
    }
    Ok(())
}

pub fn dosage(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let d = &cfg.dosage_sweep;
    let sweep = dosage_sweep(&p, d.u0, d.i0, &d.v0.values(), d.horizon, &cfg.integrator)?;
    out.table("dosage_sweep", &sweep.to_table())?;
    let intervals: Vec<Value> = sweep
        .intervals
        .iter()
        .map(|iv| json!({"outcome": iv.outcome.label(), "from": iv.from, "to": iv.to}))
        .collect();
    out.summarize("intervals", &intervals);
    Ok(())
}

pub fn basin(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.model_params()?;
    let b = &cfg.basin;
    let cells = basin_slice(
        &p,
        b.i0,
        &b.u0.values(),
        &b.v0.values(),
        b.horizon,
        &cfg.integrator,
    )?;
    out.table("basin", &basin_table(&cells))?;
    let mut counts = std::collections::BTreeMap::new();
    for c in &cells {
        *counts.entry(c.outcome.label()).or_insert(0usize) += 1;
    }
    out.summarize("outcome_counts", &counts);
    Ok(())
}

/// Configurations behind each figure family, run by `repro`.
pub fn repro_suite() -> Vec<(&'static str, &'static str, Value)> {
    let fig3 = |xi: f64, horizon: f64| {
        json!({
            "params": {"m": 0.1, "xi": xi, "gamma": 0.1, "K": 100},
            "initial": {"U": 50, "I": 10, "V": 10},
            "horizon": horizon,
        })
    };
    vec![
        ("regime_coexistence", "simulate", fig3(0.01, 5000.0)),
        ("regime_oscillation", "simulate", fig3(0.06, 5000.0)),
        ("regime_square_wave", "simulate", fig3(0.097, 60000.0)),
        ("regime_eradication", "simulate", fig3(0.12, 5000.0)),
        (
            "equilibria",
            "equilibria",
            json!({"params": {"m": 0.1, "xi": 0.01, "gamma": 0.1}}),
        ),
        (
            "region",
            "region",
            json!({
                "params": {"m": 0.1, "xi": 0.01, "gamma": 0.1},
                "region": {
                    "grid": {
                        "m": {"start": 0.01, "end": 1.0, "steps": 50},
                        "xi": {"start": 0.001, "end": 0.2, "steps": 50},
                        "gamma": {"start": 0.05, "end": 0.95, "steps": 10}
                    },
                    "slice": [20.0, 40.0],
                    "contour": {"gamma": 0.1, "U_T": 40.0, "m": {"start": 0.01, "end": 1.0, "steps": 100}}
                }
            }),
        ),
        (
            "branch_xi",
            "branch",
            json!({
                "params": {"m": 0.1, "xi": 0.01, "gamma": 0.1},
                "branch": {
                    "param": "xi",
                    "range": [0.005, 0.15],
                    "cycles": {"values": {"start": 0.045, "end": 0.095, "steps": 11}}
                }
            }),
        ),
        (
            "branch_gamma",
            "branch",
            json!({
                "params": {"m": 0.1, "xi": 0.01, "gamma": 0.1},
                "branch": {"param": "gamma", "range": [0.005, 1.2]}
            }),
        ),
        (
            "branch_bistable",
            "branch",
            json!({
                "params": {"m": 0.5, "xi": 0.1, "gamma": 0.1},
                "branch": {"param": "xi", "range": [0.05, 0.2]}
            }),
        ),
        (
            "hopf_curve",
            "hopf-curve",
            json!({
                "params": {"m": 0.1, "xi": 0.01, "gamma": 0.1},
                "hopf_curve": {"generalized_hopf": [0.1, 0.5]}
            }),
        ),
        (
            "cycles_gamma",
            "cycles",
            json!({
                "params": {"m": 0.1, "xi": 0.01, "gamma": 0.1},
                "cycles": {
                    "param": "gamma",
                    "values": {"start": 0.0105, "end": 0.03, "steps": 14},
                    "settings": {"horizon": 20000}
                }
            }),
        ),
        (
            "kappa_sweep_a",
            "protocol",
            json!({
                "params": {"m": 0.2, "xi": 0.06915, "gamma": 0.1},
                "protocol": {"kappa_sweep": {"D0": 10, "kappas": {"start": 5, "end": 100, "steps": 20}}}
            }),
        ),
        (
            "kappa_sweep_b",
            "protocol",
            json!({
                "params": {"m": 0.2, "xi": 0.06993, "gamma": 0.1},
                "protocol": {"kappa_sweep": {"D0": 10, "kappas": {"start": 5, "end": 100, "steps": 20}}}
            }),
        ),
        (
            "dosage_high_burden",
            "dosage-sweep",
            json!({
                "params": {"m": 0.5, "xi": 0.138, "gamma": 0.1},
                "dosage_sweep": {"U0": 100, "I0": 10}
            }),
        ),
        (
            "dosage_mid_burden",
            "dosage-sweep",
            json!({
                "params": {"m": 0.5, "xi": 0.138, "gamma": 0.1},
                "dosage_sweep": {"U0": 50, "I0": 10}
            }),
        ),
        (
            "basin",
            "basin",
            json!({"params": {"m": 0.5, "xi": 0.136, "gamma": 0.1}}),
        ),
    ]
}
