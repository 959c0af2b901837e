//! Injection schedules and therapy experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::integrator::{
    integrate, integrate_to_outcome, CycleStats, ExtremumKind, IntegratorConfig, Outcome,
    OutcomeReport, Trajectory,
};
use crate::model::{ModelParams, State};

/// `n` impulses of size `d0 / n` at `t0, t0 + kappa, ..., t0 + (n - 1) kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionSchedule {
    #[serde(rename = "D0", alias = "d0")]
    pub d0: f64,
    pub n: u32,
    pub kappa: f64,
    #[serde(default)]
    pub t0: f64,
}

impl InjectionSchedule {
    pub fn new(d0: f64, n: u32, kappa: f64, t0: f64) -> Result<Self> {
        let s = Self { d0, n, kappa, t0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "total dose must be positive, got {}",
                self.d0
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidSchedule(
                "at least one injection required".into(),
            ));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "injection interval must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "first injection time must be non-negative, got {}",
                self.t0
            )));
        }
        Ok(())
    }

    /// Additional checks against an integration horizon and population floor.
    pub fn validate_for(&self, horizon: f64, floor: f64) -> Result<()> {
        self.validate()?;
        if self.dose_per_injection() < floor {
            return Err(Error::InvalidSchedule(format!(
                "dose per injection {} is below the population floor {floor}",
                self.dose_per_injection()
            )));
        }
        if self.last_time() > horizon {
            return Err(Error::InvalidSchedule(format!(
                "last injection at t = {} is beyond the horizon {horizon}",
                self.last_time()
            )));
        }
        Ok(())
    }

    pub fn dose_per_injection(&self) -> f64 {
        self.d0 / self.n as f64
    }

    pub fn last_time(&self) -> f64 {
        self.t0 + (self.n - 1) as f64 * self.kappa
    }

    /// `(time, dose)` pairs in increasing time order.
    pub fn impulses(&self) -> Vec<(f64, f64)> {
        let dose = self.dose_per_injection();
        (0..self.n)
            .map(|k| (self.t0 + k as f64 * self.kappa, dose))
            .collect()
    }
}

/// Outcome of a therapy run with the `U` extrema after the final injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    #[serde(flatten)]
    pub report: OutcomeReport,
    pub post_u_max: f64,
    pub post_u_min: f64,
}

/// Simulate a therapy and classify its long-term outcome.
pub fn run_protocol(
    p: &ModelParams,
    s0: State,
    schedule: &InjectionSchedule,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<(ProtocolReport, Trajectory)> {
    schedule.validate_for(horizon, cfg.floor)?;
    let (report, traj) = integrate_to_outcome(p, s0, cfg, Some(schedule), horizon)?;
    let (post_u_min, post_u_max) = traj
        .u_range(schedule.last_time(), horizon)
        .unwrap_or((report.final_state.u, report.final_state.u));
    Ok((
        ProtocolReport {
            report,
            post_u_max,
            post_u_min,
        },
        traj,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KappaSweepSettings {
    /// Initial state relative to `K` for the baseline run.
    pub initial: State,
    /// Length of the baseline run used to converge onto the cycle.
    pub transient: f64,
    pub n: u32,
    /// Length of each therapy run, measured from the first injection.
    pub horizon: f64,
    /// Measurement window after the last injection, in baseline periods.
    pub window_periods: f64,
    pub integrator: IntegratorConfig,
}

impl Default for KappaSweepSettings {
    fn default() -> Self {
        Self {
            initial: State::new(0.5, 0.1, 0.1),
            transient: 10000.0,
            n: 2,
            horizon: 30000.0,
            window_periods: 3.0,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub kappa: f64,
    pub max_u: f64,
    pub min_u: f64,
    pub max_v: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    pub baseline: CycleStats,
    /// State at a `U`-maximum of the converged cycle; the first injection
    /// is given there.
    pub s0: State,
    /// Time from the reference maximum to the next `U`-minimum.
    pub phase_of_minimum: f64,
    pub records: Vec<KappaRecord>,
}

impl KappaSweep {
    /// Header `kappa,maxU,minU,maxV`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["kappa", "maxU", "minU", "maxV"]);
        for r in &self.records {
            t.push_floats(&[r.kappa, r.max_u, r.min_u, r.max_v]);
        }
        t
    }
}

/// Vary the interval between injections of a protocol given on a converged
/// limit cycle.
pub fn kappa_sweep(
    p: &ModelParams,
    d0: f64,
    kappas: &[f64],
    settings: &KappaSweepSettings,
) -> Result<KappaSweep> {
    let start = settings.initial.scaled(p.k);
    let (report, traj) =
        integrate_to_outcome(p, start, &settings.integrator, None, settings.transient)?;
    let baseline = match (report.outcome, report.cycle) {
        (Outcome::LimitCycle, Some(c)) => c,
        _ => {
            return Err(Error::InvalidInput(format!(
                "baseline run is not on a converged limit cycle (outcome {})",
                report.outcome
            )))
        }
    };
    let t_ref = traj
        .maxima()
        .filter(|e| e.t <= settings.transient - baseline.period)
        .last()
        .map(|e| e.t)
        .ok_or_else(|| Error::InvalidInput("baseline run has no usable maximum".into()))?;
    let phase_of_minimum = traj
        .extrema
        .iter()
        .find(|e| e.kind == ExtremumKind::Min && e.t > t_ref)
        .map_or(f64::NAN, |e| e.t - t_ref);
    let s0 = integrate(p, start, t_ref, &settings.integrator, None)?.final_state();

    let mut sorted = kappas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let records = sorted
        .par_iter()
        .map(|&kappa| {
            let schedule = InjectionSchedule::new(d0, settings.n, kappa, 0.0)?;
            let (rep, traj) =
                run_protocol(p, s0, &schedule, settings.horizon, &settings.integrator)?;
            let from = schedule.last_time();
            let to = from + settings.window_periods * baseline.period;
            let (min_u, max_u) = traj.u_range(from, to).unwrap_or((f64::NAN, f64::NAN));
            Ok(KappaRecord {
                kappa,
                max_u,
                min_u,
                max_v: traj.v_max(from, to).unwrap_or(f64::NAN),
                outcome: rep.report.outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KappaSweep {
        baseline,
        s0,
        phase_of_minimum,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosageRecord {
    pub v0: f64,
    pub report: OutcomeReport,
}

/// Maximal run of consecutive sweep points sharing one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeInterval {
    pub outcome: Outcome,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosageSweep {
    pub records: Vec<DosageRecord>,
    pub intervals: Vec<OutcomeInterval>,
}

impl DosageSweep {
    /// Header `V0,outcome,finalU,finalI,finalV`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["V0", "outcome", "finalU", "finalI", "finalV"]);
        for r in &self.records {
            let f = r.report.final_state;
            t.push(vec![
                fmt_f64(r.v0),
                r.report.outcome.label().to_string(),
                fmt_f64(f.u),
                fmt_f64(f.i),
                fmt_f64(f.v),
            ]);
        }
        t
    }

    /// Outcome sequence with consecutive repeats collapsed.
    pub fn pattern(&self) -> Vec<Outcome> {
        self.intervals.iter().map(|iv| iv.outcome).collect()
    }
}

fn intervals(points: impl IntoIterator<Item = (f64, Outcome)>) -> Vec<OutcomeInterval> {
    let mut out: Vec<OutcomeInterval> = Vec::new();
    for (x, outcome) in points {
        match out.last_mut() {
            Some(iv) if iv.outcome == outcome => iv.to = x,
            _ => out.push(OutcomeInterval {
                outcome,
                from: x,
                to: x,
            }),
        }
    }
    out
}

/// Classify the outcome of every initial viral load `(u0, i0, v0)`.
pub fn dosage_sweep(
    p: &ModelParams,
    u0: f64,
    i0: f64,
    v0s: &[f64],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<DosageSweep> {
    let mut sorted = v0s.to_vec();
    sorted.sort_by(f64::total_cmp);
    let records = sorted
        .par_iter()
        .map(|&v0| {
            let s0 = State::new(u0, i0, v0);
            s0.check_interior()?;
            let (report, _) = integrate_to_outcome(p, s0, cfg, None, horizon)?;
            Ok(DosageRecord { v0, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let intervals = intervals(records.iter().map(|r| (r.v0, r.report.outcome)));
    Ok(DosageSweep { records, intervals })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub u0: f64,
    pub v0: f64,
    pub outcome: Outcome,
}

/// Outcome per grid point of `(U0, V0)` at fixed `I0`; `U0` varies slowest.
pub fn basin_slice(
    p: &ModelParams,
    i0: f64,
    u0s: &[f64],
    v0s: &[f64],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<BasinCell>> {
    let grid: Vec<(f64, f64)> = u0s
        .iter()
        .flat_map(|&u| v0s.iter().map(move |&v| (u, v)))
        .collect();
    grid.par_iter()
        .map(|&(u0, v0)| {
            let s0 = State::new(u0, i0, v0);
            s0.check_interior()?;
            let (report, _) = integrate_to_outcome(p, s0, cfg, None, horizon)?;
            Ok(BasinCell {
                u0,
                v0,
                outcome: report.outcome,
            })
        })
        .collect()
}

/// Header `U0,V0,outcome`.
pub fn basin_table(cells: &[BasinCell]) -> Table {
    let mut t = Table::new(&["U0", "V0", "outcome"]);
    for c in cells {
        t.push(vec![
            fmt_f64(c.u0),
            fmt_f64(c.v0),
            c.outcome.label().to_string(),
        ]);
    }
    t
}
