//! Trajectory integration with impulsive injections and outcome classification.
//!
//! While all three populations are positive the system is integrated in
//! logarithmic coordinates `(ln U, ln I, ln V)`, which keeps the solution
//! positive and resolves the deep troughs of long-period oscillations. Faces
//! of the positive orthant are handled in closed form:
//!
//! * `I = V = 0`: pure Gompertz growth,
//! * `U = 0`: linear decay of `I` and `V`,
//! * exactly one of `I`, `V` zero: a short linear-coordinate segment moves the
//!   state into the interior.
//!
//! A population falling below [`IntegratorConfig::floor`] is clamped to zero.
//! Once `U` is clamped the state stays on the `U = 0` face, so eradication is
//! absorbing.

use serde::{Deserialize, Serialize};

use crate::csv::Table;
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, State};
use crate::ode::{self, Control, SolverOptions, Vec3};
use crate::protocol::InjectionSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Populations below this value are set to zero.
    pub floor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 1.0,
            floor: 1e-300,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value| Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        };
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(bad("rel_tol", self.rel_tol));
        }
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(bad("abs_tol", self.abs_tol));
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(bad("max_step", self.max_step));
        }
        if !(self.floor.is_finite() && self.floor >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "floor",
                value: self.floor,
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..SolverOptions::default()
        }
    }
}

/// An applied injection: `post.v - pre.v == dose` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionEvent {
    pub t: f64,
    pub dose: f64,
    pub pre: State,
    pub post: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremumKind {
    Max,
    Min,
}

/// A local extremum of `U(t)` located with dense output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub u: f64,
    pub kind: ExtremumKind,
}

/// Recorded solution: one row per accepted step, right-continuous at injections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub events: Vec<InjectionEvent>,
    pub extrema: Vec<Extremum>,
    /// Time at which `U` was clamped to zero.
    pub absorbed_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_state(&self) -> State {
        *self.states.last().unwrap_or(&State::ZERO)
    }

    pub fn maxima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Max)
    }

    /// `(min U, max U)` over rows and located extrema with `t` in `[from, to]`.
    pub fn u_range(&self, from: f64, to: f64) -> Option<(f64, f64)> {
        let rows = self
            .times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= from && **t <= to)
            .map(|(_, s)| s.u);
        let ext = self
            .extrema
            .iter()
            .filter(|e| e.t >= from && e.t <= to)
            .map(|e| e.u);
        rows.chain(ext).fold(None, |acc, u| match acc {
            None => Some((u, u)),
            Some((lo, hi)) => Some((lo.min(u), hi.max(u))),
        })
    }

    /// Largest `V` over rows with `t` in `[from, to]`.
    pub fn v_max(&self, from: f64, to: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= from && **t <= to)
            .map(|(_, s)| s.v)
            .reduce(f64::max)
    }

    /// Rows as a `t,U,I,V` table.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["t", "U", "I", "V"]);
        for (time, s) in self.times.iter().zip(&self.states) {
            t.push_floats(&[*time, s.u, s.i, s.v]);
        }
        t
    }

    /// Injections as a `t,dose` table.
    pub fn events_table(&self) -> Table {
        let mut t = Table::new(&["t", "dose"]);
        for e in &self.events {
            t.push_floats(&[e.t, e.dose]);
        }
        t
    }
}

/// Derivative of `(ln U, ln I, ln V)` for strictly positive populations.
pub fn log_rhs(p: &ModelParams, y: &Vec3) -> Vec3 {
    let (x, yi, z) = (y[0], y[1], y[2]);
    let mx = x.max(yi);
    let ln_sum = mx + ((x - mx).exp() + (yi - mx).exp()).ln();
    [
        p.m * (p.k.ln() - x) - (z - ln_sum).exp(),
        (x + z - yi - ln_sum).exp() - p.xi,
        p.xi * (yi - z).exp() - p.gamma,
    ]
}

/// `ln(exp(a) + b)` for `b > 0` without overflow.
fn ln_add(a: f64, b: f64) -> f64 {
    let lb = b.ln();
    let hi = a.max(lb);
    hi + (-(a - lb).abs()).exp().ln_1p()
}

/// Length of the linear-coordinate segment that moves a state off an `I = 0`
/// or `V = 0` face.
const BOOTSTRAP_SPAN: f64 = 1e-6;

struct Runner<'a> {
    p: &'a ModelParams,
    cfg: &'a IntegratorConfig,
    opts: SolverOptions,
    ln_floor: f64,
    t: f64,
    s: State,
    /// Exact log-coordinate state while all populations are positive.
    log: Option<Vec3>,
    last_dx: Option<f64>,
    traj: Trajectory,
}

impl<'a> Runner<'a> {
    fn normalize(&mut self, t: f64, mut s: State) -> State {
        let floor = self.cfg.floor;
        s.u = s.u.max(0.0);
        s.i = s.i.max(0.0);
        s.v = s.v.max(0.0);
        if s.u < floor {
            s.u = 0.0;
        }
        if s.u == 0.0 {
            if self.traj.absorbed_at.is_none() {
                self.traj.absorbed_at = Some(t);
            }
            if s.i < floor {
                s.i = 0.0;
            }
            if s.v < floor {
                s.v = 0.0;
            }
        } else if s.i < floor && s.v < floor {
            s.i = 0.0;
            s.v = 0.0;
        }
        s
    }

    fn push(&mut self, t: f64, s: State) {
        match self.traj.times.last() {
            Some(&last) if t <= last => {
                if let Some(row) = self.traj.states.last_mut() {
                    *row = s;
                }
            }
            _ => {
                self.traj.times.push(t);
                self.traj.states.push(s);
            }
        }
    }

    fn set_state(&mut self, t: f64, s: State) {
        self.t = t;
        self.s = s;
        if !(s.u > 0.0 && s.i > 0.0 && s.v > 0.0) {
            self.log = None;
            self.last_dx = None;
        }
        self.push(t, s);
    }

    fn advance(&mut self, t1: f64) -> Result<()> {
        while self.t < t1 {
            let s = self.s;
            if s.is_zero() {
                self.set_state(t1, s);
            } else if s.u == 0.0 {
                self.face_sample(t1);
            } else if s.i == 0.0 && s.v == 0.0 {
                self.gompertz_sample(t1);
            } else if s.i == 0.0 || s.v == 0.0 {
                self.bootstrap(t1)?;
            } else {
                self.log_phase(t1)?;
            }
        }
        Ok(())
    }

    fn face_sample(&mut self, t1: f64) {
        let (p, s) = (self.p, self.s);
        let t_next = (self.t + self.cfg.max_step).min(t1);
        let dt = t_next - self.t;
        let ei = (-p.xi * dt).exp();
        let ev = (-p.gamma * dt).exp();
        let transfer = if (p.gamma - p.xi).abs() > 1e-12 * p.gamma.max(p.xi) {
            (ei - ev) / (p.gamma - p.xi)
        } else {
            dt * ev
        };
        let next = State::new(0.0, s.i * ei, s.v * ev + p.xi * s.i * transfer);
        let next = self.normalize(t_next, next);
        self.set_state(t_next, next);
    }

    fn gompertz_sample(&mut self, t1: f64) {
        let (p, s) = (self.p, self.s);
        let t_next = (self.t + self.cfg.max_step).min(t1);
        let dt = t_next - self.t;
        let u = p.k * ((s.u / p.k).ln() * (-p.m * dt).exp()).exp();
        self.set_state(t_next, State::new(u, 0.0, 0.0));
    }

    fn bootstrap(&mut self, t1: f64) -> Result<()> {
        let p = self.p;
        let t_end = (self.t + BOOTSTRAP_SPAN).min(t1);
        let mut rows = Vec::new();
        let end = ode::solve(
            |_, y| model::rhs(p, &State::from_array(*y)),
            self.t,
            self.s.to_array(),
            t_end,
            &self.opts,
            |step| {
                rows.push((step.t1, State::from_array(step.y1)));
                Control::Continue
            },
        )?;
        for (t, s) in rows {
            let s = self.normalize(t, s);
            self.push(t, s);
        }
        let s = self.normalize(end.t, State::from_array(end.y));
        self.set_state(end.t, s);
        Ok(())
    }

    fn log_phase(&mut self, t1: f64) -> Result<()> {
        let p = self.p;
        let s = self.s;
        let y0 = self.log.unwrap_or([s.u.ln(), s.i.ln(), s.v.ln()]);
        let f0 = log_rhs(p, &y0);
        if let Some(d) = self.last_dx {
            if let Some(kind) = sign_change(d, f0[0]) {
                self.traj.extrema.push(Extremum {
                    t: self.t,
                    u: s.u,
                    kind,
                });
            }
        }

        let ln_floor = self.ln_floor;
        let mut rows: Vec<(f64, Vec3)> = Vec::new();
        let mut extrema = Vec::new();
        let end = ode::solve(
            |_, y| Ok(log_rhs(p, y)),
            self.t,
            y0,
            t1,
            &self.opts,
            |step| {
                if let Some(kind) = sign_change(step.f0[0], step.f1[0]) {
                    if let Some(theta) = step.derivative_root(0) {
                        extrema.push(Extremum {
                            t: step.t0 + theta * step.h(),
                            u: step.interpolate(0, theta).exp(),
                            kind,
                        });
                    }
                }
                rows.push((step.t1, step.y1));
                let y = step.y1;
                if y[0] < ln_floor || (y[1] < ln_floor && y[2] < ln_floor) {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )?;
        self.traj.extrema.extend(extrema);
        let n = rows.len();
        for (k, (t, y)) in rows.into_iter().enumerate() {
            let st = State::new(y[0].exp(), y[1].exp(), y[2].exp());
            let st = self.normalize(t, st);
            if k + 1 < n {
                self.push(t, st);
            }
        }
        let st = State::new(end.y[0].exp(), end.y[1].exp(), end.y[2].exp());
        let st = self.normalize(end.t, st);
        if end.stopped || !(st.u > 0.0 && st.i > 0.0 && st.v > 0.0) {
            self.set_state(end.t, st);
        } else {
            self.t = end.t;
            self.s = st;
            self.log = Some(end.y);
            self.last_dx = Some(end.f[0]);
            self.push(end.t, st);
        }
        Ok(())
    }

    fn inject(&mut self, dose: f64) {
        let pre = self.s;
        let post = State::new(pre.u, pre.i, pre.v + dose);
        if let Some(y) = self.log.as_mut() {
            y[2] = ln_add(y[2], dose);
        }
        self.traj.events.push(InjectionEvent {
            t: self.t,
            dose,
            pre,
            post,
        });
        // the impulse changes dU/dt discontinuously; compare slopes across it
        self.s = post;
        self.push(self.t, post);
    }
}

fn sign_change(before: f64, after: f64) -> Option<ExtremumKind> {
    if before > 0.0 && after < 0.0 {
        Some(ExtremumKind::Max)
    } else if before < 0.0 && after > 0.0 {
        Some(ExtremumKind::Min)
    } else {
        None
    }
}

fn check_initial(s0: &State) -> Result<()> {
    let finite = s0.u.is_finite() && s0.i.is_finite() && s0.v.is_finite();
    if !finite || !s0.is_nonnegative() {
        return Err(Error::Domain {
            u: s0.u,
            i: s0.i,
            v: s0.v,
            reason: "initial populations must be finite and non-negative",
        });
    }
    Ok(())
}

/// Integrate from `s0` at `t = 0` to `t_end`, applying the injections of
/// `schedule` exactly at their times.
pub fn integrate(
    p: &ModelParams,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
    schedule: Option<&InjectionSchedule>,
) -> Result<Trajectory> {
    p.validate()?;
    cfg.validate()?;
    check_initial(&s0)?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidInput(format!(
            "integration horizon must be positive, got {t_end}"
        )));
    }
    let impulses = match schedule {
        Some(sched) => {
            sched.validate_for(t_end, cfg.floor)?;
            sched.impulses()
        }
        None => Vec::new(),
    };

    let mut runner = Runner {
        p,
        cfg,
        opts: cfg.solver_options(),
        ln_floor: if cfg.floor > 0.0 {
            cfg.floor.ln()
        } else {
            f64::NEG_INFINITY
        },
        t: 0.0,
        s: s0,
        log: None,
        last_dx: None,
        traj: Trajectory::default(),
    };
    let s = runner.normalize(0.0, s0);
    runner.set_state(0.0, s);

    for (t_imp, dose) in impulses {
        runner.advance(t_imp)?;
        runner.inject(dose);
    }
    runner.advance(t_end)?;
    Ok(runner.traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Eradication,
    Coexistence,
    LimitCycle,
    FailedTreatment,
    Undetermined,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Eradication => "eradication",
            Outcome::Coexistence => "coexistence",
            Outcome::LimitCycle => "limit_cycle",
            Outcome::FailedTreatment => "failed_treatment",
            Outcome::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Converged oscillation statistics from the last recorded U-maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub period: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub amplitude: f64,
    /// Number of maxima used in the convergence test.
    pub peaks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub outcome: Outcome,
    pub final_state: State,
    pub final_time: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub cycle: Option<CycleStats>,
    pub absorbed_at: Option<f64>,
}

/// Thresholds of the asymptotic-regime classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierSettings {
    pub failed_window: f64,
    pub failed_u_tol: f64,
    pub failed_iv_tol: f64,
    pub coexistence_window: f64,
    pub coexistence_variance: f64,
    pub coexistence_rel_tol: f64,
    pub cycle_peaks: usize,
    pub cycle_rel_tol: f64,
    pub cycle_min_amplitude: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            failed_window: 0.1,
            failed_u_tol: 1e-3,
            failed_iv_tol: 1e-6,
            coexistence_window: 0.2,
            coexistence_variance: 1e-8,
            coexistence_rel_tol: 1e-3,
            cycle_peaks: 5,
            cycle_rel_tol: 0.01,
            cycle_min_amplitude: 1e-6,
        }
    }
}

/// Integrate to `horizon` and classify the long-term behaviour.
pub fn integrate_to_outcome(
    p: &ModelParams,
    s0: State,
    cfg: &IntegratorConfig,
    schedule: Option<&InjectionSchedule>,
    horizon: f64,
) -> Result<(OutcomeReport, Trajectory)> {
    let traj = integrate(p, s0, horizon, cfg, schedule)?;
    let report = classify(p, &traj, &ClassifierSettings::default());
    Ok((report, traj))
}

/// Classify a recorded trajectory.
pub fn classify(p: &ModelParams, traj: &Trajectory, cs: &ClassifierSettings) -> OutcomeReport {
    let t_end = traj.final_time();
    let (u_min, u_max) = traj.u_range(0.0, t_end).unwrap_or((0.0, 0.0));
    let mut report = OutcomeReport {
        outcome: Outcome::Undetermined,
        final_state: traj.final_state(),
        final_time: t_end,
        u_max,
        u_min,
        cycle: None,
        absorbed_at: traj.absorbed_at,
    };
    if traj.absorbed_at.is_some() {
        report.outcome = Outcome::Eradication;
        return report;
    }
    let t_last_event = traj.events.last().map_or(0.0, |e| e.t);

    let tail = |frac: f64| {
        let from = t_last_event.max(t_end * (1.0 - frac));
        traj.times
            .iter()
            .zip(&traj.states)
            .filter(move |(t, _)| **t >= from)
            .map(|(_, s)| *s)
    };

    let failed: Vec<State> = tail(cs.failed_window).collect();
    if failed.len() >= 2
        && failed
            .iter()
            .all(|s| (s.u - p.k).abs() < cs.failed_u_tol * p.k && s.i + s.v < cs.failed_iv_tol)
    {
        report.outcome = Outcome::FailedTreatment;
        return report;
    }

    let coex: Vec<State> = tail(cs.coexistence_window).collect();
    if coex.len() >= 2 && p.coexistence_is_physical() {
        let target = model::coexistence_state(p);
        let max_var = (0..3)
            .map(|k| variance(coex.iter().map(|s| s.to_array()[k])))
            .fold(0.0, f64::max);
        let last = report.final_state;
        let dist = State::new(last.u - target.u, last.i - target.i, last.v - target.v).norm();
        if max_var < cs.coexistence_variance && dist <= cs.coexistence_rel_tol * target.norm() {
            report.outcome = Outcome::Coexistence;
            return report;
        }
    }

    if let Some(stats) = cycle_stats(p, traj, cs, t_last_event) {
        report.outcome = Outcome::LimitCycle;
        report.cycle = Some(stats);
    }
    report
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn cycle_stats(
    p: &ModelParams,
    traj: &Trajectory,
    cs: &ClassifierSettings,
    after: f64,
) -> Option<CycleStats> {
    let maxima: Vec<&Extremum> = traj.maxima().filter(|e| e.t > after).collect();
    if maxima.len() < cs.cycle_peaks {
        return None;
    }
    let last = &maxima[maxima.len() - cs.cycle_peaks..];
    let values: Vec<f64> = last.iter().map(|e| e.u).collect();
    let vmax = values.iter().cloned().fold(f64::MIN, f64::max);
    let vmin = values.iter().cloned().fold(f64::MAX, f64::min);
    if vmax - vmin > cs.cycle_rel_tol * vmax {
        return None;
    }
    let gaps: Vec<f64> = last.windows(2).map(|w| w[1].t - w[0].t).collect();
    let gmax = gaps.iter().cloned().fold(f64::MIN, f64::max);
    let gmin = gaps.iter().cloned().fold(f64::MAX, f64::min);
    let period = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if gmax - gmin > cs.cycle_rel_tol * period {
        return None;
    }
    // a slowly decaying spiral keeps its maxima but loses peak-to-trough amplitude
    let swings: Vec<f64> = last
        .windows(2)
        .filter_map(|w| traj.u_range(w[0].t, w[1].t).map(|(lo, _)| w[0].u - lo))
        .collect();
    let smax = swings.iter().cloned().fold(f64::MIN, f64::max);
    let smin = swings.iter().cloned().fold(f64::MAX, f64::min);
    if swings.len() + 1 < cs.cycle_peaks || smax - smin > cs.cycle_rel_tol * smax {
        return None;
    }
    let t_end = traj.final_time();
    if t_end - last[last.len() - 1].t > 2.0 * period {
        return None;
    }
    let (u_min, u_max) = traj.u_range(last[0].t, t_end)?;
    let amplitude = u_max - u_min;
    if amplitude <= cs.cycle_min_amplitude * p.k {
        return None;
    }
    Some(CycleStats {
        period,
        u_max,
        u_min,
        amplitude,
        peaks: cs.cycle_peaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(xi: f64) -> ModelParams {
        ModelParams::new(0.1, xi, 0.1, 100.0).unwrap()
    }

    #[test]
    fn log_rhs_matches_linear_rhs() {
        let p = params(0.03);
        let s = State::new(20.0, 5.0, 3.0);
        let f = model::rhs(&p, &s).unwrap();
        let g = log_rhs(&p, &[s.u.ln(), s.i.ln(), s.v.ln()]);
        assert_relative_eq!(g[0], f[0] / s.u, max_relative = 1e-13);
        assert_relative_eq!(g[1], f[1] / s.i, max_relative = 1e-13);
        assert_relative_eq!(g[2], f[2] / s.v, max_relative = 1e-13);
    }

    #[test]
    fn ln_add_is_stable() {
        assert_relative_eq!(ln_add(2f64.ln(), 3.0), 5f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(ln_add(-800.0, 1.0), 0.0, epsilon = 1e-300);
        assert_relative_eq!(ln_add(800.0, 1.0), 800.0, max_relative = 1e-15);
    }

    #[test]
    fn equilibrium_start_is_constant() {
        let p = params(0.05);
        let traj = integrate(
            &p,
            State::new(100.0, 0.0, 0.0),
            50.0,
            &IntegratorConfig::default(),
            None,
        )
        .unwrap();
        assert!(traj
            .states
            .iter()
            .all(|s| *s == State::new(100.0, 0.0, 0.0)));
        assert_eq!(traj.final_time(), 50.0);
    }

    #[test]
    fn gompertz_face_is_exact() {
        let p = params(0.05);
        let traj = integrate(
            &p,
            State::new(10.0, 0.0, 0.0),
            20.0,
            &IntegratorConfig::default(),
            None,
        )
        .unwrap();
        let expected = 100.0 * ((0.1f64).ln() * (-0.1f64 * 20.0).exp()).exp();
        assert_relative_eq!(traj.final_state().u, expected, max_relative = 1e-13);
    }

    #[test]
    fn zero_state_is_absorbing() {
        let traj = integrate(
            &params(0.05),
            State::ZERO,
            10.0,
            &IntegratorConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(traj.final_state(), State::ZERO);
        assert_eq!(traj.absorbed_at, Some(0.0));
    }

    #[test]
    fn u_zero_face_matches_linear_solution() {
        for (xi, gamma) in [(0.05, 0.1), (0.1, 0.1)] {
            let p = ModelParams::new(0.1, xi, gamma, 100.0).unwrap();
            let traj = integrate(
                &p,
                State::new(0.0, 2.0, 1.0),
                5.0,
                &IntegratorConfig::default(),
                None,
            )
            .unwrap();
            let s = traj.final_state();
            let opts = SolverOptions {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                ..Default::default()
            };
            let end = ode::solve(
                |_, y| Ok([0.0, -xi * y[1], xi * y[1] - gamma * y[2]]),
                0.0,
                [0.0, 2.0, 1.0],
                5.0,
                &opts,
                |_| Control::Continue,
            )
            .unwrap();
            assert_relative_eq!(s.i, end.y[1], max_relative = 1e-10);
            assert_relative_eq!(s.v, end.y[2], max_relative = 1e-10);
        }
    }

    #[test]
    fn face_start_with_virus_only_enters_interior() {
        let p = params(0.03);
        let traj = integrate(
            &p,
            State::new(50.0, 0.0, 10.0),
            5.0,
            &IntegratorConfig::default(),
            None,
        )
        .unwrap();
        let s = traj.final_state();
        assert!(s.u > 0.0 && s.i > 0.0 && s.v > 0.0);
        // compare with a linear-coordinate reference solution
        let end = ode::solve(
            |_, y| model::rhs(&p, &State::from_array(*y)),
            0.0,
            [50.0, 0.0, 10.0],
            5.0,
            &SolverOptions {
                rel_tol: 1e-11,
                abs_tol: 1e-13,
                ..Default::default()
            },
            |_| Control::Continue,
        )
        .unwrap();
        assert_relative_eq!(s.u, end.y[0], max_relative = 1e-6);
        assert_relative_eq!(s.i, end.y[1], max_relative = 1e-6);
        assert_relative_eq!(s.v, end.y[2], max_relative = 1e-6);
    }

    #[test]
    fn injections_hit_event_times() {
        let p = params(0.03);
        let sched = InjectionSchedule::new(6.0, 3, 2.5, 1.0).unwrap();
        let traj = integrate(
            &p,
            State::new(50.0, 10.0, 10.0),
            20.0,
            &IntegratorConfig::default(),
            Some(&sched),
        )
        .unwrap();
        assert_eq!(traj.events.len(), 3);
        for (k, e) in traj.events.iter().enumerate() {
            assert_eq!(e.t, 1.0 + 2.5 * k as f64);
            assert!(traj.times.contains(&e.t));
            assert_eq!(e.pre.u, e.post.u);
            assert_eq!(e.pre.i, e.post.i);
            assert_relative_eq!(e.post.v - e.pre.v, 2.0, max_relative = 1e-14);
            let idx = traj.times.iter().position(|t| *t == e.t).unwrap();
            assert_eq!(traj.states[idx], e.post);
        }
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn injection_at_start_equals_raised_initial_virus() {
        let p = params(0.03);
        let cfg = IntegratorConfig::default();
        let sched = InjectionSchedule::new(5.0, 1, 1.0, 0.0).unwrap();
        let a = integrate(&p, State::new(50.0, 10.0, 10.0), 30.0, &cfg, Some(&sched)).unwrap();
        let b = integrate(&p, State::new(50.0, 10.0, 15.0), 30.0, &cfg, None).unwrap();
        let (sa, sb) = (a.final_state(), b.final_state());
        assert_relative_eq!(sa.u, sb.u, max_relative = 1e-12);
        assert_relative_eq!(sa.i, sb.i, max_relative = 1e-12);
        assert_relative_eq!(sa.v, sb.v, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let p = params(0.03);
        let cfg = IntegratorConfig::default();
        assert!(integrate(&p, State::new(1.0, 1.0, 1.0), 0.0, &cfg, None).is_err());
        assert!(integrate(&p, State::new(-1.0, 1.0, 1.0), 1.0, &cfg, None).is_err());
        let bad = IntegratorConfig {
            rel_tol: 0.0,
            ..cfg
        };
        assert!(integrate(&p, State::new(1.0, 1.0, 1.0), 1.0, &bad, None).is_err());
        let late = InjectionSchedule::new(1.0, 2, 10.0, 0.0).unwrap();
        assert!(matches!(
            integrate(&p, State::new(1.0, 1.0, 1.0), 5.0, &cfg, Some(&late)),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn converges_to_coexistence_node() {
        let (report, _) = integrate_to_outcome(
            &params(0.01),
            State::new(50.0, 10.0, 10.0),
            &IntegratorConfig::default(),
            None,
            4000.0,
        )
        .unwrap();
        assert_eq!(report.outcome, Outcome::Coexistence);
        assert!((report.final_state.u - 40.657).abs() < 1e-3);
    }

    #[test]
    fn failed_treatment_when_virus_clears() {
        let p = ModelParams::new(0.1, 0.1, 2.0, 100.0).unwrap();
        let (report, _) = integrate_to_outcome(
            &p,
            State::new(50.0, 1.0, 1.0),
            &IntegratorConfig::default(),
            None,
            2000.0,
        )
        .unwrap();
        assert_eq!(report.outcome, Outcome::FailedTreatment);
    }

    #[test]
    fn tolerance_halving_converges() {
        let p = params(0.06);
        let s0 = State::new(50.0, 10.0, 10.0);
        let coarse = IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            ..Default::default()
        };
        let fine = IntegratorConfig {
            rel_tol: 5e-9,
            abs_tol: 5e-11,
            ..Default::default()
        };
        for t_end in [1.0, 5.0, 20.0, 50.0] {
            let a = integrate(&p, s0, t_end, &coarse, None)
                .unwrap()
                .final_state();
            let b = integrate(&p, s0, t_end, &fine, None).unwrap().final_state();
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                let tol = 10.0 * (coarse.rel_tol * x.abs() + coarse.abs_tol);
                assert!((x - y).abs() < tol, "t={t_end}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn time_reversal_recovers_initial_state() {
        let p = params(0.04);
        let s0 = State::new(30.0, 20.0, 5.0);
        let cfg = IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let fwd = integrate(&p, s0, 2.0, &cfg, None).unwrap().final_state();
        let back = ode::solve(
            |_, y| {
                let f = model::rhs(&p, &State::from_array(*y))?;
                Ok([-f[0], -f[1], -f[2]])
            },
            0.0,
            fwd.to_array(),
            2.0,
            &cfg.solver_options(),
            |_| Control::Continue,
        )
        .unwrap();
        for (x, y) in back.y.iter().zip(s0.to_array()) {
            assert!((x - y).abs() < 100.0 * (cfg.rel_tol * y.abs() + cfg.abs_tol) * 10.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn populations_stay_nonnegative_and_below_gompertz_bound(
            m in 0.02f64..1.0,
            xi in 0.005f64..0.3,
            gamma in 0.02f64..1.5,
            u0 in 1.0f64..99.0,
            i0 in 0.0f64..50.0,
            v0 in 0.0f64..50.0,
        ) {
            let p = ModelParams::new(m, xi, gamma, 100.0).unwrap();
            let cfg = IntegratorConfig::default();
            let traj = integrate(&p, State::new(u0, i0, v0), 60.0, &cfg, None).unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states) {
                prop_assert!(s.is_nonnegative());
                let bound = p.k * ((u0 / p.k).ln() * (-m * t).exp()).exp();
                prop_assert!(s.u <= bound * (1.0 + 1e-7) + 1e-9, "t={} U={} bound={}", t, s.u, bound);
            }
        }
    }
}
