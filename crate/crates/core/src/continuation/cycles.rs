//! Limit-cycle extrema and period along one parameter by direct simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::Table;
use crate::error::{Error, Result};
use crate::integrator::{integrate_to_outcome, IntegratorConfig, Outcome};
use crate::model::{ModelParams, Param, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleSettings {
    /// Initial state relative to `K`.
    pub initial: State,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
}

impl Default for CycleSettings {
    fn default() -> Self {
        Self {
            initial: State::new(0.5, 0.1, 0.1),
            horizon: 5000.0,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMeasurement {
    pub param_value: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub param_value: f64,
    pub outcome: Outcome,
    pub measurement: Option<CycleMeasurement>,
    /// Oscillation seen but the last maxima do not agree within 1%.
    pub unconverged: bool,
}

/// Integrate from the standard initial state at each parameter value and
/// measure the converged limit cycle, if any.
pub fn track_cycles(
    base: &ModelParams,
    param: Param,
    values: &[f64],
    settings: &CycleSettings,
) -> Result<Vec<CycleRecord>> {
    if !(settings.horizon > 0.0 && settings.horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid horizon {}",
            settings.horizon
        )));
    }
    settings.integrator.validate()?;
    let params = values
        .iter()
        .map(|&v| base.with(param, v))
        .collect::<Result<Vec<_>>>()?;
    params
        .par_iter()
        .zip(values)
        .map(|(q, &v)| {
            let s0 = settings.initial.scaled(q.k);
            let (report, traj) =
                integrate_to_outcome(q, s0, &settings.integrator, None, settings.horizon)?;
            let measurement = report.cycle.map(|c| CycleMeasurement {
                param_value: v,
                u_max: c.u_max,
                u_min: c.u_min,
                period: c.period,
            });
            let unconverged = report.outcome == Outcome::Undetermined && traj.maxima().count() >= 2;
            Ok(CycleRecord {
                param_value: v,
                outcome: report.outcome,
                measurement,
                unconverged,
            })
        })
        .collect()
}

/// Header `param,Umax,Umin,period`; one row per converged measurement.
pub fn cycle_table(records: &[CycleRecord]) -> Table {
    let mut t = Table::new(&["param", "Umax", "Umin", "period"]);
    for m in records.iter().filter_map(|r| r.measurement) {
        t.push_floats(&[m.param_value, m.u_max, m.u_min, m.period]);
    }
    t
}
