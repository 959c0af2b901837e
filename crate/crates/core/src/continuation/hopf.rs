//! Two-parameter Hopf curves of the coexistence equilibrium, Hopf
//! criticality and generalized Hopf points.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lyapunov, BifurcationKind, BifurcationPoint, Criticality};
use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::integrator::{integrate_to_outcome, IntegratorConfig, Outcome};
use crate::linalg;
use crate::model::{self, ModelParams, Param, State};
use crate::stability::{self, bisect, with_unchecked};

/// Real part tolerance for the imaginary eigenvalue pair on the curve.
pub const HOPF_REAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfLocusPoint {
    pub params: ModelParams,
    pub state: State,
    pub omega: f64,
    /// Real part of the eigenvalue pair at the located point.
    pub pair_real: f64,
    pub verified: bool,
    pub lyapunov: Option<f64>,
    pub criticality: Criticality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfCurve {
    pub x: Param,
    pub y: Param,
    pub points: Vec<HopfLocusPoint>,
}

impl HopfCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Header `m,xi,gamma,omega,l1,criticality`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["m", "xi", "gamma", "omega", "l1", "criticality"]);
        for pt in &self.points {
            t.push(vec![
                fmt_f64(pt.params.m),
                fmt_f64(pt.params.xi),
                fmt_f64(pt.params.gamma),
                fmt_f64(pt.omega),
                pt.lyapunov.map(fmt_f64).unwrap_or_default(),
                pt.criticality.label().to_string(),
            ]);
        }
        t
    }

    pub fn bifurcation_points(&self) -> Vec<BifurcationPoint> {
        self.points
            .iter()
            .map(|pt| {
                let mut bp = BifurcationPoint::one_parameter(
                    BifurcationKind::Hopf,
                    self.y,
                    pt.params.get(self.y),
                );
                bp.param2 = Some(self.x);
                bp.value2 = Some(pt.params.get(self.x));
                bp.criticality = pt.criticality;
                bp.lyapunov = pt.lyapunov;
                bp.state = Some(pt.state);
                bp
            })
            .collect()
    }
}

fn y_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut ys: Vec<f64> = (0..=n)
        .map(|k| lo * (hi / lo).powf(k as f64 / n as f64))
        .chain((0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64))
        .collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    ys
}

fn locus_point(p: ModelParams) -> HopfLocusPoint {
    let state = model::coexistence_state(&p);
    let c = stability::charpoly_coexistence(&p);
    let omega = (c.a2 / c.a0).max(0.0).sqrt();
    let pair_real = model::jacobian(&p, &state)
        .map(|j| {
            let e = linalg::eigenvalues(&j);
            e.iter()
                .copied()
                .max_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
                .unwrap_or(Complex64::new(f64::NAN, 0.0))
                .re
        })
        .unwrap_or(f64::NAN);
    let lyapunov = lyapunov::first_lyapunov_coefficient(&p, &state)
        .ok()
        .flatten();
    HopfLocusPoint {
        params: p,
        state,
        omega,
        pair_real,
        verified: pair_real.abs() < HOPF_REAL_TOL,
        lyapunov,
        criticality: Criticality::from_lyapunov(lyapunov),
    }
}

/// Hopf points of the coexistence equilibrium along `y` at fixed parameters.
///
/// Roots of `a1 a2 - a0 a3` are bracketed on a mixed logarithmic and linear
/// grid of `y` in `(lo, hi]`, bisected and kept when `a3 < 0` and the pair
/// frequency is real.
pub fn hopf_points_along(
    base: &ModelParams,
    y: Param,
    (lo, hi): (f64, f64),
    samples: usize,
) -> Vec<HopfLocusPoint> {
    let h = |v: f64| stability::charpoly_coexistence(&with_unchecked(base, y, v)).hopf_function();
    let ys = y_samples(lo, hi, samples.max(2));
    let mut out = Vec::new();
    let mut prev = (ys[0], h(ys[0]));
    for &v in &ys[1..] {
        let hv = h(v);
        if prev.1 == 0.0 || prev.1.signum() != hv.signum() {
            if let Some(root) = bisect(h, prev.0, v, 1e-15) {
                let p = with_unchecked(base, y, root);
                let c = stability::charpoly_coexistence(&p);
                if c.a3 < 0.0 && c.a2 / c.a0 > 0.0 {
                    out.push(locus_point(p));
                }
            }
        }
        prev = (v, hv);
    }
    out.dedup_by(|a, b| (a.params.get(y) - b.params.get(y)).abs() < 1e-12);
    out
}

/// Hopf curve in the `(x, y)` plane with the third parameter fixed by `base`.
///
/// For every `x` the curve points along `y` are located independently.
/// Returns an empty curve when no Hopf point exists in range.
pub fn hopf_locus(
    base: &ModelParams,
    x: Param,
    xs: &[f64],
    y: Param,
    y_range: (f64, f64),
) -> Result<HopfCurve> {
    if x == y {
        return Err(Error::InvalidInput("free parameters must differ".into()));
    }
    let (lo, hi) = y_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid {} range ({lo}, {hi})",
            y.name()
        )));
    }
    for &v in xs {
        base.with(x, v)?;
    }
    let points = xs
        .par_iter()
        .map(|&v| hopf_points_along(&with_unchecked(base, x, v), y, y_range, 2000))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(HopfCurve { x, y, points })
}

/// Outcome of a perturbed simulation beside a Hopf point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    SmallCycle,
    Escaped,
    Returned,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideEvidence {
    pub offset: f64,
    pub equilibrium_stable: bool,
    pub outcome: Outcome,
    /// Largest distance from the equilibrium over the last fifth of the run.
    pub late_deviation: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfClassification {
    pub criticality: Criticality,
    pub lyapunov: Option<f64>,
    /// Criticality suggested by the simulations alone.
    pub simulated: Criticality,
    pub sides: [Option<SideEvidence>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopfSimulation {
    pub offset: f64,
    /// Perturbation of `U`, relative to `K`.
    pub perturbation: f64,
    /// Neighbourhood radius, relative to `K`.
    pub neighbourhood: f64,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
}

impl Default for HopfSimulation {
    fn default() -> Self {
        Self {
            offset: 1e-3,
            perturbation: 1e-3,
            neighbourhood: 1e-2,
            horizon: 5000.0,
            integrator: IntegratorConfig::default(),
        }
    }
}

fn side(p: &ModelParams, param: Param, offset: f64, sim: &HopfSimulation) -> Result<SideEvidence> {
    let q = p.with(param, p.get(param) + offset)?;
    let eq = model::coexistence_state(&q);
    let stable = stability::routh_hurwitz_stable(&stability::charpoly_coexistence(&q));
    let s0 = State::new(eq.u + sim.perturbation * q.k, eq.i, eq.v);
    let (report, traj) = integrate_to_outcome(&q, s0, &sim.integrator, None, sim.horizon)?;
    let from = 0.8 * traj.final_time();
    let late_deviation = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= from)
        .map(|(_, s)| State::new(s.u - eq.u, s.i - eq.i, s.v - eq.v).norm())
        .fold(0.0, f64::max);
    let radius = sim.neighbourhood * q.k;
    let evidence = if late_deviation >= radius || report.outcome == Outcome::Eradication {
        Evidence::Escaped
    } else if report.outcome == Outcome::LimitCycle {
        Evidence::SmallCycle
    } else if stable && late_deviation < sim.perturbation * q.k {
        Evidence::Returned
    } else {
        Evidence::Inconclusive
    };
    Ok(SideEvidence {
        offset,
        equilibrium_stable: stable,
        outcome: report.outcome,
        late_deviation,
        evidence,
    })
}

/// Criticality of a Hopf point located in `param`.
///
/// The sign of the first Lyapunov coefficient decides. Simulations from a
/// perturbed equilibrium at `param ± offset` are recorded alongside.
pub fn classify_hopf(
    p: &ModelParams,
    param: Param,
    sim: &HopfSimulation,
) -> Result<HopfClassification> {
    let state = model::coexistence_state(p);
    let lyapunov = lyapunov::first_lyapunov_coefficient(p, &state)?;
    let mut sides = [None, None];
    for (slot, sign) in sides.iter_mut().zip([-1.0, 1.0]) {
        *slot = side(p, param, sign * sim.offset, sim).ok();
    }
    let unstable = sides.iter().flatten().find(|s| !s.equilibrium_stable);
    let simulated = match unstable.map(|s| s.evidence) {
        Some(Evidence::SmallCycle) => Criticality::Supercritical,
        Some(Evidence::Escaped) => Criticality::Subcritical,
        _ => Criticality::NotApplicable,
    };
    Ok(HopfClassification {
        criticality: Criticality::from_lyapunov(lyapunov),
        lyapunov,
        simulated,
        sides,
    })
}

/// Generalized Hopf point on the curve, located by bisecting the first
/// Lyapunov coefficient in `x` between `x_lo` and `x_hi`.
///
/// Along `y` the smallest Hopf root in `y_range` is followed.
pub fn locate_generalized_hopf(
    base: &ModelParams,
    x: Param,
    (x_lo, x_hi): (f64, f64),
    y: Param,
    y_range: (f64, f64),
) -> Option<BifurcationPoint> {
    let at = |v: f64| {
        hopf_points_along(&with_unchecked(base, x, v), y, y_range, 2000)
            .into_iter()
            .next()
    };
    let l1 = |v: f64| at(v).and_then(|pt| pt.lyapunov).unwrap_or(f64::NAN);
    let root = bisect(l1, x_lo, x_hi, 1e-10)?;
    let pt = at(root)?;
    let mut bp = BifurcationPoint::one_parameter(BifurcationKind::GeneralizedHopf, x, root);
    bp.param2 = Some(y);
    bp.value2 = Some(pt.params.get(y));
    bp.state = Some(pt.state);
    bp.lyapunov = pt.lyapunov;
    Some(bp)
}
