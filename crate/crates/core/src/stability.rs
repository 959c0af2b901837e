//! Characteristic cubics, Routh–Hurwitz tests, node/spiral discrimination,
//! the eradication probe, region scans and the tumour-burden contour.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, Table};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::linalg;
use crate::model::{self, Classification, ModelParams, Param, State, DEFAULT_K, ERADICATION_PROBE};

/// Cubic `a0 λ³ + a1 λ² + a2 λ + a3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl CubicCoefficients {
    pub fn new(a0: f64, a1: f64, a2: f64, a3: f64) -> Result<Self> {
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "leading cubic coefficient must be non-zero, got {a0}"
            )));
        }
        Ok(Self { a0, a1, a2, a3 })
    }

    /// `-(λ + m)(λ² + (ξ + γ)λ + ξ(γ - 1))`.
    pub fn failed_treatment(m: f64, xi: f64, gamma: f64) -> Self {
        let q1 = xi + gamma;
        let q0 = xi * (gamma - 1.0);
        Self {
            a0: -1.0,
            a1: -(q1 + m),
            a2: -(q0 + m * q1),
            a3: -m * q0,
        }
    }

    /// Characteristic cubic at the coexistence equilibrium.
    pub fn coexistence(m: f64, xi: f64, gamma: f64) -> Self {
        Self {
            a0: -1.0,
            a1: -(gamma + m + xi),
            a2: gamma * m * (xi - 1.0) + xi * xi / gamma - xi * (2.0 * m + xi),
            a3: gamma * m * xi * (gamma - 1.0),
        }
    }

    /// Coefficients `(b1, b2, b3)` of the monic form `λ³ + b1 λ² + b2 λ + b3`.
    pub fn monic(&self) -> [f64; 3] {
        [self.a1 / self.a0, self.a2 / self.a0, self.a3 / self.a0]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        ((z * self.a0 + self.a1) * z + self.a2) * z + self.a3
    }

    /// Roots as eigenvalues of the companion matrix, sorted by real part.
    pub fn roots(&self) -> [Complex64; 3] {
        let [b1, b2, b3] = self.monic();
        let companion = Matrix3::new(-b1, -b2, -b3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        linalg::eigenvalues(&companion)
    }

    /// Standard cubic discriminant: positive for three distinct real roots,
    /// negative for a complex-conjugate pair.
    pub fn discriminant(&self) -> f64 {
        let (a, b, c, d) = (self.a0, self.a1, self.a2, self.a3);
        18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
            - 4.0 * a * c.powi(3)
            - 27.0 * a * a * d * d
    }

    fn discriminant_scale(&self) -> f64 {
        let (a, b, c, d) = (self.a0, self.a1, self.a2, self.a3);
        (18.0 * a * b * c * d).abs()
            + (4.0 * b.powi(3) * d).abs()
            + (b * b * c * c).abs()
            + (4.0 * a * c.powi(3)).abs()
            + (27.0 * a * a * d * d).abs()
    }

    /// The Hopf test quantity `a1 a2 - a0 a3`.
    pub fn hopf_function(&self) -> f64 {
        self.a1 * self.a2 - self.a0 * self.a3
    }
}

pub fn charpoly_failed(p: &ModelParams) -> CubicCoefficients {
    CubicCoefficients::failed_treatment(p.m, p.xi, p.gamma)
}

pub fn charpoly_coexistence(p: &ModelParams) -> CubicCoefficients {
    CubicCoefficients::coexistence(p.m, p.xi, p.gamma)
}

/// Absolute size below which a Routh–Hurwitz quantity counts as zero.
pub const RH_DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouthHurwitz {
    pub stable: bool,
    /// Some test quantity lies within [`RH_DEGENERATE_TOL`] of zero.
    pub degenerate: bool,
}

/// All roots in the open left half-plane iff, for the monic form,
/// `b1 > 0`, `b3 > 0` and `b1 b2 - b3 > 0`.
pub fn routh_hurwitz(c: &CubicCoefficients) -> RouthHurwitz {
    let [b1, b2, b3] = c.monic();
    let h = b1 * b2 - b3;
    RouthHurwitz {
        stable: b1 > 0.0 && b3 > 0.0 && h > 0.0,
        degenerate: [b1, b3, h].iter().any(|q| q.abs() < RH_DEGENERATE_TOL),
    }
}

pub fn routh_hurwitz_stable(c: &CubicCoefficients) -> bool {
    routh_hurwitz(c).stable
}

/// Node/spiral classification of the coexistence equilibrium.
pub fn classify_coexistence(p: &ModelParams) -> Classification {
    classify_cubic(&charpoly_coexistence(p))
}

pub fn classify_cubic(c: &CubicCoefficients) -> Classification {
    let rh = routh_hurwitz(c);
    let disc = c.discriminant();
    if rh.degenerate || disc.abs() <= 1e-12 * c.discriminant_scale() {
        return Classification::Indeterminate;
    }
    let complex = disc < 0.0;
    if rh.stable {
        return if complex {
            Classification::StableSpiral
        } else {
            Classification::StableNode
        };
    }
    if complex {
        return Classification::UnstableSpiral;
    }
    let roots = c.roots();
    if roots.iter().all(|z| z.re > 0.0) {
        Classification::UnstableNode
    } else {
        Classification::Saddle
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Parameter value in `[lo, hi]` where the coexistence cubic discriminant
/// changes sign, i.e. where the equilibrium switches between node and spiral.
pub fn node_spiral_switch(p: &ModelParams, param: Param, lo: f64, hi: f64) -> Option<f64> {
    let disc = |v: f64| {
        let q = with_unchecked(p, param, v);
        charpoly_coexistence(&q).discriminant()
    };
    bisect(disc, lo, hi, 1e-12)
}

pub(crate) fn with_unchecked(p: &ModelParams, param: Param, v: f64) -> ModelParams {
    let mut q = *p;
    match param {
        Param::M => q.m = v,
        Param::Xi => q.xi = v,
        Param::Gamma => q.gamma = v,
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    Stable,
    Unstable,
    Indeterminate,
}

impl ProbeVerdict {
    pub fn label(self) -> &'static str {
        match self {
            ProbeVerdict::Stable => "stable",
            ProbeVerdict::Unstable => "unstable",
            ProbeVerdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe: State,
    pub eigenvalues: [Complex64; 3],
    /// Eigenvalues at the probe scaled by 0.1.
    pub rescaled_eigenvalues: [Complex64; 3],
    pub verdict: ProbeVerdict,
}

fn sign_pattern(e: &[Complex64; 3]) -> [bool; 3] {
    [e[0].re < 0.0, e[1].re < 0.0, e[2].re < 0.0]
}

/// Jacobian eigenvalues at a small positive probe state near the origin.
///
/// The verdict is `Stable` when every eigenvalue has negative real part, and
/// `Indeterminate` when rescaling the probe by 0.1 changes the sign pattern.
pub fn eradication_probe(p: &ModelParams, probe: &State) -> Result<ProbeResult> {
    if !(probe.u > 0.0 && probe.i > 0.0 && probe.v > 0.0) {
        return Err(Error::Domain {
            u: probe.u,
            i: probe.i,
            v: probe.v,
            reason: "probe components must be strictly positive",
        });
    }
    let e1 = linalg::eigenvalues(&model::jacobian(p, probe)?);
    let e2 = linalg::eigenvalues(&model::jacobian(p, &probe.scaled(0.1))?);
    let verdict = if sign_pattern(&e1) != sign_pattern(&e2) {
        ProbeVerdict::Indeterminate
    } else if e1.iter().all(|z| z.re < 0.0) {
        ProbeVerdict::Stable
    } else {
        ProbeVerdict::Unstable
    };
    Ok(ProbeResult {
        probe: *probe,
        eigenvalues: e1,
        rescaled_eigenvalues: e2,
        verdict,
    })
}

/// Settings of [`eradication_attraction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttractionSettings {
    /// Starting state for `K = 100`; scaled proportionally for other `K`.
    pub probe: State,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
}

impl Default for AttractionSettings {
    fn default() -> Self {
        Self {
            probe: ERADICATION_PROBE,
            horizon: 20000.0,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Whether trajectories started at the probe state are absorbed by the
/// eradication equilibrium within the horizon.
///
/// `U` is absorbed once it falls below the integrator floor, so the verdict
/// reflects attraction at the resolution of the floor.
pub fn eradication_attraction(
    p: &ModelParams,
    settings: &AttractionSettings,
) -> Result<ProbeVerdict> {
    let start = settings.probe.scaled(p.k / DEFAULT_K);
    let traj = integrate(p, start, settings.horizon, &settings.integrator, None)?;
    Ok(if traj.absorbed_at.is_some() {
        ProbeVerdict::Stable
    } else {
        ProbeVerdict::Unstable
    })
}

/// `ξ` for which the coexistence equilibrium has `U* = u_t`:
/// `ξ = mγ/(γ - 1) ln(U_T/K)`.
pub fn threshold_contour(m: f64, gamma: f64, k: f64, u_t: f64) -> Result<f64> {
    ModelParams::new(m, 1.0, gamma, k)?;
    if gamma >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "threshold contour requires gamma < 1",
        });
    }
    if !(u_t > 0.0 && u_t <= k) {
        return Err(Error::InvalidParameter {
            name: "U_T",
            value: u_t,
            reason: "threshold must lie in (0, K]",
        });
    }
    Ok(m * gamma / (gamma - 1.0) * (u_t / k).ln())
}

/// Contour points as an `m,gamma,U_T,xi` table over a list of `m` values.
pub fn contour_table(ms: &[f64], gamma: f64, k: f64, u_t: f64) -> Result<Table> {
    let mut t = Table::new(&["m", "gamma", "U_T", "xi"]);
    for &m in ms {
        let xi = threshold_contour(m, gamma, k, u_t)?;
        t.push_floats(&[m, gamma, u_t, xi]);
    }
    Ok(t)
}

/// Evenly spaced values, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linspace {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Linspace {
    pub fn new(start: f64, end: f64, steps: usize) -> Self {
        Self { start, end, steps }
    }

    pub fn single(v: f64) -> Self {
        Self::new(v, v, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.end - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub m: Linspace,
    pub xi: Linspace,
    pub gamma: Linspace,
    #[serde(rename = "K", alias = "k", default = "default_k")]
    pub k: f64,
}

fn default_k() -> f64 {
    DEFAULT_K
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub params: ModelParams,
    pub stable: bool,
    pub classification: Classification,
    pub u_star: f64,
    pub physical: bool,
    /// Routh–Hurwitz quantities within tolerance of zero.
    pub degenerate: bool,
}

pub fn region_sample(p: &ModelParams) -> RegionSample {
    let c = charpoly_coexistence(p);
    let rh = routh_hurwitz(&c);
    let star = model::coexistence_state(p);
    RegionSample {
        params: *p,
        stable: rh.stable,
        classification: classify_cubic(&c),
        u_star: star.u,
        physical: p.coexistence_is_physical(),
        degenerate: rh.degenerate,
    }
}

/// Evaluate every grid point, ordered with `m` slowest and `gamma` fastest.
pub fn scan_region(grid: &RegionGrid) -> Result<Vec<RegionSample>> {
    let ms = grid.m.values();
    let xis = grid.xi.values();
    let gammas = grid.gamma.values();
    let mut points = Vec::with_capacity(ms.len() * xis.len() * gammas.len());
    for &m in &ms {
        for &xi in &xis {
            for &gamma in &gammas {
                points.push(ModelParams::new(m, xi, gamma, grid.k)?);
            }
        }
    }
    Ok(points.par_iter().map(region_sample).collect())
}

/// Samples whose `U*` lies in `[lo, hi]`.
pub fn ustar_slice(samples: &[RegionSample], lo: f64, hi: f64) -> Vec<RegionSample> {
    samples
        .iter()
        .filter(|s| s.u_star >= lo && s.u_star <= hi)
        .copied()
        .collect()
}

pub fn region_table(samples: &[RegionSample]) -> Table {
    let mut t = Table::new(&["m", "xi", "gamma", "stable", "class", "Ustar"]);
    for s in samples {
        t.push(vec![
            fmt_f64(s.params.m),
            fmt_f64(s.params.xi),
            fmt_f64(s.params.gamma),
            s.stable.to_string(),
            s.classification.label().to_string(),
            fmt_f64(s.u_star),
        ]);
    }
    t
}
