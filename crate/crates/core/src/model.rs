//! Model equations, analytic derivatives and closed-form equilibria.
//!
//! The dimensionless system is
//!
//! ```text
//! dU/dt = m ln(K/U) U - U V / (U + I)
//! dI/dt = U V / (U + I) - xi I
//! dV/dt = -gamma V + xi I
//! ```
//!
//! where `m`, `xi` and `gamma` are the tumour growth rate, viral potency and
//! viral decay rate after scaling time by the effective infectivity
//! `beta_hat = beta * alpha`.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default carrying capacity used throughout the reference figures.
pub const DEFAULT_K: f64 = 100.0;

/// Time derivative of a [`State`], ordered `(dU, dI, dV)`.
pub type Rates = [f64; 3];

/// Rank-3 tensor of second derivatives, indexed `[component][a][b]`.
pub type Tensor3 = [[[f64; 3]; 3]; 3];

/// Rank-4 tensor of third derivatives, indexed `[component][a][b][c]`.
pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// A continuation/scan parameter of the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    M,
    Xi,
    Gamma,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::M, Param::Xi, Param::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Param::M => "m",
            Param::Xi => "xi",
            Param::Gamma => "gamma",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(Param::M),
            "xi" => Ok(Param::Xi),
            "gamma" => Ok(Param::Gamma),
            other => Err(Error::InvalidInput(format!(
                "unknown parameter '{other}' (expected m, xi or gamma)"
            ))),
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

/// Dimensionless parameter set `(m, xi, gamma, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub xi: f64,
    pub gamma: f64,
    #[serde(rename = "K", alias = "k", default = "default_k")]
    pub k: f64,
}

fn default_k() -> f64 {
    DEFAULT_K
}

impl ModelParams {
    pub fn new(m: f64, xi: f64, gamma: f64, k: f64) -> Result<Self> {
        let p = Self { m, xi, gamma, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("m", self.m)?;
        check_positive("xi", self.xi)?;
        check_positive("gamma", self.gamma)?;
        check_positive("K", self.k)
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::M => self.m,
            Param::Xi => self.xi,
            Param::Gamma => self.gamma,
        }
    }

    /// Copy with one parameter replaced; the result is validated.
    pub fn with(&self, param: Param, value: f64) -> Result<Self> {
        let mut p = *self;
        match param {
            Param::M => p.m = value,
            Param::Xi => p.xi = value,
            Param::Gamma => p.gamma = value,
        }
        p.validate()?;
        Ok(p)
    }

    /// Same growth/viral parameters with carrying capacity 1 (the K-rescaled form).
    pub fn rescaled(&self) -> Self {
        Self { k: 1.0, ..*self }
    }

    /// The coexistence branch carries positive `I*` and `V*` only for `gamma < 1`.
    pub fn coexistence_is_physical(&self) -> bool {
        self.gamma < 1.0
    }
}

/// Parameters of the original (dimensional) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// tumour growth rate (1/time)
    pub r: f64,
    /// carrying capacity (cells)
    #[serde(rename = "K", alias = "k")]
    pub k: f64,
    /// infectivity rate (1/(virions time))
    pub beta: f64,
    /// burst size (virions per cell)
    pub alpha: f64,
    /// infected-cell death rate (1/time)
    #[serde(rename = "d_I", alias = "d_i")]
    pub d_i: f64,
    /// viral decay rate (1/time)
    #[serde(rename = "d_V", alias = "d_v")]
    pub d_v: f64,
}

impl DimensionalParams {
    pub fn new(r: f64, k: f64, beta: f64, alpha: f64, d_i: f64, d_v: f64) -> Result<Self> {
        let p = Self {
            r,
            k,
            beta,
            alpha,
            d_i,
            d_v,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("r", self.r)?;
        check_positive("K", self.k)?;
        check_positive("beta", self.beta)?;
        check_positive("alpha", self.alpha)?;
        check_positive("d_I", self.d_i)?;
        check_positive("d_V", self.d_v)
    }

    /// Effective infectivity `beta * alpha`; dimensionless time is `t = beta_hat * tau`.
    pub fn beta_hat(&self) -> f64 {
        self.beta * self.alpha
    }

    /// Convert a state with raw virion counts into model units (`V = v / alpha`),
    /// optionally dividing every component by `K`.
    pub fn to_model_state(&self, raw: State, rescale_by_k: bool) -> State {
        let s = State::new(raw.u, raw.i, raw.v / self.alpha);
        if rescale_by_k {
            s.scaled(1.0 / self.k)
        } else {
            s
        }
    }

    /// Inverse of [`DimensionalParams::to_model_state`].
    pub fn to_raw_state(&self, model: State, rescaled_by_k: bool) -> State {
        let s = if rescaled_by_k {
            model.scaled(self.k)
        } else {
            model
        };
        State::new(s.u, s.i, s.v * self.alpha)
    }
}

/// Map dimensional parameters onto the dimensionless model.
///
/// With `rescale_by_k` the carrying capacity becomes 1 and all populations
/// are measured in units of `K`.
pub fn nondimensionalize(p: &DimensionalParams, rescale_by_k: bool) -> Result<ModelParams> {
    p.validate()?;
    let bh = p.beta_hat();
    ModelParams::new(
        p.r / bh,
        p.d_i / bh,
        p.d_v / bh,
        if rescale_by_k { 1.0 } else { p.k },
    )
}

/// Populations `(U, I, V)` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    #[serde(rename = "U", alias = "u")]
    pub u: f64,
    #[serde(rename = "I", alias = "i")]
    pub i: f64,
    #[serde(rename = "V", alias = "v")]
    pub v: f64,
}

impl State {
    pub const ZERO: State = State {
        u: 0.0,
        i: 0.0,
        v: 0.0,
    };

    pub const fn new(u: f64, i: f64, v: f64) -> Self {
        Self { u, i, v }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.i, self.v]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::new(self.u * factor, self.i * factor, self.v * factor)
    }

    pub fn total(&self) -> f64 {
        self.u + self.i + self.v
    }

    pub fn is_zero(&self) -> bool {
        self.u == 0.0 && self.i == 0.0 && self.v == 0.0
    }

    pub fn is_nonnegative(&self) -> bool {
        self.u >= 0.0 && self.i >= 0.0 && self.v >= 0.0
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.i * self.i + self.v * self.v).sqrt()
    }

    fn domain_error(&self, reason: &'static str) -> Error {
        Error::Domain {
            u: self.u,
            i: self.i,
            v: self.v,
            reason,
        }
    }

    /// The infection term and logarithm need `U > 0` and `U + I > 0`.
    pub(crate) fn check_interior(&self) -> Result<()> {
        if !(self.u.is_finite() && self.i.is_finite() && self.v.is_finite()) {
            return Err(self.domain_error("non-finite component"));
        }
        if self.u <= 0.0 {
            return Err(self.domain_error("U must be positive (ln(K/U) undefined)"));
        }
        if self.u + self.i <= 0.0 {
            return Err(self.domain_error("U + I must be positive"));
        }
        Ok(())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(U={}, I={}, V={})", self.u, self.i, self.v)
    }
}

/// Right-hand side of the dimensionless model.
pub fn rhs(p: &ModelParams, s: &State) -> Result<Rates> {
    s.check_interior()?;
    let infection = s.u * s.v / (s.u + s.i);
    Ok([
        p.m * (p.k / s.u).ln() * s.u - infection,
        infection - p.xi * s.i,
        -p.gamma * s.v + p.xi * s.i,
    ])
}

/// Right-hand side of the dimensional model. `s.v` holds raw virion counts.
pub fn rhs_dimensional(p: &DimensionalParams, s: &State) -> Result<Rates> {
    s.check_interior()?;
    let infection = p.beta * s.u * s.v / (s.u + s.i);
    Ok([
        p.r * (p.k / s.u).ln() * s.u - infection,
        infection - p.d_i * s.i,
        -p.d_v * s.v + p.alpha * p.d_i * s.i,
    ])
}

/// Analytic Jacobian of [`rhs`].
pub fn jacobian(p: &ModelParams, s: &State) -> Result<Matrix3<f64>> {
    s.check_interior()?;
    Ok(jacobian_unchecked(p, s))
}

pub(crate) fn jacobian_unchecked(p: &ModelParams, s: &State) -> Matrix3<f64> {
    let sum = s.u + s.i;
    // ratios are formed first so that tiny populations do not underflow
    jacobian_from_ratios(p, (p.k / s.u).ln(), s.u / sum, s.v / sum, s.i / sum)
}

fn jacobian_from_ratios(
    p: &ModelParams,
    log_ratio: f64,
    frac: f64,
    vs: f64,
    is: f64,
) -> Matrix3<f64> {
    Matrix3::new(
        p.m * log_ratio - p.m - vs * is,
        vs * frac,
        -frac,
        vs * is,
        -p.xi - vs * frac,
        frac,
        0.0,
        p.xi,
        -p.gamma,
    )
}

/// Jacobian at the coexistence equilibrium from the closed-form ratios
/// `ln(K/U*)`, `U*/(U*+I*) = γ` and `V*/(U*+I*)`, valid even when `U*`
/// underflows.
pub fn coexistence_jacobian(p: &ModelParams) -> Matrix3<f64> {
    let g = p.gamma;
    jacobian_from_ratios(
        p,
        p.xi * (1.0 - g) / (p.m * g),
        g,
        p.xi * (1.0 - g) / g,
        1.0 - g,
    )
}

/// Derivative of [`rhs`] with respect to one parameter.
pub fn param_derivative(p: &ModelParams, s: &State, param: Param) -> Rates {
    match param {
        Param::M => [(p.k / s.u).ln() * s.u, 0.0, 0.0],
        Param::Xi => [0.0, -s.i, s.i],
        Param::Gamma => [0.0, 0.0, -s.v],
    }
}

/// Second derivatives of [`rhs`]: `out[c][a][b] = d2 f_c / dx_a dx_b`.
pub fn second_derivatives(p: &ModelParams, s: &State) -> Result<Tensor3> {
    s.check_interior()?;
    let (u, i, v) = (s.u, s.i, s.v);
    let sum = u + i;
    let s3 = sum * sum * sum;
    let phi_u = i / (sum * sum);
    let phi_i = -u / (sum * sum);
    let phi_uu = -2.0 * i / s3;
    let phi_ui = (u - i) / s3;
    let phi_ii = 2.0 * u / s3;

    // infection term h = V * phi(U, I)
    let mut h = [[0.0; 3]; 3];
    h[0][0] = v * phi_uu;
    h[0][1] = v * phi_ui;
    h[1][0] = h[0][1];
    h[1][1] = v * phi_ii;
    h[0][2] = phi_u;
    h[2][0] = phi_u;
    h[1][2] = phi_i;
    h[2][1] = phi_i;

    let mut out = [[[0.0; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[0][a][b] = -h[a][b];
            out[1][a][b] = h[a][b];
        }
    }
    out[0][0][0] += -p.m / u;
    Ok(out)
}

/// Third derivatives of [`rhs`]: `out[c][a][b][d]`.
pub fn third_derivatives(p: &ModelParams, s: &State) -> Result<Tensor4> {
    s.check_interior()?;
    let (u, i, v) = (s.u, s.i, s.v);
    let sum = u + i;
    let s3 = sum * sum * sum;
    let s4 = s3 * sum;
    // phi derivatives keyed by the number of I-derivatives (U-order = 3 - n)
    let phi3 = [
        6.0 * i / s4,
        (4.0 * i - 2.0 * u) / s4,
        (2.0 * i - 4.0 * u) / s4,
        -6.0 * u / s4,
    ];
    let phi2 = [-2.0 * i / s3, (u - i) / s3, 2.0 * u / s3];

    let mut h = [[[0.0; 3]; 3]; 3];
    for (a, ha) in h.iter_mut().enumerate() {
        for (b, hab) in ha.iter_mut().enumerate() {
            for (c, habc) in hab.iter_mut().enumerate() {
                let idx = [a, b, c];
                let n_v = idx.iter().filter(|&&x| x == 2).count();
                let n_i = idx.iter().filter(|&&x| x == 1).count();
                *habc = match n_v {
                    0 => v * phi3[n_i],
                    1 => phi2[n_i],
                    _ => 0.0,
                };
            }
        }
    }

    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                out[0][a][b][c] = -h[a][b][c];
                out[1][a][b][c] = h[a][b][c];
            }
        }
    }
    out[0][0][0][0] += p.m / (u * u);
    Ok(out)
}

/// Closed-form coexistence equilibrium `(U*, I*, V*)`.
///
/// Defined for every `gamma > 0`; for `gamma >= 1` the infected and viral
/// components are non-positive and the point is not biologically meaningful.
pub fn coexistence_state(p: &ModelParams) -> State {
    let u = p.k * (p.xi * (p.gamma - 1.0) / (p.m * p.gamma)).exp();
    let i = u * (1.0 - p.gamma) / p.gamma;
    let v = p.xi * i / p.gamma;
    State::new(u, i, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumKind {
    FailedTreatment,
    Coexistence,
    Eradication,
}

impl EquilibriumKind {
    pub fn label(self) -> &'static str {
        match self {
            EquilibriumKind::FailedTreatment => "failed_treatment",
            EquilibriumKind::Coexistence => "coexistence",
            EquilibriumKind::Eradication => "eradication",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    StableNode,
    StableSpiral,
    UnstableNode,
    UnstableSpiral,
    Saddle,
    Indeterminate,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::StableNode => "stable_node",
            Classification::StableSpiral => "stable_spiral",
            Classification::UnstableNode => "unstable_node",
            Classification::UnstableSpiral => "unstable_spiral",
            Classification::Saddle => "saddle",
            Classification::Indeterminate => "indeterminate",
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(
            self,
            Classification::StableNode | Classification::StableSpiral
        )
    }
}

/// Relative size below which a real part or imaginary part is treated as zero.
const EIGEN_ZERO: f64 = 1e-12;

/// Local classification from a full set of eigenvalues.
pub fn classify_eigenvalues(eigs: &[Complex64; 3]) -> Classification {
    let scale = eigs.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let tol = EIGEN_ZERO * scale.max(1.0);
    if eigs.iter().any(|z| z.re.abs() <= tol) {
        return Classification::Indeterminate;
    }
    let n_neg = eigs.iter().filter(|z| z.re < 0.0).count();
    let complex = eigs.iter().any(|z| z.im.abs() > tol);
    match (n_neg, complex) {
        (3, false) => Classification::StableNode,
        (3, true) => Classification::StableSpiral,
        (0, false) => Classification::UnstableNode,
        (0, true) => Classification::UnstableSpiral,
        _ => Classification::Saddle,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub state: State,
    pub eigenvalues: [Complex64; 3],
    pub classification: Classification,
    /// `false` when some component is negative (coexistence with `gamma >= 1`).
    pub physical: bool,
}

/// Probe point used when the Jacobian at the origin is required.
pub const ERADICATION_PROBE: State = State::new(1e-7, 1e-4, 1e-5);

/// The three equilibria: failed treatment, coexistence and eradication.
///
/// The eradication entry carries the Jacobian eigenvalues at
/// [`ERADICATION_PROBE`] (the Jacobian is singular at the origin itself) and
/// is always classified `Indeterminate`; use
/// [`crate::stability::eradication_probe`] or
/// [`crate::stability::eradication_attraction`] for a verdict.
pub fn equilibria(p: &ModelParams) -> Vec<Equilibrium> {
    let failed = State::new(p.k, 0.0, 0.0);
    let failed_eigs = linalg::eigenvalues(&jacobian_unchecked(p, &failed));

    let coex = coexistence_state(p);
    let coex_eigs = linalg::eigenvalues(&coexistence_jacobian(p));
    let coex_physical = p.coexistence_is_physical() && coex.is_nonnegative();

    let probe = ERADICATION_PROBE.scaled(p.k / DEFAULT_K);
    let probe_eigs = linalg::eigenvalues(&jacobian_unchecked(p, &probe));

    vec![
        Equilibrium {
            kind: EquilibriumKind::FailedTreatment,
            state: failed,
            eigenvalues: failed_eigs,
            classification: classify_eigenvalues(&failed_eigs),
            physical: true,
        },
        Equilibrium {
            kind: EquilibriumKind::Coexistence,
            state: coex,
            eigenvalues: coex_eigs,
            classification: classify_eigenvalues(&coex_eigs),
            physical: coex_physical,
        },
        Equilibrium {
            kind: EquilibriumKind::Eradication,
            state: State::ZERO,
            eigenvalues: probe_eigs,
            classification: Classification::Indeterminate,
            physical: true,
        },
    ]
}
