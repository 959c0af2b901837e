//! Gompertz tumour growth under oncolytic virotherapy.
//!
//! The crate covers the model equations, an adaptive integrator with
//! impulsive viral injections, closed-form and numerical stability analysis,
//! equilibrium and Hopf continuation, limit-cycle tracking and injection
//! protocol experiments.

pub mod continuation;
pub mod csv;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod protocol;
pub mod stability;

pub use error::{Error, Result};
pub use integrator::{
    integrate, integrate_to_outcome, IntegratorConfig, Outcome, OutcomeReport, Trajectory,
};
pub use model::{
    equilibria, jacobian, nondimensionalize, rhs, rhs_dimensional, Classification,
    DimensionalParams, Equilibrium, EquilibriumKind, ModelParams, Param, State,
};
pub use protocol::InjectionSchedule;
