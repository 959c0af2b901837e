//! Equilibrium continuation, bifurcation detection, Hopf loci, Hopf
//! criticality, limit-cycle tracking and the stability of the eradication
//! branch.

pub mod cycles;
pub mod equilibrium;
pub mod eradication;
pub mod hopf;
pub mod lyapunov;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_f64, Table};
use crate::model::{Param, State};

pub use cycles::{cycle_table, track_cycles, CycleMeasurement, CycleRecord, CycleSettings};
pub use equilibrium::{continue_equilibrium, EquilibriumContinuation};
pub use eradication::{eradication_branch_stability, EradicationBranch, EradicationSettings};
pub use hopf::{
    classify_hopf, hopf_locus, hopf_points_along, locate_generalized_hopf, HopfClassification,
    HopfCurve, HopfLocusPoint, HopfSimulation,
};
pub use lyapunov::{first_lyapunov_coefficient, lyapunov_coefficient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    FailedTreatment,
    Coexistence,
    Eradication,
    PeriodicOrbit,
}

impl BranchKind {
    pub fn label(self) -> &'static str {
        match self {
            BranchKind::FailedTreatment => "failed_treatment",
            BranchKind::Coexistence => "coexistence",
            BranchKind::Eradication => "eradication",
            BranchKind::PeriodicOrbit => "periodic_orbit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub param_value: f64,
    pub state: State,
    pub stable: bool,
}

/// A solution curve parameterised by one model parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub param: Param,
    pub kind: BranchKind,
    pub points: Vec<BranchPoint>,
}

impl Branch {
    /// `param,U,I,V,stable` table.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["param", "U", "I", "V", "stable"]);
        for pt in &self.points {
            t.push(vec![
                fmt_f64(pt.param_value),
                fmt_f64(pt.state.u),
                fmt_f64(pt.state.i),
                fmt_f64(pt.state.v),
                pt.stable.to_string(),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationKind {
    Hopf,
    Fold,
    BranchPoint,
    GeneralizedHopf,
}

impl BifurcationKind {
    pub fn label(self) -> &'static str {
        match self {
            BifurcationKind::Hopf => "hopf",
            BifurcationKind::Fold => "fold",
            BifurcationKind::BranchPoint => "branch_point",
            BifurcationKind::GeneralizedHopf => "generalized_hopf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Supercritical,
    Subcritical,
    NotApplicable,
}

impl Criticality {
    pub fn label(self) -> &'static str {
        match self {
            Criticality::Supercritical => "supercritical",
            Criticality::Subcritical => "subcritical",
            Criticality::NotApplicable => "not_applicable",
        }
    }

    /// Criticality from the sign of the first Lyapunov coefficient.
    pub fn from_lyapunov(l1: Option<f64>) -> Self {
        match l1 {
            Some(l) if l < 0.0 => Criticality::Supercritical,
            Some(l) if l > 0.0 => Criticality::Subcritical,
            _ => Criticality::NotApplicable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kind: BifurcationKind,
    pub param1: Param,
    pub value1: f64,
    pub param2: Option<Param>,
    pub value2: Option<f64>,
    pub criticality: Criticality,
    pub state: Option<State>,
    pub eigenvalues: Option<[Complex64; 3]>,
    pub lyapunov: Option<f64>,
}

impl BifurcationPoint {
    pub fn one_parameter(kind: BifurcationKind, param: Param, value: f64) -> Self {
        Self {
            kind,
            param1: param,
            value1: value,
            param2: None,
            value2: None,
            criticality: Criticality::NotApplicable,
            state: None,
            eigenvalues: None,
            lyapunov: None,
        }
    }
}

/// `kind,param1,value1,param2,value2,criticality` table; one-parameter
/// points leave the second pair empty.
pub fn bifurcation_table(points: &[BifurcationPoint]) -> Table {
    let mut t = Table::new(&[
        "kind",
        "param1",
        "value1",
        "param2",
        "value2",
        "criticality",
    ]);
    for b in points {
        t.push(vec![
            b.kind.label().to_string(),
            b.param1.name().to_string(),
            fmt_f64(b.value1),
            b.param2.map(|p| p.name().to_string()).unwrap_or_default(),
            b.value2.map(fmt_f64).unwrap_or_default(),
            b.criticality.label().to_string(),
        ]);
    }
    t
}

/// Pseudo-arclength continuation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub ds_initial: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_points: usize,
    /// Bracket width in the parameter at which detected points are accepted.
    pub locate_tol: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            ds_initial: 1e-3,
            ds_min: 1e-5,
            ds_max: 1e-2,
            newton_tol: 1e-10,
            newton_max_iter: 20,
            max_points: 200_000,
            locate_tol: 1e-12,
        }
    }
}
