//! Run configuration: a JSON document with `--set key=value` overrides.

use std::path::{Path, PathBuf};

use oncovir::continuation::{BranchKind, ContinuationSettings, CycleSettings, EradicationSettings};
use oncovir::protocol::KappaSweepSettings;
use oncovir::stability::{Linspace, RegionGrid};
use oncovir::{DimensionalParams, InjectionSchedule, IntegratorConfig, ModelParams, Param, State};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub gamma: f64,
    #[serde(rename = "U_T")]
    pub u_t: f64,
    pub m: Linspace,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub grid: Option<RegionGrid>,
    /// Keep only samples with `U*` in `[lo, hi]`, written separately.
    pub slice: Option<[f64; 2]>,
    pub contour: Option<ContourConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSweep {
    pub values: Linspace,
    #[serde(default)]
    pub settings: CycleSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchConfig {
    pub param: Param,
    pub range: [f64; 2],
    pub kinds: Vec<BranchKind>,
    pub continuation: ContinuationSettings,
    pub eradication: EradicationSettings,
    pub cycles: Option<CycleSweep>,
}

impl Default for BranchConfig {
    fn default() -> Self {
        Self {
            param: Param::Xi,
            range: [0.005, 0.15],
            kinds: vec![
                BranchKind::Coexistence,
                BranchKind::FailedTreatment,
                BranchKind::Eradication,
            ],
            continuation: ContinuationSettings::default(),
            eradication: EradicationSettings::default(),
            cycles: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfCurveConfig {
    pub x: Param,
    pub values: Linspace,
    pub y: Param,
    pub y_range: [f64; 2],
    /// Bracket in `x` for locating a generalized Hopf point.
    pub generalized_hopf: Option<[f64; 2]>,
}

impl Default for HopfCurveConfig {
    fn default() -> Self {
        Self {
            x: Param::M,
            values: Linspace::new(0.01, 1.0, 100),
            y: Param::Xi,
            y_range: [1e-4, 1.0],
            generalized_hopf: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CyclesConfig {
    pub param: Param,
    pub values: Linspace,
    pub settings: CycleSettings,
}

impl Default for CyclesConfig {
    fn default() -> Self {
        Self {
            param: Param::Xi,
            values: Linspace::new(0.045, 0.095, 11),
            settings: CycleSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaSweepConfig {
    #[serde(rename = "D0")]
    pub d0: f64,
    pub kappas: Linspace,
    #[serde(default)]
    pub settings: KappaSweepSettings,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kappa_sweep: Option<KappaSweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosageConfig {
    #[serde(rename = "U0")]
    pub u0: f64,
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "V0")]
    pub v0: Linspace,
    pub horizon: f64,
}

impl Default for DosageConfig {
    fn default() -> Self {
        Self {
            u0: 50.0,
            i0: 10.0,
            v0: Linspace::new(20.0, 120.0, 11),
            horizon: 20000.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinConfig {
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "U0")]
    pub u0: Linspace,
    #[serde(rename = "V0")]
    pub v0: Linspace,
    pub horizon: f64,
}

impl Default for BasinConfig {
    fn default() -> Self {
        Self {
            i0: 10.0,
            u0: Linspace::new(10.0, 100.0, 10),
            v0: Linspace::new(5.0, 50.0, 10),
            horizon: 20000.0,
        }
    }
}

/// Everything a subcommand may read. Only the blocks relevant to the
/// invoked command are consulted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<ModelParams>,
    pub dimensional: Option<DimensionalParams>,
    /// Divide `K` and all populations by `K` after conversion.
    pub rescale: bool,
    /// Initial populations; raw virion counts when `dimensional` is used.
    pub initial: Option<State>,
    pub integrator: IntegratorConfig,
    /// Dimensionless end time.
    pub horizon: Option<f64>,
    pub schedule: Option<InjectionSchedule>,
    pub output: OutputConfig,
    pub region: RegionConfig,
    pub branch: BranchConfig,
    pub hopf_curve: HopfCurveConfig,
    pub cycles: CyclesConfig,
    pub protocol: ProtocolConfig,
    pub dosage_sweep: DosageConfig,
    pub basin: BasinConfig,
}

impl RunConfig {
    /// Dimensionless parameters from whichever block is present.
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        match (&self.params, &self.dimensional) {
            (Some(p), None) => {
                p.validate()?;
                Ok(if self.rescale { p.rescaled() } else { *p })
            }
            (None, Some(d)) => Ok(oncovir::nondimensionalize(d, self.rescale)?),
            (Some(_), Some(_)) => Err(CliError::Config(
                "`params` and `dimensional` are mutually exclusive".into(),
            )),
            (None, None) => Err(CliError::Config(
                "one of `params` or `dimensional` is required".into(),
            )),
        }
    }

    /// Initial state in model units; defaults to `(0.5K, 0.1K, 0.1K)`.
    pub fn initial_state(&self, p: &ModelParams) -> Result<State, CliError> {
        let s = match (self.initial, &self.dimensional) {
            (None, _) => State::new(0.5, 0.1, 0.1).scaled(p.k),
            (Some(raw), Some(d)) => d.to_model_state(raw, self.rescale),
            (Some(s), None) if self.rescale => s.scaled(1.0 / self.params.map_or(1.0, |q| q.k)),
            (Some(s), None) => s,
        };
        if !s.is_nonnegative() || !(s.u > 0.0 || s.is_zero()) {
            return Err(CliError::Config(format!("invalid initial state {s}")));
        }
        Ok(s)
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        match self.horizon {
            Some(h) if h > 0.0 && h.is_finite() => Ok(h),
            Some(h) => Err(CliError::Config(format!(
                "horizon must be positive, got {h}"
            ))),
            None => Err(CliError::Config("`horizon` is required".into())),
        }
    }
}

/// Apply `key.path=value` to a JSON document. The value is parsed as JSON
/// and falls back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("empty key segment in `{key}`")));
        }
        if !node.is_object() {
            return Err(CliError::Config(format!(
                "`{key}` does not address an object"
            )));
        }
        let map = node.as_object_mut().expect("checked above");
        if n + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Read the config file (if any), apply overrides and deserialize.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, Value), CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid JSON in {}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc.clone())
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    cfg.integrator.validate()?;
    Ok((cfg, doc))
}
