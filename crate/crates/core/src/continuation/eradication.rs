//! Stability of the eradication equilibrium along one parameter.
//!
//! The Jacobian is singular at the origin, so stability is judged by whether
//! trajectories started at a small probe state are absorbed. The literal probe
//! eigenvalues are kept as diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BifurcationKind, BifurcationPoint, Branch, BranchKind, BranchPoint, Criticality};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Param, State, DEFAULT_K};
use crate::stability::{
    bisect, eradication_attraction, eradication_probe, with_unchecked, AttractionSettings,
    ProbeResult, ProbeVerdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EradicationSettings {
    pub samples: usize,
    /// Width of the final bracket around a stability change.
    pub tol: f64,
    pub attraction: AttractionSettings,
}

impl Default for EradicationSettings {
    fn default() -> Self {
        Self {
            samples: 21,
            tol: 1e-4,
            attraction: AttractionSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EradicationBranch {
    pub branch: Branch,
    /// Stability changes, labelled `Fold`.
    pub folds: Vec<BifurcationPoint>,
    /// Literal probe diagnostics, one per sample.
    pub probes: Vec<ProbeResult>,
    /// Parameter intervals whose probe verdict changes under rescaling.
    pub indeterminate: Vec<(f64, f64)>,
}

fn verdict(p: &ModelParams, settings: &AttractionSettings) -> Option<bool> {
    match eradication_attraction(p, settings) {
        Ok(ProbeVerdict::Stable) => Some(true),
        Ok(ProbeVerdict::Unstable) => Some(false),
        _ => None,
    }
}

/// Sample the eradication branch over `[lo, hi]` and bisect each change of
/// the attraction verdict to `settings.tol`.
pub fn eradication_branch_stability(
    base: &ModelParams,
    param: Param,
    (lo, hi): (f64, f64),
    settings: &EradicationSettings,
) -> Result<EradicationBranch> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid {} range ({lo}, {hi})",
            param.name()
        )));
    }
    if settings.samples < 2 {
        return Err(Error::InvalidInput(
            "at least two samples are required".into(),
        ));
    }
    base.with(param, lo)?;
    let n = settings.samples;
    let values: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let probe = settings.attraction.probe.scaled(base.k / DEFAULT_K);

    let sampled: Vec<(Option<bool>, ProbeResult)> = values
        .par_iter()
        .map(|&v| {
            let q = with_unchecked(base, param, v);
            let stable = verdict(&q, &settings.attraction);
            eradication_probe(&q, &probe).map(|pr| (stable, pr))
        })
        .collect::<Result<_>>()?;

    let branch = Branch {
        param,
        kind: BranchKind::Eradication,
        points: values
            .iter()
            .zip(&sampled)
            .map(|(&v, (stable, _))| BranchPoint {
                param_value: v,
                state: State::ZERO,
                stable: stable.unwrap_or(false),
            })
            .collect(),
    };

    let mut folds = Vec::new();
    for k in 0..n - 1 {
        let (Some(a), Some(b)) = (sampled[k].0, sampled[k + 1].0) else {
            continue;
        };
        if a == b {
            continue;
        }
        let f = |v: f64| match verdict(&with_unchecked(base, param, v), &settings.attraction) {
            Some(true) => 1.0,
            Some(false) => -1.0,
            None => f64::NAN,
        };
        if let Some(root) = bisect(f, values[k], values[k + 1], settings.tol) {
            let mut bp = BifurcationPoint::one_parameter(BifurcationKind::Fold, param, root);
            bp.state = Some(State::ZERO);
            bp.criticality = Criticality::NotApplicable;
            bp.eigenvalues = eradication_probe(&with_unchecked(base, param, root), &probe)
                .ok()
                .map(|pr| pr.eigenvalues);
            folds.push(bp);
        }
    }

    let mut indeterminate: Vec<(f64, f64)> = Vec::new();
    let mut open = false;
    for (k, (_, pr)) in sampled.iter().enumerate() {
        let hit = pr.verdict == ProbeVerdict::Indeterminate;
        match (hit, open, indeterminate.last_mut()) {
            (true, true, Some(seg)) => seg.1 = values[k],
            (true, _, _) => indeterminate.push((values[k], values[k])),
            _ => {}
        }
        open = hit;
    }

    Ok(EradicationBranch {
        branch,
        folds,
        probes: sampled.into_iter().map(|(_, pr)| pr).collect(),
        indeterminate,
    })
}
