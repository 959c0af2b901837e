//! Pseudo-arclength continuation of the failed-treatment and coexistence
//! equilibria in one parameter.
//!
//! The continuation runs on the system rescaled by `K` (carrying capacity 1)
//! and maps states back by `K` on output.

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{
    lyapunov, BifurcationKind, BifurcationPoint, Branch, BranchKind, BranchPoint,
    ContinuationSettings, Criticality,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, ModelParams, Param, State};
use crate::stability::{self, bisect, with_unchecked};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumContinuation {
    pub branch: Branch,
    pub bifurcations: Vec<BifurcationPoint>,
}

struct Problem {
    base: ModelParams,
    param: Param,
    settings: ContinuationSettings,
}

#[derive(Clone, Copy)]
struct Point {
    w: Vector4<f64>,
    tangent: Vector4<f64>,
    hopf: f64,
    c2: f64,
    det: f64,
}

/// Monic characteristic polynomial coefficients `(c1, c2, c3)` of a 3x3 matrix.
fn charpoly(j: &Matrix3<f64>) -> [f64; 3] {
    let minors = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)] + j[(0, 0)] * j[(2, 2)]
        - j[(0, 2)] * j[(2, 0)]
        + j[(1, 1)] * j[(2, 2)]
        - j[(1, 2)] * j[(2, 1)];
    [-j.trace(), minors, -j.determinant()]
}

impl Problem {
    fn params(&self, lambda: f64) -> ModelParams {
        with_unchecked(&self.base, self.param, lambda)
    }

    fn state(w: &Vector4<f64>) -> State {
        State::new(w[0], w[1], w[2])
    }

    fn residual(&self, w: &Vector4<f64>) -> Result<[f64; 3]> {
        model::rhs(&self.params(w[3]), &Self::state(w))
    }

    fn extended_jacobian(&self, w: &Vector4<f64>) -> Result<(Matrix3<f64>, [f64; 3])> {
        let q = self.params(w[3]);
        let s = Self::state(w);
        let j = model::jacobian(&q, &s)?;
        Ok((j, model::param_derivative(&q, &s, self.param)))
    }

    /// Unit null vector of `[J | F_λ]` from signed 3x3 minors.
    fn tangent(&self, w: &Vector4<f64>, orient: &Vector4<f64>) -> Result<Vector4<f64>> {
        let (j, fl) = self.extended_jacobian(w)?;
        let cols = [
            j.column(0).into_owned(),
            j.column(1).into_owned(),
            j.column(2).into_owned(),
            nalgebra::Vector3::from(fl),
        ];
        let mut t = Vector4::zeros();
        for k in 0..4 {
            let others: Vec<_> = (0..4).filter(|&c| c != k).map(|c| cols[c]).collect();
            let m = Matrix3::from_columns(&others);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            t[k] = sign * m.determinant();
        }
        let n = t.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(self.failure(w[3], "singular extended Jacobian"));
        }
        t /= n;
        if t.dot(orient) < 0.0 {
            t = -t;
        }
        Ok(t)
    }

    fn failure(&self, value: f64, reason: &str) -> Error {
        Error::ContinuationFailed {
            param: self.param.name(),
            value,
            reason: reason.to_string(),
        }
    }

    /// Newton on `F(w) = 0`, `d . (w - w_pred) = 0`.
    fn correct(&self, w_pred: &Vector4<f64>, d: &Vector4<f64>) -> Option<(Vector4<f64>, usize)> {
        let mut w = *w_pred;
        for it in 1..=self.settings.newton_max_iter {
            let f = self.residual(&w).ok()?;
            let (j, fl) = self.extended_jacobian(&w).ok()?;
            let mut m = Matrix4::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    m[(r, c)] = j[(r, c)];
                }
                m[(r, 3)] = fl[r];
            }
            for c in 0..4 {
                m[(3, c)] = d[c];
            }
            let g = Vector4::new(f[0], f[1], f[2], d.dot(&(w - w_pred)));
            let delta = m.lu().solve(&(-g))?;
            w += delta;
            if !w.iter().all(|x| x.is_finite()) {
                return None;
            }
            if delta.norm() < self.settings.newton_tol {
                let f = self.residual(&w).ok()?;
                if f.iter().all(|x| x.abs() < self.settings.newton_tol) {
                    return Some((w, it));
                }
            }
        }
        None
    }

    fn evaluate(&self, w: Vector4<f64>, tangent: Vector4<f64>) -> Result<Point> {
        let (j, _) = self.extended_jacobian(&w)?;
        let [c1, c2, c3] = charpoly(&j);
        Ok(Point {
            w,
            tangent,
            hopf: c1 * c2 - c3,
            c2,
            det: j.determinant(),
        })
    }

    fn trace(&self, start: Vector4<f64>, dir: f64, range: (f64, f64)) -> Result<Vec<Point>> {
        let st = &self.settings;
        let e_lambda = Vector4::new(0.0, 0.0, 0.0, dir);
        let t0 = self.tangent(&start, &e_lambda)?;
        let mut pts = vec![self.evaluate(start, t0)?];
        let mut ds = st.ds_initial.clamp(st.ds_min, st.ds_max);
        while pts.len() < st.max_points {
            let last = *pts.last().expect("non-empty");
            let w_pred = last.w + last.tangent * ds;
            match self.correct(&w_pred, &last.tangent) {
                Some((w, iters)) => {
                    if w[3] < range.0 || w[3] > range.1 {
                        break;
                    }
                    let t = self.tangent(&w, &last.tangent)?;
                    pts.push(self.evaluate(w, t)?);
                    if iters <= 3 {
                        ds = (ds * 1.5).min(st.ds_max);
                    } else if iters > 8 {
                        ds = (ds * 0.5).max(st.ds_min);
                    }
                }
                None => {
                    if ds <= st.ds_min {
                        return Err(self.failure(last.w[3], "corrector failed at minimum step"));
                    }
                    ds = (ds * 0.5).max(st.ds_min);
                }
            }
        }
        Ok(pts)
    }

    /// Locate a zero of `test` between `pts[i]` and `pts[i + 1]`.
    ///
    /// Bisects along the secant, correcting on the hyperplane orthogonal to
    /// it. Where the corrector stalls (next to a branch point) the zero is
    /// found by inverse cubic interpolation through the nearest evaluated
    /// points and neighbouring branch points.
    fn refine<F: Fn(&Point) -> f64>(&self, pts: &[Point], i: usize, test: F) -> Option<Point> {
        let (a, b) = (&pts[i], &pts[i + 1]);
        let d = b.w - a.w;
        let dn = d.normalize();
        let (mut lo, mut hi) = (0.0, 1.0);
        let f_lo0 = test(a);
        let mut f_lo = f_lo0;
        let mut samples: Vec<(f64, Point)> = vec![(f_lo0, *a), (test(b), *b)];
        if i > 0 {
            samples.push((test(&pts[i - 1]), pts[i - 1]));
        }
        if i + 2 < pts.len() {
            samples.push((test(&pts[i + 2]), pts[i + 2]));
        }
        for _ in 0..100 {
            if (hi - lo) * d[3].abs().max(f64::EPSILON) < self.settings.locate_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let w_pred = a.w + d * mid;
            let Some((w, _)) = self.correct(&w_pred, &dn) else {
                break;
            };
            let Ok(t) = self.tangent(&w, &a.tangent) else {
                break;
            };
            let pt = self.evaluate(w, t).ok()?;
            let fm = test(&pt);
            if fm == 0.0 {
                return Some(pt);
            }
            samples.push((fm, pt));
            if fm.signum() == f_lo.signum() {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
            if (hi - lo) * d[3].abs().max(f64::EPSILON) < self.settings.locate_tol {
                return Some(pt);
            }
        }
        samples.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()));
        samples.truncate(4);
        let mut w = Vector4::zeros();
        for (k, (fk, pk)) in samples.iter().enumerate() {
            let mut weight = 1.0;
            for (j, (fj, _)) in samples.iter().enumerate() {
                if j != k {
                    weight *= fj / (fj - fk);
                }
            }
            w += pk.w * weight;
        }
        self.evaluate(w, a.tangent).ok()
    }

    fn stable_at(&self, kind: BranchKind, lambda: f64) -> bool {
        let q = self.params(lambda);
        let c = match kind {
            BranchKind::FailedTreatment => stability::charpoly_failed(&q),
            _ => stability::charpoly_coexistence(&q),
        };
        stability::routh_hurwitz_stable(&c)
    }
}

/// Continue an equilibrium branch in `param` over `range`, starting at the
/// value held by `p0`, and locate Hopf points, folds and branch points.
pub fn continue_equilibrium(
    p0: &ModelParams,
    kind: BranchKind,
    param: Param,
    range: (f64, f64),
    settings: &ContinuationSettings,
) -> Result<EquilibriumContinuation> {
    p0.validate()?;
    let (lo, hi) = range;
    let start_value = p0.get(param);
    if !(lo > 0.0 && lo < hi && (lo..=hi).contains(&start_value)) {
        return Err(Error::InvalidInput(format!(
            "range [{lo}, {hi}] must be positive and contain the starting {param} = {start_value}"
        )));
    }
    let base = p0.rescaled();
    let s0 = match kind {
        BranchKind::FailedTreatment => State::new(1.0, 0.0, 0.0),
        BranchKind::Coexistence => model::coexistence_state(&base),
        other => {
            return Err(Error::InvalidInput(format!(
                "equilibrium continuation supports failed_treatment and coexistence, not {}",
                other.label()
            )))
        }
    };
    let prob = Problem {
        base,
        param,
        settings: *settings,
    };
    let start = Vector4::new(s0.u, s0.i, s0.v, start_value);

    let mut backward = prob.trace(start, -1.0, range)?;
    let forward = prob.trace(start, 1.0, range)?;
    backward.reverse();
    backward.pop();
    // re-orient the reversed half so tangents point towards increasing arclength
    for p in backward.iter_mut() {
        p.tangent = -p.tangent;
    }
    let pts: Vec<Point> = backward.into_iter().chain(forward).collect();

    let k = p0.k;
    let branch = Branch {
        param,
        kind,
        points: pts
            .iter()
            .map(|p| BranchPoint {
                param_value: p.w[3],
                state: Problem::state(&p.w).scaled(k),
                stable: prob.stable_at(kind, p.w[3]),
            })
            .collect(),
    };

    let mut bifurcations = Vec::new();
    for idx in 0..pts.len().saturating_sub(1) {
        let (a, b) = (&pts[idx], &pts[idx + 1]);
        if a.hopf.signum() != b.hopf.signum() && (a.c2 > 0.0 || b.c2 > 0.0) {
            if let Some(pt) = prob.refine(&pts, idx, |p| p.hopf) {
                if pt.c2 > 0.0 {
                    bifurcations.push(hopf_point(&prob, kind, &pt, k));
                }
            }
        }
        if a.det.signum() != b.det.signum() {
            let fold = a.tangent[3].signum() != b.tangent[3].signum();
            let bk = if fold {
                BifurcationKind::Fold
            } else {
                BifurcationKind::BranchPoint
            };
            let det = |v: f64| closed_form_cubic(&prob, kind, v).a3;
            let polished = bisect(det, a.w[3].min(b.w[3]), a.w[3].max(b.w[3]), 1e-15);
            let located = match polished {
                Some(v) => Some((v, closed_form_state(&prob, kind, v))),
                None => prob
                    .refine(&pts, idx, |p| p.det)
                    .map(|pt| (pt.w[3], Problem::state(&pt.w))),
            };
            if let Some((value, state)) = located {
                let mut bp = BifurcationPoint::one_parameter(bk, param, value);
                bp.state = Some(state.scaled(k));
                if let Ok(j) = model::jacobian(&prob.params(value), &state) {
                    bp.eigenvalues = Some(linalg::eigenvalues(&j));
                }
                bifurcations.push(bp);
            }
        }
    }
    Ok(EquilibriumContinuation {
        branch,
        bifurcations,
    })
}

fn closed_form_cubic(prob: &Problem, kind: BranchKind, v: f64) -> stability::CubicCoefficients {
    match kind {
        BranchKind::FailedTreatment => stability::charpoly_failed(&prob.params(v)),
        _ => stability::charpoly_coexistence(&prob.params(v)),
    }
}

fn closed_form_state(prob: &Problem, kind: BranchKind, v: f64) -> State {
    match kind {
        BranchKind::FailedTreatment => State::new(1.0, 0.0, 0.0),
        _ => model::coexistence_state(&prob.params(v)),
    }
}

fn hopf_point(prob: &Problem, kind: BranchKind, pt: &Point, k: f64) -> BifurcationPoint {
    let mut value = pt.w[3];
    let mut state = Problem::state(&pt.w);
    if kind == BranchKind::Coexistence {
        // polish on the closed-form boundary a1 a2 - a0 a3 = 0
        let h = |v: f64| stability::charpoly_coexistence(&prob.params(v)).hopf_function();
        let mut width = 1e-6 * value.abs().max(1e-3);
        for _ in 0..20 {
            if let Some(root) = bisect(h, value - width, value + width, 1e-15) {
                value = root;
                state = model::coexistence_state(&prob.params(root));
                break;
            }
            width *= 4.0;
        }
    }
    let q = prob.params(value);
    let mut bp = BifurcationPoint::one_parameter(BifurcationKind::Hopf, prob.param, value);
    bp.state = Some(state.scaled(k));
    if let Ok(j) = model::jacobian(&q, &state) {
        bp.eigenvalues = Some(linalg::eigenvalues(&j));
    }
    bp.lyapunov = lyapunov::first_lyapunov_coefficient(&q, &state)
        .ok()
        .flatten();
    bp.criticality = Criticality::from_lyapunov(bp.lyapunov);
    bp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(m: f64, xi: f64, gamma: f64) -> ModelParams {
        ModelParams::new(m, xi, gamma, 100.0).unwrap()
    }

    #[test]
    fn coexistence_in_xi_finds_supercritical_hopf() {
        let res = continue_equilibrium(
            &p(0.1, 0.01, 0.1),
            BranchKind::Coexistence,
            Param::Xi,
            (0.005, 0.09),
            &ContinuationSettings::default(),
        )
        .unwrap();
        let hopf: Vec<_> = res
            .bifurcations
            .iter()
            .filter(|b| b.kind == BifurcationKind::Hopf)
            .collect();
        assert_eq!(hopf.len(), 1, "{:?}", res.bifurcations);
        let h = hopf[0];
        assert!((h.value1 - 0.0429).abs() < 1e-3, "{}", h.value1);
        assert_eq!(h.criticality, Criticality::Supercritical);
        let re = h
            .eigenvalues
            .unwrap()
            .iter()
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min);
        assert!(re < 1e-8);
        let c = stability::charpoly_coexistence(&p(0.1, h.value1, 0.1));
        assert!(c.hopf_function().abs() < 1e-8);
        for pair in res.branch.points.windows(2) {
            assert!(pair[1].param_value > pair[0].param_value);
            assert!(pair[1].param_value - pair[0].param_value < 1e-2);
        }
        for pt in &res.branch.points {
            let r = model::rhs(&p(0.1, pt.param_value, 0.1), &pt.state).unwrap();
            assert!(r.iter().all(|x| x.abs() < 1e-8), "{r:?}");
        }
    }

    #[test]
    fn coexistence_in_gamma_meets_failed_branch_at_one() {
        let res = continue_equilibrium(
            &p(0.1, 0.01, 0.1),
            BranchKind::Coexistence,
            Param::Gamma,
            (0.02, 1.3),
            &ContinuationSettings::default(),
        )
        .unwrap();
        let bps: Vec<_> = res
            .bifurcations
            .iter()
            .filter(|b| b.kind == BifurcationKind::BranchPoint)
            .collect();
        let last = res.branch.points.last().unwrap().param_value;
        assert_eq!(bps.len(), 1, "{:?} last {last}", res.bifurcations);
        assert!((bps[0].value1 - 1.0).abs() < 1e-6, "{}", bps[0].value1);
        let us: Vec<f64> = res
            .branch
            .points
            .iter()
            .filter(|pt| pt.param_value < 1.0)
            .map(|pt| pt.state.u)
            .collect();
        assert!(us.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn failed_branch_in_gamma_has_branch_point() {
        let res = continue_equilibrium(
            &p(0.1, 0.01, 0.5),
            BranchKind::FailedTreatment,
            Param::Gamma,
            (0.1, 2.0),
            &ContinuationSettings::default(),
        )
        .unwrap();
        assert!(
            res.branch
                .points
                .iter()
                .all(|pt| pt.state == State::new(100.0, 0.0, 0.0)
                    || (pt.state.u - 100.0).abs() < 1e-9)
        );
        let bp = res
            .bifurcations
            .iter()
            .find(|b| b.kind == BifurcationKind::BranchPoint)
            .unwrap();
        assert!((bp.value1 - 1.0).abs() < 1e-6);
        assert!(res
            .branch
            .points
            .iter()
            .all(|pt| pt.stable == (pt.param_value > 1.0)));
    }

    #[test]
    fn rejects_bad_ranges() {
        let s = ContinuationSettings::default();
        assert!(continue_equilibrium(
            &p(0.1, 0.01, 0.1),
            BranchKind::Coexistence,
            Param::Xi,
            (0.02, 0.05),
            &s
        )
        .is_err());
        assert!(continue_equilibrium(
            &p(0.1, 0.01, 0.1),
            BranchKind::Eradication,
            Param::Xi,
            (0.005, 0.05),
            &s
        )
        .is_err());
    }
}
