//! First Lyapunov coefficient at a Hopf point.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::Result;
use crate::linalg;
use crate::model::{self, ModelParams, State, Tensor3, Tensor4};

type CVec = Vector3<Complex64>;
type CMat = Matrix3<Complex64>;

fn cross(a: &CVec, b: &CVec) -> CVec {
    Vector3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

/// Null vector of a rank-2 complex 3x3 matrix.
fn null_vector(m: &CMat) -> CVec {
    let rows: Vec<CVec> = (0..3).map(|r| m.row(r).transpose()).collect();
    let candidates = [
        cross(&rows[0], &rows[1]),
        cross(&rows[0], &rows[2]),
        cross(&rows[1], &rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("three candidates");
    best / Complex64::new(best.norm(), 0.0)
}

fn dot(p: &CVec, q: &CVec) -> Complex64 {
    p.iter().zip(q.iter()).map(|(a, b)| a.conj() * b).sum()
}

fn bilinear(b: &Tensor3, x: &CVec, y: &CVec) -> CVec {
    let mut out = CVec::zeros();
    for c in 0..3 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                acc += b[c][i][j] * x[i] * y[j];
            }
        }
        out[c] = acc;
    }
    out
}

fn trilinear(t: &Tensor4, x: &CVec, y: &CVec, z: &CVec) -> CVec {
    let mut out = CVec::zeros();
    for c in 0..3 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    acc += t[c][i][j][k] * x[i] * y[j] * z[k];
                }
            }
        }
        out[c] = acc;
    }
    out
}

/// First Lyapunov coefficient of `x' = A x + B(x, x)/2 + C(x, x, x)/6 + ...`
/// at a Hopf point, together with the Hopf frequency.
///
/// Returns `None` when `A` has no complex-conjugate eigenvalue pair.
pub fn lyapunov_coefficient(a: &Matrix3<f64>, b: &Tensor3, c: &Tensor4) -> Option<(f64, f64)> {
    let eigs = linalg::eigenvalues(a);
    let omega = eigs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if omega <= 1e-14 * a.norm().max(1.0) {
        return None;
    }
    let i_omega = Complex64::new(0.0, omega);
    let ac: CMat = a.map(|x| Complex64::new(x, 0.0));
    let id = CMat::identity();

    let q = null_vector(&(ac - id * i_omega));
    let p_raw = null_vector(&(ac.transpose() + id * i_omega));
    let s = dot(&p_raw, &q);
    if s.norm() == 0.0 {
        return None;
    }
    let p = p_raw / s.conj();
    let qb = q.map(|z| z.conj());

    let a_inv = ac.try_inverse()?;
    let shifted_inv = (id * (i_omega * 2.0) - ac).try_inverse()?;

    let term1 = dot(&p, &trilinear(c, &q, &q, &qb));
    let term2 = dot(&p, &bilinear(b, &q, &(a_inv * bilinear(b, &q, &qb))));
    let term3 = dot(&p, &bilinear(b, &qb, &(shifted_inv * bilinear(b, &q, &q))));
    let l1 = (term1 - term2 * 2.0 + term3).re / (2.0 * omega);
    l1.is_finite().then_some((l1, omega))
}

/// First Lyapunov coefficient of the model at an equilibrium `s`.
///
/// Negative values indicate a supercritical Hopf bifurcation, positive values
/// a subcritical one. The sign does not depend on the population scale.
pub fn first_lyapunov_coefficient(p: &ModelParams, s: &State) -> Result<Option<f64>> {
    let j = model::jacobian(p, s)?;
    let b = model::second_derivatives(p, s)?;
    let c = model::third_derivatives(p, s)?;
    Ok(lyapunov_coefficient(&j, &b, &c).map(|(l1, _)| l1))
}
