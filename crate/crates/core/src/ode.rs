//! Dormand–Prince 5(4) adaptive integrator for three-dimensional systems.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Initial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 1.0,
            initial_step: None,
            max_steps: 50_000_000,
        }
    }
}

/// One accepted step, with enough data for cubic Hermite dense output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec3,
    pub y1: Vec3,
    pub f0: Vec3,
    pub f1: Vec3,
}

impl Step {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Hermite interpolant of component `k` at `theta` in [0, 1].
    pub fn interpolate(&self, k: usize, theta: f64) -> f64 {
        let h = self.h();
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y0[k] + h * h10 * self.f0[k] + h01 * self.y1[k] + h * h11 * self.f1[k]
    }

    /// Derivative of the Hermite interpolant of component `k` with respect to time.
    pub fn interpolate_derivative(&self, k: usize, theta: f64) -> f64 {
        let h = self.h();
        let t2 = theta * theta;
        let d00 = 6.0 * t2 - 6.0 * theta;
        let d10 = 3.0 * t2 - 4.0 * theta + 1.0;
        let d01 = -6.0 * t2 + 6.0 * theta;
        let d11 = 3.0 * t2 - 2.0 * theta;
        (d00 * self.y0[k] + d01 * self.y1[k]) / h + d10 * self.f0[k] + d11 * self.f1[k]
    }

    /// Interior zero of the interpolated derivative of component `k`, if the
    /// endpoint derivatives change sign.
    pub fn derivative_root(&self, k: usize) -> Option<f64> {
        let (a, b) = (self.f0[k], self.f1[k]);
        if a == 0.0 || b == 0.0 || a.signum() == b.signum() {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let g_lo = self.interpolate_derivative(k, lo);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let g = self.interpolate_derivative(k, mid);
            if g.signum() == g_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveEnd {
    pub t: f64,
    pub y: Vec3,
    pub f: Vec3,
    pub accepted: usize,
    pub rejected: usize,
    /// The observer requested an early stop.
    pub stopped: bool,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn all_finite(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn rms_scaled(v: &Vec3, y0: &Vec3, y1: &Vec3, opts: &SolverOptions) -> f64 {
    let mut acc = 0.0;
    for k in 0..3 {
        let sc = opts.abs_tol + opts.rel_tol * y0[k].abs().max(y1[k].abs());
        acc += (v[k] / sc).powi(2);
    }
    (acc / 3.0).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &Vec3, f0: &Vec3, opts: &SolverOptions) -> f64
where
    F: FnMut(f64, &Vec3) -> Result<Vec3>,
{
    let d0 = rms_scaled(y0, y0, y0, opts);
    let d1 = rms_scaled(f0, y0, y0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(opts.max_step);
    let y1 = [y0[0] + h0 * f0[0], y0[1] + h0 * f0[1], y0[2] + h0 * f0[2]];
    let d2 = match f(t0 + h0, &y1) {
        Ok(f1) if all_finite(&f1) => {
            let diff = [f1[0] - f0[0], f1[1] - f0[1], f1[2] - f0[2]];
            rms_scaled(&diff, y0, y0, opts) / h0
        }
        _ => return h0 * 1e-3,
    };
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.max_step)
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end`, calling `observer` after
/// every accepted step.
pub fn solve<F, O>(
    mut f: F,
    t0: f64,
    y0: Vec3,
    t_end: f64,
    opts: &SolverOptions,
    mut observer: O,
) -> Result<SolveEnd>
where
    F: FnMut(f64, &Vec3) -> Result<Vec3>,
    O: FnMut(&Step) -> Control,
{
    let f0 = f(t0, &y0)?;
    if !all_finite(&f0) || !all_finite(&y0) {
        return Err(Error::NonFinite { t: t0 });
    }
    let mut end = SolveEnd {
        t: t0,
        y: y0,
        f: f0,
        accepted: 0,
        rejected: 0,
        stopped: false,
    };
    if t_end <= t0 {
        return Ok(end);
    }
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(&mut f, t0, &y0, &f0, opts))
        .min(opts.max_step)
        .min(t_end - t0);
    let mut last_rejected = false;

    while end.t < t_end {
        if end.accepted + end.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t: end.t, h });
        }
        let t = end.t;
        let remaining = t_end - t;
        if h >= remaining || remaining - h < 1e-12 * remaining.max(1.0) {
            h = remaining;
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }

        let y = end.y;
        let mut k = [[0.0; 3]; 7];
        k[0] = end.f;
        let mut ok = true;
        let mut y_new = y;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..3 {
                        ys[c] += h * a * kj[c];
                    }
                }
            }
            if s == 6 {
                y_new = ys;
            }
            match f(t + C[s] * h, &ys) {
                Ok(v) if all_finite(&v) && all_finite(&ys) => k[s] = v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }

        let err = if ok {
            let mut ev = [0.0; 3];
            for (s, ks) in k.iter().enumerate() {
                for c in 0..3 {
                    ev[c] += h * E[s] * ks[c];
                }
            }
            rms_scaled(&ev, &y, &y_new, opts)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let t_new = if h == remaining { t_end } else { t + h };
            let step = Step {
                t0: t,
                t1: t_new,
                y0: y,
                y1: y_new,
                f0: end.f,
                f1: k[6],
            };
            end.t = t_new;
            end.y = y_new;
            end.f = k[6];
            end.accepted += 1;
            let mut fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(opts.max_step);
            if let Control::Stop = observer(&step) {
                end.stopped = true;
                return Ok(end);
            }
        } else {
            end.rejected += 1;
            last_rejected = true;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= fac;
        }
    }
    Ok(end)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let opts = SolverOptions::default();
        let end = solve(
            |_, y| Ok([-y[0], -2.0 * y[1], 0.5 * y[2]]),
            0.0,
            [1.0, 1.0, 1.0],
            3.0,
            &opts,
            |_| Control::Continue,
        )
        .unwrap();
        assert_eq!(end.t, 3.0);
        assert!((end.y[0] - (-3f64).exp()).abs() < 1e-9);
        assert!((end.y[1] - (-6f64).exp()).abs() < 1e-9);
        assert!((end.y[2] - 1.5f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_dense_output_finds_extremum() {
        let opts = SolverOptions {
            max_step: 0.5,
            ..Default::default()
        };
        let mut peaks = Vec::new();
        solve(
            |_, y| Ok([y[1], -y[0], 0.0]),
            0.0,
            [0.0, 1.0, 0.0],
            10.0,
            &opts,
            |s| {
                if s.f0[0] > 0.0 && s.f1[0] < 0.0 {
                    let th = s.derivative_root(0).unwrap();
                    peaks.push((s.t0 + th * s.h(), s.interpolate(0, th)));
                }
                Control::Continue
            },
        )
        .unwrap();
        assert_eq!(peaks.len(), 2);
        let pi = std::f64::consts::PI;
        assert!((peaks[0].0 - pi / 2.0).abs() < 1e-4);
        assert!((peaks[1].0 - 5.0 * pi / 2.0).abs() < 1e-4);
        assert!((peaks[0].1 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn observer_can_stop() {
        let end = solve(
            |_, _| Ok([1.0, 0.0, 0.0]),
            0.0,
            [0.0; 3],
            100.0,
            &SolverOptions::default(),
            |s| {
                if s.y1[0] > 5.0 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        assert!(end.stopped);
        assert!(end.t > 5.0 && end.t < 100.0);
    }

    #[test]
    fn finite_time_blowup_underflows() {
        let r = solve(
            |_, y| Ok([y[0] * y[0], 0.0, 0.0]),
            0.0,
            [1.0, 0.0, 0.0],
            2.0,
            &SolverOptions::default(),
            |_| Control::Continue,
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
