//! Dormand–Prince 5(4) pair with PI step-size control for complex state
//! vectors, plus a fixed-step variant used for convergence checks.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MAX_GROWTH: f64 = 10.0;
const MAX_SHRINK: f64 = 0.2;

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-13;
pub const REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    /// Steps below this raise a stiffness error.
    pub min_step: f64,
    pub rejection_cap: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub max_error_estimate: f64,
    /// Step size carried across consecutive integrations.
    pub last_step: Option<f64>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct Stages {
    k: [Vec<Complex64>; 7],
    tmp: Vec<Complex64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]),
            tmp: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Fills k[1..7] given k[0] = f(t, y); leaves the fifth-order solution in `y5`
    /// and k[6] = f(t + h, y5).
    fn step<F>(&mut self, f: &mut F, t: f64, h: f64, y: &[Complex64], y5: &mut [Complex64])
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        let rows: [(f64, &[f64]); 6] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
            (1.0, &[A71, 0.0, A73, A74, A75, A76]),
        ];
        for (s, (cs, coefs)) in rows.iter().enumerate() {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in coefs.iter().enumerate() {
                    if *a != 0.0 {
                        acc += self.k[j][i] * (h * a);
                    }
                }
                self.tmp[i] = acc;
            }
            if s == 5 {
                y5.copy_from_slice(&self.tmp);
            }
            f(t + cs * h, &self.tmp, &mut self.k[s + 1]);
        }
    }

    fn error(&self, h: f64) -> Vec<Complex64> {
        let n = self.tmp.len();
        (0..n)
            .map(|i| {
                (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h
            })
            .collect()
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0` in place.
///
/// Accumulates into `stats`, so several consecutive calls share one
/// rejection budget.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [Complex64],
    opts: &Options,
    stats: &mut Stats,
) -> Result<()>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    let n = y.len();
    let mut st = Stages::new(n);
    let mut y5 = vec![Complex64::new(0.0, 0.0); n];
    let mut t = t0;
    let mut h = stats.last_step.unwrap_or(opts.initial_step).min(span);
    let mut err_old = 1e-4_f64;
    f(t, y, &mut st.k[0]);

    while t1 - t > 1e-15 * span.max(1.0) {
        let last = h >= t1 - t;
        if last {
            h = t1 - t;
        } else if h < opts.min_step {
            return Err(Error::Stiffness {
                position: t,
                length: t1,
                step: h,
                steps: stats.steps,
                rejected: stats.rejected,
            });
        }
        st.step(&mut f, t, h, y, &mut y5);
        let e = st.error(h);
        let e_norm = norm(&e);
        let scale = opts.abs_tol + opts.rel_tol * norm(y).max(norm(&y5));
        let err = e_norm / scale;

        if err.is_finite() && err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y5);
            st.k.swap(0, 6);
            stats.steps += 1;
            stats.max_error_estimate = stats.max_error_estimate.max(e_norm);
            let fac = (err.powf(EXPO) / err_old.powf(BETA) / SAFETY)
                .clamp(1.0 / MAX_GROWTH, 1.0 / MAX_SHRINK);
            err_old = err.max(1e-4);
            let next = h / fac;
            if !last {
                stats.last_step = Some(next);
            }
            h = next;
        } else {
            stats.rejected += 1;
            if stats.rejected > opts.rejection_cap {
                return Err(Error::RejectionCap {
                    cap: opts.rejection_cap,
                });
            }
            let shrink = if err.is_finite() {
                (err.powf(EXPO) / SAFETY).min(1.0 / MAX_SHRINK)
            } else {
                1.0 / MAX_SHRINK
            };
            h /= shrink;
            if h < opts.min_step {
                return Err(Error::Stiffness {
                    position: t,
                    length: t1,
                    step: h,
                    steps: stats.steps,
                    rejected: stats.rejected,
                });
            }
        }
    }
    Ok(())
}

/// `n_steps` equal Dormand–Prince steps, keeping the fifth-order solution.
pub fn integrate_fixed<F>(mut f: F, t0: f64, t1: f64, y: &mut [Complex64], n_steps: usize)
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    if n_steps == 0 || t1 <= t0 {
        return;
    }
    let n = y.len();
    let mut st = Stages::new(n);
    let mut y5 = vec![Complex64::new(0.0, 0.0); n];
    let h = (t1 - t0) / n_steps as f64;
    for k in 0..n_steps {
        let t = t0 + h * k as f64;
        f(t, y, &mut st.k[0]);
        st.step(&mut f, t, h, y, &mut y5);
        y.copy_from_slice(&y5);
    }
}
