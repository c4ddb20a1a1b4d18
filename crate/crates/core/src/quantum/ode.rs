//! Dormand–Prince 5(4) integrator with embedded error control.

use super::{CVector, C64};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Bound on the local error estimate per accepted step.
    pub tol: f64,
    /// Largest step as a fraction of the integration window.
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_step_fraction: 0.02,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

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

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// 5th-order weights minus the embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lincomb(y: &CVector, h: f64, terms: &[(f64, &CVector)]) -> CVector {
    let mut out = y.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            out.axpy(C64::from(h * c), k, C64::from(1.0));
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (requires `t1 > t0`).
pub(crate) fn integrate<F>(
    mut f: F,
    y0: &CVector,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(CVector, IntegrationStats)>
where
    F: FnMut(f64, &CVector) -> CVector,
{
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "integration window must satisfy t1 > t0 (got {t0} → {t1})"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let span = t1 - t0;
    let h_max = span * opts.max_step_fraction;
    let mut stats = IntegrationStats::default();

    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    stats.rhs_evals += 1;

    let mut h = (span * 1e-3).min(h_max);
    let h_min = 1e-13 * t0.abs().max(t1.abs()).max(1.0);

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::TooManySteps {
                max_steps: opts.max_steps,
                t,
                t_end: t1,
            });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        let k2 = f(t + C2 * h, &lincomb(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &lincomb(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &lincomb(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &lincomb(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &lincomb(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = lincomb(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let t_new = if last { t1 } else { t + h };
        let k7 = f(t_new, &y_new);
        stats.rhs_evals += 6;

        let mut err = 0.0f64;
        for i in 0..y.len() {
            let e =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = opts.tol * (1.0 + y[i].norm().max(y_new[i].norm()));
            let r = e.norm() / scale;
            err = if r.is_finite() {
                err.max(r)
            } else {
                f64::INFINITY
            };
        }

        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).min(h_max);
        } else {
            stats.rejected += 1;
            h *= if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            if h < h_min {
                return Err(Error::StepUnderflow { t });
            }
        }
    }
    Ok((y, stats))
}
