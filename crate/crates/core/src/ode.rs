//! Adaptive Dormand–Prince 5(4) integration with step-size control.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the right-hand side.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
/// Fifth-order weights (equal to the last row of `A`, so FSAL applies).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Fourth-order embedded weights.
const BHAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// `accept(t, y)` is called after every accepted step, including the final
/// one; returning an error aborts the integration.
pub fn dopri5<const N: usize>(
    rhs: impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: &Tolerances,
    mut accept: impl FnMut(f64, &[f64; N]) -> Result<()>,
) -> Result<[f64; N]> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    let norm = |v: &[f64; N], scale: &[f64; N]| -> f64 {
        (v.iter()
            .zip(scale)
            .map(|(a, s)| (a / s).powi(2))
            .sum::<f64>()
            / N as f64)
            .sqrt()
    };
    let mut h = match tol.h0 {
        Some(h0) => h0.abs().min(span.abs()),
        None => {
            let scale: [f64; N] = std::array::from_fn(|i| tol.atol + tol.rtol * y[i].abs());
            let d0 = norm(&y, &scale);
            let d1 = norm(&k1, &scale);
            let guess = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            };
            guess.min(span.abs())
        }
    };
    let mut steps = 0usize;
    let mut err_prev: f64 = 1e-4;
    loop {
        if steps >= tol.max_steps {
            return Err(Error::StepFailure { r: t, h });
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        let step = if last { remaining } else { h } * dir;

        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += step * a * kj[i];
                    }
                }
            }
            k[s] = rhs(t + C[s] * step, &ys)?;
        }
        let mut y_new = y;
        let mut err = [0.0; N];
        for i in 0..N {
            let mut high = 0.0;
            let mut diff = 0.0;
            for s in 0..7 {
                high += B[s] * k[s][i];
                diff += (B[s] - BHAT[s]) * k[s][i];
            }
            y_new[i] += step * high;
            err[i] = step * diff;
        }
        let scale: [f64; N] =
            std::array::from_fn(|i| tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs()));
        let e = norm(&err, &scale);
        if !e.is_finite() {
            h *= 0.25;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepFailure { r: t, h });
            }
            continue;
        }
        if e <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            k1 = k[6];
            accept(t, &y)?;
            if last {
                return Ok(y);
            }
            // PI step-size controller.
            let factor = 0.9 * e.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h = step.abs() * factor.clamp(0.2, 5.0);
            err_prev = e.max(1e-4);
        } else {
            h = step.abs() * (0.9 * e.powf(-0.2)).max(0.1);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepFailure { r: t, h });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let tol = Tolerances::default();
        let mut count = 0;
        let y = dopri5(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            20.0,
            &tol,
            |_, _| {
                count += 1;
                Ok(())
            },
        )
        .unwrap();
        assert!((y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((y[1] + 20f64.sin()).abs() < 1e-8);
        assert!(count > 10);
    }

    #[test]
    fn integrates_backwards() {
        let y = dopri5(
            |_, y: &[f64; 1]| Ok([y[0]]),
            1.0,
            [1.0],
            0.0,
            &Tolerances::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - (-1f64).exp()).abs() < 1e-9);
    }
}
