//! Dormand–Prince 5(4) with step ceiling, landing exactly on output times.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// b − b̂
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Abort when the step falls below this (absolute, seconds).
    pub h_min: f64,
}

impl Dopri5 {
    pub fn new(tol: f64, h_max: f64) -> Self {
        Dopri5 { rtol: tol, atol: tol, h_max, h_min: h_max * 1e-10 }
    }

    /// Integrate from `t0` through every time in `outputs` (ascending, ≥ t0),
    /// calling `emit` at each. The state is never renormalized.
    pub fn integrate<F, G>(
        &self,
        mut f: F,
        t0: f64,
        y: &mut [C64],
        outputs: &[f64],
        mut emit: G,
    ) -> Result<IntegratorStats>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        G: FnMut(f64, &[C64]) -> Result<()>,
    {
        let n = y.len();
        let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        let mut ynew = vec![C64::new(0.0, 0.0); n];
        let mut stats = IntegratorStats::default();
        let mut t = t0;
        f(t, y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = self.h_max.min(initial_step(y, &k[0], self.rtol)).max(self.h_min * 10.0);
        for &target in outputs {
            if target < t - 1e-15 * t.abs().max(1.0) {
                return Err(Error::Mismatch(format!("output time {target} precedes {t}")));
            }
            while t < target {
                let remaining = target - t;
                let last = h >= remaining * (1.0 - 1e-12);
                let hs = if last { remaining } else { h };
                for s in 1..7 {
                    for i in 0..n {
                        let mut acc = y[i];
                        for (j, kj) in k.iter().enumerate().take(s) {
                            let a = A[s][j];
                            if a != 0.0 {
                                acc += kj[i] * (hs * a);
                            }
                        }
                        tmp[i] = acc;
                    }
                    f(t + C[s] * hs, &tmp, &mut k[s]);
                    if s == 6 {
                        ynew.copy_from_slice(&tmp);
                    }
                }
                stats.evaluations += 6;
                let mut err = 0.0;
                for i in 0..n {
                    let mut e = C64::new(0.0, 0.0);
                    for (j, kj) in k.iter().enumerate() {
                        if E[j] != 0.0 {
                            e += kj[i] * E[j];
                        }
                    }
                    let sc = self.atol + self.rtol * y[i].norm().max(ynew[i].norm());
                    err += (e * hs).norm_sqr() / (sc * sc);
                }
                let err = (err / n as f64).sqrt();
                if !err.is_finite() {
                    return Err(Error::StepUnderflow { t, h: hs, reason: "non-finite error estimate".into() });
                }
                if err <= 1.0 {
                    t = if last { target } else { t + hs };
                    y.copy_from_slice(&ynew);
                    k.swap(0, 6);
                    stats.steps += 1;
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !last || fac < 1.0 {
                        h = (hs * fac).min(self.h_max);
                    }
                } else {
                    stats.rejected += 1;
                    h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                    if h < self.h_min {
                        return Err(Error::StepUnderflow {
                            t,
                            h,
                            reason: format!(
                                "error estimate {err:.3e} does not shrink; parameters too stiff for tol {:.1e}",
                                self.rtol
                            ),
                        });
                    }
                }
            }
            emit(t, y)?;
        }
        Ok(stats)
    }
}

fn initial_step(y: &[C64], dy: &[C64], tol: f64) -> f64 {
    let ny = y.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let nd = dy.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if nd == 0.0 {
        f64::INFINITY
    } else {
        0.1 * tol.powf(0.2) * ny.max(1e-300) / nd
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_rotation() {
        // y' = −iωy
        let w = 3.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        let outs: Vec<f64> = (1..=10).map(|i| i as f64 * 0.37).collect();
        let mut got = Vec::new();
        Dopri5::new(1e-11, 0.05)
            .integrate(
                |_, y, d| d[0] = C64::new(0.0, -w) * y[0],
                0.0,
                &mut y,
                &outs,
                |t, y| {
                    got.push((t, y[0]));
                    Ok(())
                },
            )
            .unwrap();
        for (t, v) in got {
            assert!((v - C64::from_polar(1.0, -w * t)).norm() < 1e-9);
        }
    }
}
