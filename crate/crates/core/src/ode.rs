//! Embedded Dormand-Prince 5(4) integrator with adaptive step control.
//!
//! Operates on plain `&[f64]` state vectors; callers map their complex
//! coordinates in and out. The driver integrates exactly to the requested
//! end time and lets an accept hook observe (and rewrite) the state after
//! every accepted step, which the dynamics layer uses for chart flips.

use crate::error::Error;
use crate::Result;

// Butcher tableau, classic DP5(4) coefficients.
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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// error = y5 - y4
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: u64 = 50_000_000;

/// Step counters for one integration.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct OdeStats {
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub rhs_evaluations: u64,
}

/// Adaptive integrator state that persists across segments, so the step
/// size carries over when integrating to a sequence of sample times.
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub stats: OdeStats,
    h: Option<f64>,
    k: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    fsal: Option<Vec<f64>>,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            stats: OdeStats::default(),
            h: None,
            k: Vec::new(),
            scratch: Vec::new(),
            fsal: None,
        }
    }

    /// Forget the cached derivative; call after the state is rewritten
    /// externally (e.g. a chart flip).
    pub fn invalidate(&mut self) {
        self.fsal = None;
    }

    fn ensure_capacity(&mut self, dim: usize) {
        if self.k.len() != 7 || self.k[0].len() != dim {
            self.k = vec![vec![0.0; dim]; 7];
            self.scratch = vec![0.0; dim];
        }
    }

    fn initial_step<F>(&mut self, rhs: &mut F, t0: f64, t_end: f64, y: &[f64]) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dim = y.len();
        let span = t_end - t0;
        let mut f0 = vec![0.0; dim];
        rhs(t0, y, &mut f0);
        self.stats.rhs_evaluations += 1;

        let scale = |v: &[f64], y: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..dim {
                let s = self.atol + self.rtol * y[i].abs();
                acc += (v[i] / s).powi(2);
            }
            (acc / dim as f64).sqrt()
        };
        let d0 = scale(y, y);
        let d1 = scale(&f0, y);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span.abs());

        // one Euler probe to estimate the second derivative scale
        let mut y1 = vec![0.0; dim];
        for i in 0..dim {
            y1[i] = y[i] + h0 * f0[i];
        }
        let mut f1 = vec![0.0; dim];
        rhs(t0 + h0, &y1, &mut f1);
        self.stats.rhs_evaluations += 1;
        let mut d2 = 0.0;
        for i in 0..dim {
            let s = self.atol + self.rtol * y[i].abs();
            d2 += ((f1[i] - f0[i]) / s).powi(2);
        }
        let d2 = (d2 / dim as f64).sqrt() / h0;

        let h1 = if d1.max(d2) < 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span.abs())
    }

    /// Integrate from `t0` to `t_end`, invoking `on_accept(t, y)` after each
    /// accepted step. The hook may rewrite `y`, returning `true` to signal
    /// the rewrite.
    pub fn drive<F, G>(
        &mut self,
        mut rhs: F,
        t0: f64,
        t_end: f64,
        y: &mut [f64],
        mut on_accept: G,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        G: FnMut(f64, &mut [f64]) -> Result<bool>,
    {
        if t_end == t0 {
            return Ok(());
        }
        if t_end < t0 {
            return Err(Error::InvalidConfig("time must advance forward".into()));
        }
        let dim = y.len();
        self.ensure_capacity(dim);

        let mut t = t0;
        let mut h = match self.h {
            Some(h) if h > 0.0 => h,
            _ => self.initial_step(&mut rhs, t0, t_end, y),
        };

        while t < t_end {
            if self.stats.accepted_steps + self.stats.rejected_steps > MAX_STEPS {
                return Err(Error::StepSizeUnderflow { t });
            }
            let h_left = t_end - t;
            let mut h_try = h.min(h_left);
            if h_try < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }

            // stage 1 (FSAL reuse when available)
            match &self.fsal {
                Some(f) => self.k[0].copy_from_slice(f),
                None => {
                    let (k0, rest) = self.k.split_first_mut().expect("7 stages");
                    let _ = rest;
                    rhs(t, y, k0);
                    self.stats.rhs_evaluations += 1;
                }
            }

            macro_rules! stage {
                ($idx:expr, $c:expr, $($coef:expr => $kj:expr),+) => {{
                    for i in 0..dim {
                        let mut acc = 0.0;
                        $(acc += $coef * self.k[$kj][i];)+
                        self.scratch[i] = y[i] + h_try * acc;
                    }
                    let (head, tail) = self.k.split_at_mut($idx);
                    let _ = head;
                    rhs(t + $c * h_try, &self.scratch, &mut tail[0]);
                    self.stats.rhs_evaluations += 1;
                }};
            }

            stage!(1, C2, A21 => 0);
            stage!(2, C3, A31 => 0, A32 => 1);
            stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
            stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
            stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);

            // 5th order solution into scratch
            for i in 0..dim {
                let acc = B1 * self.k[0][i]
                    + B3 * self.k[2][i]
                    + B4 * self.k[3][i]
                    + B5 * self.k[4][i]
                    + B6 * self.k[5][i];
                self.scratch[i] = y[i] + h_try * acc;
            }
            {
                let (head, tail) = self.k.split_at_mut(6);
                let _ = head;
                rhs(t + h_try, &self.scratch, &mut tail[0]);
                self.stats.rhs_evaluations += 1;
            }

            // scaled RMS error estimate
            let mut err_acc = 0.0;
            for i in 0..dim {
                let e = E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i];
                let sc = self.atol + self.rtol * y[i].abs().max(self.scratch[i].abs());
                err_acc += (h_try * e / sc).powi(2);
            }
            let err = (err_acc / dim as f64).sqrt();

            if !err.is_finite() {
                // halve and retry; repeated failures hit the underflow guard
                self.stats.rejected_steps += 1;
                self.fsal = None;
                h = h_try * MIN_FACTOR;
                continue;
            }

            if err <= 1.0 {
                t += h_try;
                y.copy_from_slice(&self.scratch);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t });
                }
                self.stats.accepted_steps += 1;
                self.fsal = Some(self.k[6].clone());

                let rewritten = on_accept(t, y)?;
                if rewritten {
                    self.fsal = None;
                }

                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                h = h_try * factor;
            } else {
                self.stats.rejected_steps += 1;
                self.fsal = None;
                let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                h_try *= factor;
                if h_try < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t });
                }
                h = h_try;
            }
        }
        self.h = Some(h);
        Ok(())
    }
}
