//! Adaptive Dormand-Prince 5(4) integrator for complex vector fields.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-12,
            rtol: 1e-12,
            max_steps: 50_000_000,
            h_max: f64::INFINITY,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Integrator state. `rhs(t, y, dy)` writes the derivative into `dy`.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    opts: OdeOptions,
    t: f64,
    y: Vec<Complex64>,
    t_prev: f64,
    y_prev: Vec<Complex64>,
    h: f64,
    k: [Vec<Complex64>; 7],
    fsal_valid: bool,
    scratch: Vec<Complex64>,
    y_new: Vec<Complex64>,
    steps: usize,
    rejected: usize,
}

impl Dopri5 {
    pub fn new(t0: f64, y0: Vec<Complex64>, opts: OdeOptions) -> Result<Self> {
        if !(opts.atol > 0.0) || !(opts.rtol >= 0.0) {
            return Err(Error::param("tolerance", "atol must be positive and rtol nonnegative"));
        }
        let n = y0.len();
        let z = || vec![Complex64::new(0.0, 0.0); n];
        Ok(Dopri5 {
            opts,
            t: t0,
            y_prev: y0.clone(),
            y: y0,
            t_prev: t0,
            h: 0.0,
            k: [z(), z(), z(), z(), z(), z(), z()],
            fsal_valid: false,
            scratch: z(),
            y_new: z(),
            steps: 0,
            rejected: 0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[Complex64] {
        &self.y
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn y_prev(&self) -> &[Complex64] {
        &self.y_prev
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Replaces the state, e.g. after a quantum jump. The step size is kept.
    pub fn set_state(&mut self, t: f64, y: &[Complex64]) {
        self.t = t;
        self.y.copy_from_slice(y);
        self.t_prev = t;
        self.y_prev.copy_from_slice(y);
        self.fsal_valid = false;
    }

    /// Forgets the cached first stage after the caller changed the vector field.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    fn initial_step<F>(&mut self, rhs: &mut F, direction: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let sc = |y: &Complex64| self.opts.atol + self.opts.rtol * y.norm();
        let d0 = self.y.iter().map(|v| v.norm() / sc(v)).fold(0.0, f64::max);
        let d1 = self.k[0]
            .iter()
            .zip(&self.y)
            .map(|(f, v)| f.norm() / sc(v))
            .fold(0.0, f64::max);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for (s, (y, f)) in self.scratch.iter_mut().zip(self.y.iter().zip(&self.k[0])) {
            *s = y + f * (h0 * direction);
        }
        rhs(self.t + h0 * direction, &self.scratch, &mut self.k[1]);
        let d2 = self.k[1]
            .iter()
            .zip(&self.k[0])
            .zip(&self.y)
            .map(|((a, b), v)| (a - b).norm() / sc(v))
            .fold(0.0, f64::max)
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// One DP step of size `h` from `(t0, y0)` without error control.
    fn stages<F>(&mut self, rhs: &mut F, t0: f64, h: f64)
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, a) in rows.iter().enumerate() {
            let stage = s + 1;
            for idx in 0..self.y_prev.len() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, coef) in a.iter().enumerate() {
                    acc += self.k[m][idx] * *coef;
                }
                self.scratch[idx] = self.y_prev[idx] + acc * h;
            }
            let (head, tail) = self.k.split_at_mut(stage);
            let _ = head;
            rhs(t0 + C[stage] * h, &self.scratch, &mut tail[0]);
        }
        for idx in 0..self.y_prev.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, coef) in B.iter().enumerate() {
                acc += self.k[m][idx] * *coef;
            }
            self.y_new[idx] = self.y_prev[idx] + acc * h;
        }
    }

    /// Advances by one accepted step without passing `t_max`.
    pub fn step<F>(&mut self, rhs: &mut F, t_max: f64) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        if t_max <= self.t {
            return Err(Error::Integrator {
                time: self.t,
                reason: format!("target {t_max} is not ahead of the current time"),
            });
        }
        if !self.fsal_valid {
            rhs(self.t, &self.y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(rhs, 1.0);
        }
        self.y_prev.copy_from_slice(&self.y);
        loop {
            if self.steps + self.rejected >= self.opts.max_steps {
                return Err(Error::Integrator {
                    time: self.t,
                    reason: format!("step budget of {} exhausted", self.opts.max_steps),
                });
            }
            let remaining = t_max - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h.min(self.opts.h_max) };
            if h <= f64::EPSILON * self.t.abs().max(1.0) * 4.0 && !last {
                return Err(Error::Integrator {
                    time: self.t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let t0 = self.t;
            self.stages(rhs, t0, h);
            let (head, tail) = self.k.split_at_mut(6);
            let _ = head;
            rhs(t0 + h, &self.y_new, &mut tail[0]);
            let mut err = 0.0f64;
            for idx in 0..self.y.len() {
                let mut e = Complex64::new(0.0, 0.0);
                for (m, coef) in E.iter().enumerate() {
                    if *coef != 0.0 {
                        e += self.k[m][idx] * *coef;
                    }
                }
                let sc = self.opts.atol + self.opts.rtol * self.y_prev[idx].norm().max(self.y_new[idx].norm());
                err = err.max((e * h).norm() / sc);
            }
            if !err.is_finite() {
                self.rejected += 1;
                self.h = h * FAC_MIN;
                continue;
            }
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if err <= 1.0 {
                self.steps += 1;
                self.t_prev = t0;
                self.t = if last { t_max } else { t0 + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                if !last || fac < 1.0 {
                    self.h = h * fac;
                }
                return Ok(());
            }
            self.rejected += 1;
            self.h = h * fac.min(1.0);
        }
    }

    /// Integrates up to exactly `t_end`.
    pub fn advance_to<F>(&mut self, rhs: &mut F, t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        while self.t < t_end {
            self.step(rhs, t_end)?;
        }
        Ok(())
    }

    /// State at `t_prev + theta (t - t_prev)` from a fresh single step out of
    /// the previous accepted point. Used to locate events inside a step.
    pub fn probe<F>(&mut self, rhs: &mut F, theta: f64, out: &mut [Complex64])
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let h = theta * (self.t - self.t_prev);
        if h == 0.0 {
            out.copy_from_slice(&self.y_prev);
            return;
        }
        let saved0 = self.k[0].clone();
        rhs(self.t_prev, &self.y_prev, &mut self.k[0]);
        let t0 = self.t_prev;
        self.stages(rhs, t0, h);
        out.copy_from_slice(&self.y_new);
        self.k[0] = saved0;
    }
}
