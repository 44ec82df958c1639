//! Adaptive Dormand–Prince 5(4) integrator for small real systems.

use crate::error::Result;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Result of advancing toward a target time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Advance {
    Reached,
    /// The accepted step of size `h` from the returned state would satisfy the stop predicate.
    Stopped { h: f64 },
    /// The step size fell below `h_min`.
    StepCollapse,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri5 { rtol, atol, h_min: 1e-14, max_steps: 10_000_000 }
    }

    /// One step of size `h`; returns the fifth-order solution and the scaled error norm.
    pub fn single_step<F>(&self, f: &mut F, t: f64, y: &[f64], h: f64) -> Result<(Vec<f64>, f64)>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let d = y.len();
        let mut k = vec![vec![0.0; d]; 7];
        let mut tmp = vec![0.0; d];
        for s in 0..7 {
            for i in 0..d {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s])?;
        }
        let mut y5 = vec![0.0; d];
        let mut err_sq = 0.0;
        for i in 0..d {
            let mut acc = y[i];
            let mut e = 0.0;
            for s in 0..7 {
                acc += h * B5[s] * k[s][i];
                e += h * ERR[s] * k[s][i];
            }
            y5[i] = acc;
            let scale = self.atol + self.rtol * y[i].abs().max(acc.abs());
            err_sq += (e / scale).powi(2);
        }
        Ok((y5, (err_sq / d as f64).sqrt()))
    }

    /// Advances `(t, y)` to `t_target`, adapting `h` in place.
    ///
    /// `stop` is evaluated on every accepted candidate state; when it returns
    /// true the state is left at the start of that step.
    pub fn advance<F, S>(
        &self,
        f: &mut F,
        t: &mut f64,
        y: &mut Vec<f64>,
        t_target: f64,
        h: &mut f64,
        stop: &mut S,
    ) -> Result<Advance>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
        S: FnMut(f64, &[f64]) -> bool,
    {
        let mut steps = 0usize;
        while *t < t_target {
            if steps >= self.max_steps || *h < self.h_min {
                return Ok(Advance::StepCollapse);
            }
            steps += 1;
            let remaining = t_target - *t;
            let last = *h >= remaining;
            let step = if last { remaining } else { *h };
            let (cand, err) = self.single_step(f, *t, y, step)?;
            let finite = err.is_finite() && cand.iter().all(|x| x.is_finite());
            if finite && err <= 1.0 {
                let t_new = if last { t_target } else { *t + step };
                if stop(t_new, &cand) {
                    return Ok(Advance::Stopped { h: step });
                }
                *t = t_new;
                *y = cand;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    *h = step * grow;
                }
            } else {
                let shrink = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
                *h = step * shrink;
            }
        }
        Ok(Advance::Reached)
    }
}
