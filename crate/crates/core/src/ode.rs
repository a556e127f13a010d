//! Adaptive Dormand–Prince 5(4) integrator for autonomous ODEs `x' = f(x)`.

use crate::error::{Error, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights are the last row of A; these are 5th minus 4th order.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MIN_STEP: f64 = 1e-14;

/// Integrator state carried across calls so that the step size adapts once
/// and is reused over many short segments.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    tol: f64,
    step: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    next: Vec<f64>,
}

impl DormandPrince {
    /// `tol` bounds the local error per step (mixed absolute/relative).
    pub fn new(dim: usize, tol: f64) -> Self {
        Self {
            tol,
            step: 1e-3,
            k: vec![vec![0.0; dim]; 7],
            tmp: vec![0.0; dim],
            next: vec![0.0; dim],
        }
    }

    /// Advances `x` from `t0` to `t1` in place.
    pub fn integrate<F>(&mut self, f: &F, x: &mut [f64], t0: f64, t1: f64) -> Result<()>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let d = x.len();
        let mut t = t0;
        while t < t1 {
            let remaining = t1 - t;
            let h = self.step.min(remaining);
            if h < MIN_STEP && h < remaining {
                return Err(Error::StepUnderflow { time: t });
            }
            f(x, &mut self.k[0]);
            for s in 1..7 {
                for i in 0..d {
                    let mut acc = x[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += h * a * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                f(&self.tmp, &mut self.k[s]);
            }
            let mut err: f64 = 0.0;
            for i in 0..d {
                self.next[i] = self.tmp[i];
                let e: f64 = (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>() * h;
                let scale = self.tol * (1.0 + x[i].abs().max(self.next[i].abs()));
                err = err.max(e.abs() / scale);
            }
            if err <= 1.0 {
                t += h;
                x.copy_from_slice(&self.next);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // Shortened final steps say nothing about the natural step.
                if h == self.step || grow < 1.0 {
                    self.step = h * grow;
                }
            } else {
                self.step = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if self.step < MIN_STEP {
                    return Err(Error::StepUnderflow { time: t });
                }
            }
        }
        Ok(())
    }
}
