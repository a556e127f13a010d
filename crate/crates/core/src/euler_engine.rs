//! The Euler scheme on dyadic grids, and an event-driven oracle for drivers
//! with finitely many jumps.
//!
//! On the cell `[k/n, (k+1)/n)` the scheme freezes `b` and `G` at the left
//! endpoint, so one step is
//! `X_{(k+1)/n} = X_{k/n} + b(X_{k/n})/n + G(X_{k/n}) ΔL_k` with no further
//! discretization inside the cell.

use std::io::Write;

use serde::Serialize;

use crate::coefficients::SdeCoefficients;
use crate::error::{invalid, Error, Result};
use crate::ode::DormandPrince;
use crate::path_driver::{driver_increments, DriverSpec, Increments, PathSkeleton, SmallJumpMode};
use crate::MAX_DIM;

/// Which driver produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriverKind {
    /// The fully compensated driver `L`.
    #[serde(rename = "L")]
    Full,
    /// The truncated driver `L⁰` (jumps of size ≤ 1 only).
    #[serde(rename = "L0")]
    Truncated,
}

impl DriverKind {
    pub fn of(spec: &DriverSpec) -> Self {
        if spec.truncated() {
            DriverKind::Truncated
        } else {
            DriverKind::Full
        }
    }
}

/// States on the grid `{k/n}` covering `[0, horizon]`, `(cells + 1) × d`
/// row-major. `resolution` is `n`, the number of cells per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPath {
    pub resolution: usize,
    pub dim: usize,
    pub horizon: f64,
    pub states: Vec<f64>,
    pub driver_kind: DriverKind,
}

impl EulerPath {
    pub fn cells(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.cells())
    }

    /// Writes `t,x1,…,xd` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim).map(|i| format!("x{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        let dt = 1.0 / self.resolution as f64;
        for k in 0..=self.cells() {
            let row: Vec<String> = self.state(k).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", k as f64 * dt, row.join(","))?;
        }
        Ok(())
    }
}

/// `max_k |X_{k/n} - Y_{k/n}|` over the grid of the coarser path. The finer
/// path's resolution must be a multiple of the coarser one's.
pub fn sup_distance(coarse: &EulerPath, fine: &EulerPath) -> Result<f64> {
    if coarse.dim != fine.dim || fine.resolution % coarse.resolution != 0 {
        return Err(invalid(format!(
            "paths at n = {} and n = {} are not nested",
            coarse.resolution, fine.resolution
        )));
    }
    let stride = fine.resolution / coarse.resolution;
    let mut sup: f64 = 0.0;
    for k in 0..=coarse.cells() {
        let dist = coarse
            .state(k)
            .iter()
            .zip(fine.state(k * stride))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(dist);
    }
    Ok(sup)
}

/// Runs the scheme on given increments. `path_index` only labels errors.
pub fn euler_from_increments(
    coeffs: &SdeCoefficients,
    increments: &Increments,
    driver_kind: DriverKind,
    path_index: u64,
) -> Result<EulerPath> {
    let d = coeffs.dim();
    if increments.dim != d {
        return Err(invalid(format!(
            "coefficients have dimension {d}, driver has dimension {}",
            increments.dim
        )));
    }
    let cells = increments.cells;
    let dt = increments.step();
    let resolution = (1.0 / dt).round() as usize;
    let mut states = Vec::with_capacity((cells + 1) * d);
    states.extend_from_slice(coeffs.x0());

    let mut x = [0.0; MAX_DIM];
    x[..d].copy_from_slice(coeffs.x0());
    let mut carry = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM * MAX_DIM];
    for k in 0..cells {
        coeffs.drift_into(&x[..d], &mut b[..d]);
        coeffs.diffusion_into(&x[..d], &mut g[..d * d]);
        let dl = increments.cell(k);
        for i in 0..d {
            let mut step = b[i] * dt;
            for j in 0..d {
                step += g[i * d + j] * dl[j];
            }
            // Kahan update of x[i] by step.
            let y = step - carry[i];
            let t = x[i] + y;
            carry[i] = (t - x[i]) - y;
            x[i] = t;
        }
        if x[..d].iter().any(|v| !v.is_finite()) {
            return Err(Error::PathAborted {
                path_index,
                resolution,
                step: k,
            });
        }
        states.extend_from_slice(&x[..d]);
    }
    Ok(EulerPath {
        resolution,
        dim: d,
        horizon: increments.horizon,
        states,
        driver_kind,
    })
}

/// Euler path at resolution `n` on the skeleton's noise.
pub fn euler_path(
    coeffs: &SdeCoefficients,
    skeleton: &PathSkeleton,
    spec: &DriverSpec,
    n: usize,
) -> Result<EulerPath> {
    let inc = driver_increments(skeleton, spec, n)?;
    euler_from_increments(coeffs, &inc, DriverKind::of(spec), skeleton.path_index)
}

/// Euler path on the base grid, used as the reference solution.
pub fn reference_path(coeffs: &SdeCoefficients, skeleton: &PathSkeleton, spec: &DriverSpec) -> Result<EulerPath> {
    euler_from_increments(
        coeffs,
        &skeleton.base_increments(),
        DriverKind::of(spec),
        skeleton.path_index,
    )
}

/// Solution for a drop-mode skeleton: the ODE `x' = b(x) - G(x) c` between
/// jumps (`c` the compensator drift), `x ← x + G(x⁻) y` at a jump of size
/// `y`. Sampled on the base grid.
pub fn exact_finite_activity_path(
    coeffs: &SdeCoefficients,
    skeleton: &PathSkeleton,
    spec: &DriverSpec,
    ode_tol: f64,
) -> Result<EulerPath> {
    if skeleton.mode() != SmallJumpMode::Drop {
        return Err(invalid(
            "the finite-activity oracle needs a drop-mode skeleton (no small-jump surrogate)",
        ));
    }
    if !(ode_tol > 0.0) {
        return Err(invalid(format!("ODE tolerance {ode_tol} must be positive")));
    }
    let d = coeffs.dim();
    if skeleton.dimension() != d {
        return Err(invalid("coefficient and driver dimensions differ"));
    }
    let comp: Vec<f64> = skeleton.compensator_drift().to_vec();
    let field = |x: &[f64], out: &mut [f64]| {
        let mut g = [0.0; MAX_DIM * MAX_DIM];
        coeffs.drift_into(x, out);
        coeffs.diffusion_into(x, &mut g[..d * d]);
        for i in 0..d {
            for j in 0..d {
                out[i] -= g[i * d + j] * comp[j];
            }
        }
    };

    let cells = skeleton.base_cells();
    let dt = skeleton.horizon() / cells as f64;
    let mut solver = DormandPrince::new(d, ode_tol);
    let mut x = coeffs.x0().to_vec();
    let mut states = Vec::with_capacity((cells + 1) * d);
    states.extend_from_slice(&x);
    let mut jumps = skeleton.jumps().iter().peekable();
    let mut g = [0.0; MAX_DIM * MAX_DIM];
    for k in 0..cells {
        let end = (k + 1) as f64 * dt;
        let mut t = k as f64 * dt;
        while let Some(jump) = jumps.next_if(|j| j.time < end) {
            solver.integrate(&field, &mut x, t, jump.time)?;
            coeffs.diffusion_into(&x, &mut g[..d * d]);
            let before = x.clone();
            for i in 0..d {
                x[i] = before[i] + (0..d).map(|j| g[i * d + j] * jump.mark[j]).sum::<f64>();
            }
            t = jump.time;
        }
        solver.integrate(&field, &mut x, t, end)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::PathAborted {
                path_index: skeleton.path_index,
                resolution: cells,
                step: k,
            });
        }
        states.extend_from_slice(&x);
    }
    Ok(EulerPath {
        resolution: 1usize << skeleton.base_log2(),
        dim: d,
        horizon: skeleton.horizon(),
        states,
        driver_kind: DriverKind::of(spec),
    })
}
