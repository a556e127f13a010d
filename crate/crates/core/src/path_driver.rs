//! One realization of the driving noise, usable at every dyadic resolution.
//!
//! A [`PathSkeleton`] holds the jumps with |y| > ε (exact, as a marked
//! Poisson process), a Gaussian surrogate for the compensated jumps below ε
//! on the base grid `{k / 2^J}`, and the compensator drift. Increments on a
//! coarser grid are block sums of base-grid increments, so every Euler path
//! computed from one skeleton sees the same noise.
//!
//! Jumps are generated shell by shell in radius (`|y| > 1`, then
//! `2^{-k-1} < |y| ≤ 2^{-k}`), each shell from its own random stream and
//! thinned at ε. Lowering ε therefore adds jumps without moving any of the
//! existing ones, and the surrogate is driven by one fixed standard Brownian
//! motion built by dyadic midpoint refinement, so a finer base grid refines
//! rather than replaces it.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::levy_measure::{
    big_jump_compensator, jump_intensity, mid_jump_compensator, radial_mass, radius_from_uniform,
    sample_direction, small_jump_moments, stable_scale_constant, AngularDensity, SmallJumpMoments,
    StableIndex,
};
use crate::rng::{stream_rng, Stream, MAX_SHELL};
use crate::MAX_DIM;

/// Smallest admissible base grid exponent.
pub const MIN_BASE_LOG2: u32 = 6;
/// Largest base grid exponent (2^24 cells per unit time).
pub const MAX_BASE_LOG2: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    /// Gaussian increments with the covariance of the jumps below ε.
    GaussianSurrogate,
    /// Compensated jumps below ε are omitted.
    Drop,
}

impl SmallJumpMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SmallJumpMode::GaussianSurrogate => "gaussian_surrogate",
            SmallJumpMode::Drop => "drop",
        }
    }
}

/// Driver configuration. The horizon is always [0, 1].
#[derive(Debug, Clone)]
pub struct DriverSpec {
    pub index: StableIndex,
    pub density: AngularDensity,
    pub epsilon_cut: f64,
    pub small_jump_mode: SmallJumpMode,
    pub base_log2: u32,
    /// Exact stable marginals on the base grid (d = 1, constant ρ, untruncated).
    pub exact_marginals: bool,
}

impl DriverSpec {
    pub fn new(
        index: StableIndex,
        density: AngularDensity,
        epsilon_cut: f64,
        small_jump_mode: SmallJumpMode,
        base_log2: u32,
    ) -> Result<Self> {
        let spec = Self {
            index,
            density,
            epsilon_cut,
            small_jump_mode,
            base_log2,
            exact_marginals: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_exact_marginals(mut self, exact: bool) -> Result<Self> {
        self.exact_marginals = exact;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.index.check_density(&self.density)?;
        let eps = self.epsilon_cut;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Configuration(format!("epsilon_cut = {eps} must lie in (0, 1]")));
        }
        if eps <= 2f64.powi(-(MAX_SHELL as i32)) {
            return Err(Error::Configuration(format!("epsilon_cut = {eps} is too small")));
        }
        if !(MIN_BASE_LOG2..=MAX_BASE_LOG2).contains(&self.base_log2) {
            return Err(Error::Configuration(format!(
                "base_log2 = {} must lie in {MIN_BASE_LOG2}..={MAX_BASE_LOG2}",
                self.base_log2
            )));
        }
        if self.exact_marginals
            && (self.dimension() != 1 || self.density.constant_level().is_none() || self.index.truncated())
        {
            return Err(Error::Configuration(
                "exact marginals need d = 1, constant rho and the untruncated driver".into(),
            ));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.density.dimension()
    }

    pub fn alpha(&self) -> f64 {
        self.index.alpha()
    }

    pub fn truncated(&self) -> bool {
        self.index.truncated()
    }

    /// Largest jump size: 1 for `L⁰`, unbounded for `L`.
    pub fn r_max(&self) -> f64 {
        if self.truncated() {
            1.0
        } else {
            f64::INFINITY
        }
    }

    pub fn base_cells(&self) -> usize {
        1 << self.base_log2
    }

    /// Rate of jumps with ε < |y| ≤ r_max.
    pub fn intensity(&self) -> Result<f64> {
        jump_intensity(&self.density, self.alpha(), self.epsilon_cut, self.r_max())
    }

    pub fn small_jump_moments(&self) -> Result<SmallJumpMoments> {
        small_jump_moments(&self.density, self.alpha(), self.epsilon_cut)
    }

    /// Drift removed per unit time to compensate the simulated jumps.
    pub fn compensator_drift(&self) -> Result<Vec<f64>> {
        let mut c = mid_jump_compensator(&self.density, self.alpha(), self.epsilon_cut);
        if !self.truncated() {
            let big = big_jump_compensator(&self.density, &self.index)?;
            for (a, b) in c.iter_mut().zip(big) {
                *a += b;
            }
        }
        Ok(c)
    }
}

/// One jump of the point measure: time in [0, horizon), mark `y` with
/// |y| > ε. Unused mark coordinates are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub mark: [f64; MAX_DIM],
}

impl Jump {
    pub fn size(&self) -> f64 {
        self.mark.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A single realization of the point measure and small-jump surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    pub master_seed: u64,
    pub path_index: u64,
    dimension: usize,
    base_log2: u32,
    horizon_log2: u32,
    epsilon: f64,
    mode: SmallJumpMode,
    truncated: bool,
    jumps: Vec<Jump>,
    base_small_increments: Vec<f64>,
    compensator_drift: Vec<f64>,
}

impl PathSkeleton {
    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Surrogate increments per base cell, `cells × d` row-major.
    pub fn base_small_increments(&self) -> &[f64] {
        &self.base_small_increments
    }

    pub fn compensator_drift(&self) -> &[f64] {
        &self.compensator_drift
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn base_log2(&self) -> u32 {
        self.base_log2
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> SmallJumpMode {
        self.mode
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Length of the simulated window `[0, 2^{-h})`.
    pub fn horizon(&self) -> f64 {
        2f64.powi(-(self.horizon_log2 as i32))
    }

    pub fn base_cells(&self) -> usize {
        1 << (self.base_log2 - self.horizon_log2)
    }

    /// Increments on the base grid: jumps bucketed by cell, plus surrogate,
    /// minus compensator drift.
    pub fn base_increments(&self) -> Increments {
        let d = self.dimension;
        let cells = self.base_cells();
        let dt = self.horizon() / cells as f64;
        let scale = (1u64 << self.base_log2) as f64;
        let mut data = self.base_small_increments.clone();
        for jump in &self.jumps {
            let k = (jump.time * scale) as usize;
            for i in 0..d {
                data[k * d + i] += jump.mark[i];
            }
        }
        if self.compensator_drift.iter().any(|c| *c != 0.0) {
            for cell in data.chunks_exact_mut(d) {
                for (v, c) in cell.iter_mut().zip(&self.compensator_drift) {
                    *v -= c * dt;
                }
            }
        }
        Increments {
            dim: d,
            cells,
            horizon: self.horizon(),
            data,
        }
    }

    /// Debug record `{seed, path_index, jumps: [[t, y…]…], mode, epsilon}`.
    pub fn to_json(&self) -> serde_json::Value {
        let jumps: Vec<Vec<f64>> = self
            .jumps
            .iter()
            .map(|j| {
                let mut row = vec![j.time];
                row.extend_from_slice(&j.mark[..self.dimension]);
                row
            })
            .collect();
        json!({
            "seed": self.master_seed,
            "path_index": self.path_index,
            "jumps": jumps,
            "mode": self.mode.as_str(),
            "epsilon": self.epsilon,
        })
    }
}

/// Driver increments on a uniform grid of `cells` cells over `[0, horizon)`,
/// `cells × d` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub dim: usize,
    pub cells: usize,
    pub horizon: f64,
    pub data: Vec<f64>,
}

impl Increments {
    pub fn step(&self) -> f64 {
        self.horizon / self.cells as f64
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Block sums onto `cells` cells (a power of two dividing the current count).
    pub fn aggregate(&self, cells: usize) -> Result<Increments> {
        if cells == 0 || !cells.is_power_of_two() || cells > self.cells {
            return Err(invalid(format!(
                "cannot aggregate {} cells onto {cells}",
                self.cells
            )));
        }
        let d = self.dim;
        let block = self.cells / cells;
        if block == 1 {
            return Ok(self.clone());
        }
        let mut data = vec![0.0; cells * d];
        let mut acc = vec![NeumaierSum::default(); d];
        for (k, out) in data.chunks_exact_mut(d).enumerate() {
            acc.iter_mut().for_each(|a| *a = NeumaierSum::default());
            for cell in self.data[k * block * d..(k + 1) * block * d].chunks_exact(d) {
                for (a, v) in acc.iter_mut().zip(cell) {
                    a.add(*v);
                }
            }
            for (o, a) in out.iter_mut().zip(&acc) {
                *o = a.value();
            }
        }
        Ok(Increments {
            dim: d,
            cells,
            horizon: self.horizon,
            data,
        })
    }

    /// Values `L_{k·step}` for `k = 0..=cells`, `(cells + 1) × d`.
    pub fn cumulative(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity((self.cells + 1) * d);
        out.extend(std::iter::repeat_n(0.0, d));
        let mut acc = vec![NeumaierSum::default(); d];
        for cell in self.data.chunks_exact(d) {
            for (a, v) in acc.iter_mut().zip(cell) {
                a.add(*v);
            }
            out.extend(acc.iter().map(NeumaierSum::value));
        }
        out
    }

    pub fn total(&self) -> Vec<f64> {
        let c = self.cumulative();
        c[self.cells * self.dim..].to_vec()
    }
}

/// Kahan–Babuška (Neumaier) compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Skeleton on the full horizon [0, 1).
pub fn build_skeleton(master_seed: u64, path_index: u64, spec: &DriverSpec) -> Result<PathSkeleton> {
    build_skeleton_window(master_seed, path_index, spec, 0)
}

/// Skeleton restricted to `[0, 2^{-horizon_log2})`, for statistics that only
/// look at short times.
pub fn build_skeleton_window(
    master_seed: u64,
    path_index: u64,
    spec: &DriverSpec,
    horizon_log2: u32,
) -> Result<PathSkeleton> {
    spec.validate()?;
    if horizon_log2 > spec.base_log2 {
        return Err(invalid(format!(
            "window 2^-{horizon_log2} is finer than the base grid 2^-{}",
            spec.base_log2
        )));
    }
    let d = spec.dimension();
    let horizon = 2f64.powi(-(horizon_log2 as i32));
    let grid_scale = (1u64 << spec.base_log2) as f64;
    let eps = spec.epsilon_cut;

    let mut jumps = Vec::new();
    if !spec.truncated() {
        let mut rng = stream_rng(master_seed, path_index, Stream::LargeJumps);
        push_shell(&mut jumps, &mut rng, spec, 1.0, f64::INFINITY, horizon, grid_scale)?;
    }
    // Shells (2^{-k-1}, 2^{-k}] meeting (ε, 1], thinned at ε.
    let mut k = 0u32;
    while 2f64.powi(-(k as i32)) > eps {
        let hi = 2f64.powi(-(k as i32));
        let mut rng = stream_rng(master_seed, path_index, Stream::Shell(k));
        push_shell(&mut jumps, &mut rng, spec, 0.5 * hi, hi, horizon, grid_scale)?;
        k += 1;
    }
    let before = jumps.len();
    jumps.retain(|j| j.size() > eps);
    debug_assert!(jumps.len() <= before);
    jumps.sort_unstable_by(|a, b| a.time.total_cmp(&b.time));

    let cells = 1usize << (spec.base_log2 - horizon_log2);
    let base_small_increments = match spec.small_jump_mode {
        SmallJumpMode::Drop => vec![0.0; cells * d],
        SmallJumpMode::GaussianSurrogate => {
            let chol = spec.small_jump_moments()?.cholesky();
            let mut rng = stream_rng(master_seed, path_index, Stream::SmallJumps);
            let w = brownian_increments(&mut rng, d, spec.base_log2 - horizon_log2, horizon);
            let mut out = vec![0.0; cells * d];
            for (o, dw) in out.chunks_exact_mut(d).zip(w.chunks_exact(d)) {
                for i in 0..d {
                    o[i] = (0..=i).map(|j| chol[i * d + j] * dw[j]).sum();
                }
            }
            out
        }
    };

    Ok(PathSkeleton {
        master_seed,
        path_index,
        dimension: d,
        base_log2: spec.base_log2,
        horizon_log2,
        epsilon: eps,
        mode: spec.small_jump_mode,
        truncated: spec.truncated(),
        jumps,
        base_small_increments,
        compensator_drift: spec.compensator_drift()?,
    })
}

fn push_shell<R: Rng>(
    out: &mut Vec<Jump>,
    rng: &mut R,
    spec: &DriverSpec,
    lo: f64,
    hi: f64,
    horizon: f64,
    grid_scale: f64,
) -> Result<()> {
    let alpha = spec.alpha();
    let rate = spec.density.mass() * radial_mass(alpha, lo, hi) * horizon;
    if rate <= 0.0 {
        return Ok(());
    }
    let count = Poisson::new(rate)
        .map_err(|e| invalid(format!("Poisson rate {rate}: {e}")))?
        .sample(rng) as u64;
    out.reserve(count as usize);
    for _ in 0..count {
        let mut time = horizon * rng.random::<f64>();
        // A jump exactly on a base grid point is re-drawn.
        while (time * grid_scale).fract() == 0.0 {
            time = horizon * rng.random::<f64>();
        }
        let theta = sample_direction(rng, &spec.density)?;
        let r = radius_from_uniform(rng.random::<f64>(), alpha, lo, hi);
        let mut mark = [0.0; MAX_DIM];
        for i in 0..spec.dimension() {
            mark[i] = r * theta[i];
        }
        out.push(Jump { time, mark });
    }
    Ok(())
}

/// Increments of a standard `dim`-dimensional Brownian motion on `2^levels`
/// cells over `[0, horizon)`, generated endpoint first and then by midpoint
/// refinement level by level. The first `2^j` cells' worth of draws do not
/// depend on `levels`, so finer grids refine coarser ones.
pub fn brownian_increments<R: Rng>(rng: &mut R, dim: usize, levels: u32, horizon: f64) -> Vec<f64> {
    let cells = 1usize << levels;
    let mut w = vec![0.0; (cells + 1) * dim];
    let sd = horizon.sqrt();
    for i in 0..dim {
        let z: f64 = StandardNormal.sample(rng);
        w[cells * dim + i] = sd * z;
    }
    for level in 1..=levels {
        let stride = cells >> level;
        let sd = (horizon / (1u64 << (level + 1)) as f64).sqrt();
        let mut k = stride;
        while k < cells {
            for i in 0..dim {
                let z: f64 = StandardNormal.sample(rng);
                let mid = 0.5 * (w[(k - stride) * dim + i] + w[(k + stride) * dim + i]);
                w[k * dim + i] = mid + sd * z;
            }
            k += 2 * stride;
        }
    }
    let mut inc = vec![0.0; cells * dim];
    for k in 0..cells {
        for i in 0..dim {
            inc[k * dim + i] = w[(k + 1) * dim + i] - w[k * dim + i];
        }
    }
    inc
}

fn check_resolution(spec: &DriverSpec, n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid(format!("resolution n = {n} is not a power of two")));
    }
    if n > spec.base_cells() {
        return Err(invalid(format!(
            "resolution n = {n} exceeds the base grid 2^{}",
            spec.base_log2
        )));
    }
    Ok(())
}

/// Increments of `L` (or `L⁰`) over the cells `[k/n, (k+1)/n)` covered by
/// the skeleton.
pub fn driver_increments(skeleton: &PathSkeleton, spec: &DriverSpec, n: usize) -> Result<Increments> {
    check_resolution(spec, n)?;
    let cells = (n as f64 * skeleton.horizon()) as usize;
    if cells == 0 {
        return Err(invalid(format!(
            "resolution n = {n} has no full cell inside the window {}",
            skeleton.horizon()
        )));
    }
    skeleton.base_increments().aggregate(cells)
}

/// Removes jumps with |y| > 1 and their compensator, turning a skeleton of
/// `L` into one of `L⁰` with `L = L⁰ + V - P` pathwise, where `V` sums the
/// removed jumps and `P_t = t · big_jump_compensator` (zero for α = 1).
pub fn truncate_driver(skeleton: &PathSkeleton, spec: &DriverSpec) -> Result<(PathSkeleton, DriverSpec)> {
    if spec.truncated() {
        return Err(invalid("driver is already truncated"));
    }
    if spec.exact_marginals {
        return Err(invalid("exact-marginal drivers carry no jump skeleton to truncate"));
    }
    let big = big_jump_compensator(&spec.density, &spec.index)?;
    let mut out = skeleton.clone();
    out.jumps.retain(|j| j.size() <= 1.0);
    for (c, b) in out.compensator_drift.iter_mut().zip(&big) {
        *c -= b;
    }
    out.truncated = true;
    let mut spec2 = spec.clone();
    spec2.index = spec.index.with_truncated(true);
    Ok((out, spec2))
}

/// Symmetric α-stable variate with characteristic function `exp(-|u|^α)`
/// (Chambers–Mallows–Stuck transform of a uniform angle and an exponential).
pub fn standard_symmetric_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let v = std::f64::consts::PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

fn exact_base_increments(
    master_seed: u64,
    path_index: u64,
    spec: &DriverSpec,
    horizon_log2: u32,
) -> Result<Increments> {
    if !spec.exact_marginals {
        return Err(invalid("spec does not request exact marginals"));
    }
    spec.validate()?;
    let alpha = spec.alpha();
    let level = spec.density.constant_level().expect("validated constant density");
    let cells = 1usize << (spec.base_log2 - horizon_log2);
    let dt = 2f64.powi(-(spec.base_log2 as i32));
    let scale = (level * stable_scale_constant(alpha)? * dt).powf(1.0 / alpha);
    let mut rng = stream_rng(master_seed, path_index, Stream::Marginals);
    let data = (0..cells)
        .map(|_| scale * standard_symmetric_stable(&mut rng, alpha))
        .collect();
    Ok(Increments {
        dim: 1,
        cells,
        horizon: 2f64.powi(-(horizon_log2 as i32)),
        data,
    })
}

/// Exact i.i.d. symmetric stable increments for the d = 1 untruncated driver
/// with constant ρ, sampled on the base grid and aggregated to `n` cells.
pub fn exact_stable_increments(
    master_seed: u64,
    path_index: u64,
    spec: &DriverSpec,
    n: usize,
) -> Result<Increments> {
    check_resolution(spec, n)?;
    exact_base_increments(master_seed, path_index, spec, 0)?.aggregate(n)
}

/// Base-grid increments of the driver over `[0, 2^{-horizon_log2})`, from the
/// exact marginal sampler when exact marginals are enabled, else from a skeleton.
pub fn realize_base_increments(
    master_seed: u64,
    path_index: u64,
    spec: &DriverSpec,
    horizon_log2: u32,
) -> Result<Increments> {
    if spec.exact_marginals {
        exact_base_increments(master_seed, path_index, spec, horizon_log2)
    } else {
        Ok(build_skeleton_window(master_seed, path_index, spec, horizon_log2)?.base_increments())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, truncated: bool, eps: f64, mode: SmallJumpMode) -> DriverSpec {
        DriverSpec::new(
            StableIndex::new(alpha, truncated).unwrap(),
            AngularDensity::isotropic(1).unwrap(),
            eps,
            mode,
            10,
        )
        .unwrap()
    }

    #[test]
    fn spec_validation() {
        let idx = StableIndex::new(1.5, false).unwrap();
        let iso = AngularDensity::isotropic(1).unwrap();
        let gs = SmallJumpMode::GaussianSurrogate;
        assert!(DriverSpec::new(idx, iso.clone(), 1.5, gs, 10).is_err());
        assert!(DriverSpec::new(idx, iso.clone(), 0.1, gs, 5).is_err());
        assert!(DriverSpec::new(idx, iso.clone(), 0.1, gs, 10).unwrap().with_exact_marginals(true).is_ok());
        let two = AngularDensity::two_sided(2.0, 1.0).unwrap();
        assert!(DriverSpec::new(idx, two.clone(), 0.1, gs, 10).unwrap().with_exact_marginals(true).is_err());
        let one = StableIndex::new(1.0, false).unwrap();
        assert!(DriverSpec::new(one, two, 0.1, gs, 10).is_err());
    }

    #[test]
    fn skeleton_is_deterministic_and_ordered() {
        let s = spec(1.5, false, 0.01, SmallJumpMode::GaussianSurrogate);
        let a = build_skeleton(42, 7, &s).unwrap();
        let b = build_skeleton(42, 7, &s).unwrap();
        assert_eq!(a, b);
        let c = build_skeleton(42, 8, &s).unwrap();
        assert_ne!(a, c);
        assert!(a.jumps().windows(2).all(|w| w[0].time < w[1].time));
        assert!(a.jumps().iter().all(|j| j.size() > 0.01 && j.time < 1.0));
        let grid = 1024.0;
        assert!(a.jumps().iter().all(|j| (j.time * grid).fract() != 0.0));
    }

    #[test]
    fn empty_region_and_drop_mode() {
        let s = spec(1.5, true, 1.0, SmallJumpMode::Drop);
        let sk = build_skeleton(1, 0, &s).unwrap();
        assert!(sk.jumps().is_empty());
        let inc = driver_increments(&sk, &s, 64).unwrap();
        assert!(inc.data.iter().all(|v| *v == 0.0));
        // symmetric density: no compensator, no jumps → L⁰ ≡ 0
        assert_eq!(sk.compensator_drift(), &[0.0]);
    }

    #[test]
    fn asymmetric_truncated_empty_region_is_pure_drift() {
        let s = DriverSpec::new(
            StableIndex::new(1.5, true).unwrap(),
            AngularDensity::two_sided(2.0, 1.0).unwrap(),
            1.0,
            SmallJumpMode::Drop,
            8,
        )
        .unwrap();
        let sk = build_skeleton(1, 0, &s).unwrap();
        assert!(sk.jumps().is_empty());
        // ∫_{1<|y|≤1} is empty, so even the asymmetric compensator vanishes.
        assert_eq!(sk.compensator_drift(), &[0.0]);
    }

    #[test]
    fn drop_mode_without_jumps_has_zero_increments() {
        let s = spec(1.5, true, 1.0, SmallJumpMode::Drop);
        for path in 0..5 {
            let sk = build_skeleton(9, path, &s).unwrap();
            assert!(driver_increments(&sk, &s, 1024).unwrap().data.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn jump_count_matches_intensity() {
        let s = spec(1.5, false, 0.1, SmallJumpMode::Drop);
        let lambda = s.intensity().unwrap();
        assert!((lambda - 42.1637).abs() < 1e-3);
        let m = 10_000;
        let mean = (0..m)
            .map(|i| build_skeleton(3, i, &s).unwrap().jumps().len() as f64)
            .sum::<f64>()
            / m as f64;
        assert!((mean - lambda).abs() < 3.0 * (lambda / m as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn aggregation_identities() {
        let s = spec(1.5, false, 0.01, SmallJumpMode::GaussianSurrogate);
        let sk = build_skeleton(5, 1, &s).unwrap();
        let base = driver_increments(&sk, &s, 1024).unwrap();
        let total = base.total()[0];
        for j in 0..=10 {
            let inc = driver_increments(&sk, &s, 1 << j).unwrap();
            assert!((inc.total()[0] - total).abs() <= 1e-13 * total.abs().max(1.0));
        }
        let half = driver_increments(&sk, &s, 2).unwrap();
        let quarter = driver_increments(&sk, &s, 4).unwrap();
        let sum = quarter.data[0] + quarter.data[1];
        assert!((half.data[0] - sum).abs() <= 1e-13 * sum.abs().max(1.0));
        assert!(driver_increments(&sk, &s, 3).is_err());
        assert!(driver_increments(&sk, &s, 2048).is_err());
    }

    #[test]
    fn truncation_decomposition() {
        let two = AngularDensity::two_sided(2.0, 1.0).unwrap();
        let s = DriverSpec::new(
            StableIndex::new(1.5, false).unwrap(),
            two,
            0.01,
            SmallJumpMode::GaussianSurrogate,
            10,
        )
        .unwrap();
        let big = big_jump_compensator(&s.density, &s.index).unwrap()[0];
        assert!((big - 2.0).abs() < 1e-12);
        for path in 0..20 {
            let sk = build_skeleton(13, path, &s).unwrap();
            let (sk0, s0) = truncate_driver(&sk, &s).unwrap();
            assert!(s0.truncated());
            let full = sk.base_increments();
            let trunc = sk0.base_increments();
            let dt = full.step();
            let mut v = vec![0.0; full.cells];
            for j in sk.jumps().iter().filter(|j| j.size() > 1.0) {
                v[(j.time * 1024.0) as usize] += j.mark[0];
            }
            for k in 0..full.cells {
                let resid = full.data[k] - trunc.data[k] - v[k] + big * dt;
                assert!(resid.abs() <= 1e-12, "cell {k}: {resid}");
            }
            // The directly built truncated skeleton shares every jump ≤ 1.
            let direct = build_skeleton(13, path, &s0).unwrap();
            assert_eq!(direct.jumps(), sk0.jumps());
            assert_eq!(direct.base_small_increments(), sk0.base_small_increments());
        }
    }

    #[test]
    fn truncation_without_big_jumps_is_identity() {
        let s = spec(1.5, false, 0.05, SmallJumpMode::Drop);
        let mut checked = 0;
        for path in 0..200 {
            let sk = build_skeleton(21, path, &s).unwrap();
            if sk.jumps().iter().any(|j| j.size() > 1.0) {
                continue;
            }
            let (sk0, _) = truncate_driver(&sk, &s).unwrap();
            assert_eq!(sk.base_increments(), sk0.base_increments());
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn alpha_one_truncation_removes_no_drift() {
        let s = spec(1.0, false, 0.01, SmallJumpMode::Drop);
        let sk = build_skeleton(2, 2, &s).unwrap();
        let (sk0, _) = truncate_driver(&sk, &s).unwrap();
        assert_eq!(sk0.compensator_drift(), sk.compensator_drift());
        assert!(truncate_driver(&sk0, &spec(1.0, true, 0.01, SmallJumpMode::Drop)).is_err());
    }

    #[test]
    fn lowering_epsilon_keeps_existing_jumps() {
        let coarse = spec(1.5, false, 0.02, SmallJumpMode::GaussianSurrogate);
        let fine = spec(1.5, false, 0.01, SmallJumpMode::GaussianSurrogate);
        let a = build_skeleton(4, 3, &coarse).unwrap();
        let b = build_skeleton(4, 3, &fine).unwrap();
        let kept: Vec<Jump> = b.jumps().iter().copied().filter(|j| j.size() > 0.02).collect();
        assert_eq!(kept, a.jumps());
        assert!(b.jumps().len() > a.jumps().len());
    }

    #[test]
    fn brownian_refinement_is_nested() {
        let mut r1 = stream_rng(1, 1, Stream::SmallJumps);
        let mut r2 = stream_rng(1, 1, Stream::SmallJumps);
        let coarse = brownian_increments(&mut r1, 2, 4, 1.0);
        let fine = brownian_increments(&mut r2, 2, 6, 1.0);
        for k in 0..16 {
            for i in 0..2 {
                let s: f64 = (0..4).map(|m| fine[(4 * k + m) * 2 + i]).sum();
                assert!((s - coarse[k * 2 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brownian_increment_variance() {
        let n = 4000;
        let mut sum_sq = 0.0;
        for p in 0..n {
            let mut r = stream_rng(8, p, Stream::SmallJumps);
            let w = brownian_increments(&mut r, 1, 6, 0.5);
            sum_sq += w[17] * w[17];
        }
        let var = sum_sq / n as f64;
        let expect = 0.5 / 64.0;
        assert!((var / expect - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn window_skeleton_covers_prefix() {
        let s = spec(1.5, true, 0.01, SmallJumpMode::GaussianSurrogate);
        let w = build_skeleton_window(3, 0, &s, 4).unwrap();
        assert_eq!(w.base_cells(), 64);
        assert!(w.jumps().iter().all(|j| j.time < 1.0 / 16.0));
        let inc = driver_increments(&w, &s, 256).unwrap();
        assert_eq!(inc.cells, 16);
        assert!(driver_increments(&w, &s, 8).is_err());
    }

    #[test]
    fn exact_marginals_match_characteristic_function() {
        let s = DriverSpec::new(
            StableIndex::new(1.5, false).unwrap(),
            AngularDensity::isotropic(1).unwrap(),
            0.01,
            SmallJumpMode::Drop,
            6,
        )
        .unwrap()
        .with_exact_marginals(true)
        .unwrap();
        let c_alpha = stable_scale_constant(1.5).unwrap();
        let n = 16;
        let mut xs = Vec::new();
        for p in 0..(100_000 / n as u64) {
            xs.extend(exact_stable_increments(17, p, &s, n).unwrap().data);
        }
        let m = xs.len() as f64;
        for u in [0.0, 0.5, 1.0, 2.0] {
            let re: Vec<f64> = xs.iter().map(|x| (u * x).cos()).collect();
            let im: Vec<f64> = xs.iter().map(|x| (u * x).sin()).collect();
            let mre = re.iter().sum::<f64>() / m;
            let mim = im.iter().sum::<f64>() / m;
            let sre = (re.iter().map(|v| (v - mre).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
            let sim = (im.iter().map(|v| (v - mim).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
            let expect = (-c_alpha * u.powf(1.5) / n as f64).exp();
            if u == 0.0 {
                assert_eq!(mre, 1.0);
                assert_eq!(mim, 0.0);
            } else {
                assert!((mre - expect).abs() < 4.0 * sre, "u = {u}: {mre} vs {expect}");
                assert!(mim.abs() < 4.0 * sim, "u = {u}: imaginary part {mim}");
            }
        }
    }

    #[test]
    fn skeleton_json_record() {
        let s = spec(1.5, false, 0.2, SmallJumpMode::Drop);
        let sk = build_skeleton(99, 4, &s).unwrap();
        let v = sk.to_json();
        assert_eq!(v["seed"], 99);
        assert_eq!(v["mode"], "drop");
        assert_eq!(v["jumps"].as_array().unwrap().len(), sk.jumps().len());
    }
}
