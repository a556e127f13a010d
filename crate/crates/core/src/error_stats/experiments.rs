//! Monte Carlo experiments over coupled paths.
//!
//! Each experiment maps path indices to per-path samples with an
//! [`Executor`], then reduces them in index order. A path whose Euler
//! recursion overflows is excluded from every ladder point and counted.

use serde::{Deserialize, Serialize};

use crate::coefficients::SdeCoefficients;
use crate::error::{invalid, Error, Result};
use crate::error_stats::estimators::{mean_and_se, median_of_means, spearman, DEFAULT_BATCHES};
use crate::error_stats::fit::{fit_rate, Check, RateFit};
use crate::euler_engine::{
    euler_from_increments, exact_finite_activity_path, sup_distance, DriverKind, EulerPath,
};
use crate::exec::Executor;
use crate::path_driver::{build_skeleton, realize_base_increments, DriverSpec, Increments};
use crate::rng::{stream_rng, Stream};
use crate::MAX_DIM;

/// Largest tolerated fraction of aborted paths.
pub const MAX_ABORT_FRACTION: f64 = 1e-4;

/// Default local error tolerance of the finite-activity oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Monte Carlo size, seeding and work distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub paths: usize,
    pub master_seed: u64,
    pub batches: usize,
    pub executor: Executor,
}

impl RunParams {
    pub fn new(paths: usize, master_seed: u64) -> Self {
        Self {
            paths,
            master_seed,
            batches: DEFAULT_BATCHES,
            executor: Executor::default(),
        }
    }

    pub fn with_executor(mut self, executor: Executor) -> Self {
        self.executor = executor;
        self
    }

    fn check(&self) -> Result<()> {
        if self.batches == 0 || self.paths < self.batches {
            return Err(invalid(format!(
                "{} paths cannot fill {} median-of-means batches",
                self.paths, self.batches
            )));
        }
        Ok(())
    }
}

/// What the Euler paths are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// The Euler path on the base grid.
    FineEuler,
    /// The event-driven solution of a drop-mode (finite-activity) driver.
    FiniteActivityOracle,
}

impl Reference {
    pub fn as_str(self) -> &'static str {
        match self {
            Reference::FineEuler => "fine-euler",
            Reference::FiniteActivityOracle => "finite-activity-oracle",
        }
    }
}

/// The ladder variable of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    /// Grid resolution `n`.
    N,
    /// Time `t`.
    T,
}

/// Median-of-means estimates of a p-th moment along a ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub variable: Variable,
    pub reference: Option<Reference>,
    pub p: f64,
    pub ladder: Vec<f64>,
    pub estimates: Vec<f64>,
    /// Robust standard deviation of the batch means, per ladder point.
    pub spreads: Vec<f64>,
    pub paths: usize,
    pub aborted: usize,
}

impl ErrorReport {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.ladder.iter().copied().zip(self.estimates.iter().copied()).collect()
    }

    pub fn abort_fraction(&self) -> f64 {
        self.aborted as f64 / self.paths as f64
    }

    /// `false` when more than [`MAX_ABORT_FRACTION`] of the paths aborted.
    pub fn valid(&self) -> bool {
        self.abort_fraction() <= MAX_ABORT_FRACTION
    }

    pub fn fit(&self, predicted: f64, check: Check, tolerance: f64) -> Result<RateFit> {
        fit_rate(&self.points(), predicted, check, tolerance)
    }
}

fn check_ladder(spec: &DriverSpec, ladder: &[usize], headroom: u32) -> Result<()> {
    if ladder.is_empty() {
        return Err(invalid("empty n ladder"));
    }
    let max = 1usize << (spec.base_log2 - headroom.min(spec.base_log2));
    for &n in ladder {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid(format!("ladder value n = {n} is not a power of two")));
        }
        if n > max {
            return Err(invalid(format!(
                "ladder value n = {n} exceeds 2^{} (base grid 2^{} minus {headroom} levels of headroom)",
                max.trailing_zeros(),
                spec.base_log2
            )));
        }
    }
    Ok(())
}

fn check_moment_order(spec: &DriverSpec, p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid(format!("moment order p = {p} must be positive")));
    }
    if !spec.truncated() && p >= spec.alpha() {
        return Err(invalid(format!(
            "p = {p} ≥ α = {}: only moments p < α exist for the untruncated driver",
            spec.alpha()
        )));
    }
    Ok(())
}

/// Per-path outcome: samples, or `None` if the path aborted.
type PathSamples = Result<Option<Vec<f64>>>;

fn collect(outcomes: Vec<PathSamples>) -> Result<(Vec<Vec<f64>>, Vec<u64>, usize)> {
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut indices = Vec::with_capacity(outcomes.len());
    let mut aborted = 0;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o? {
            Some(row) => {
                rows.push(row);
                indices.push(i as u64);
            }
            None => aborted += 1,
        }
    }
    Ok((rows, indices, aborted))
}

fn aborted_to_none<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::PathAborted { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn mom_column(rows: &[Vec<f64>], indices: &[u64], col: usize, batches: usize, map: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let samples: Vec<f64> = rows.iter().map(|r| map(r[col])).collect();
    let est = median_of_means(&samples, indices, batches)?;
    Ok((est.value, est.spread))
}

/// Sup-errors of every ladder resolution against each reference, for one
/// path: `references.len() × ladder.len()` values, reference-major.
fn path_sup_errors(
    coeffs: &SdeCoefficients,
    spec: &DriverSpec,
    ladder: &[usize],
    references: &[Reference],
    master_seed: u64,
    path_index: u64,
) -> Result<Vec<f64>> {
    let kind = DriverKind::of(spec);
    let (base, skeleton) = if references.contains(&Reference::FiniteActivityOracle) {
        let sk = build_skeleton(master_seed, path_index, spec)?;
        (sk.base_increments(), Some(sk))
    } else {
        (realize_base_increments(master_seed, path_index, spec, 0)?, None)
    };
    let coarse: Vec<EulerPath> = ladder
        .iter()
        .map(|&n| euler_from_increments(coeffs, &base.aggregate(n)?, kind, path_index))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(references.len() * ladder.len());
    for r in references {
        let reference = match r {
            Reference::FineEuler => euler_from_increments(coeffs, &base, kind, path_index)?,
            Reference::FiniteActivityOracle => exact_finite_activity_path(
                coeffs,
                skeleton.as_ref().expect("skeleton built for the oracle"),
                spec,
                ORACLE_TOLERANCE,
            )?,
        };
        for path in &coarse {
            out.push(sup_distance(path, &reference)?);
        }
    }
    Ok(out)
}

/// `E[sup_k |X^n_{k/n} - X^ref_{k/n}|^p]` along `ladder` against the fine
/// Euler reference.
pub fn strong_error(
    coeffs: &SdeCoefficients,
    spec: &DriverSpec,
    ladder: &[usize],
    p: f64,
    params: &RunParams,
) -> Result<ErrorReport> {
    let mut reports = strong_errors(coeffs, spec, ladder, &[p], &[Reference::FineEuler], params)?;
    Ok(reports.remove(0))
}

/// Strong errors for several moment orders and references from one set of
/// paths. Reports are ordered by reference, then by `p`.
pub fn strong_errors(
    coeffs: &SdeCoefficients,
    spec: &DriverSpec,
    ladder: &[usize],
    ps: &[f64],
    references: &[Reference],
    params: &RunParams,
) -> Result<Vec<ErrorReport>> {
    params.check()?;
    check_ladder(spec, ladder, 3)?;
    if references.is_empty() || ps.is_empty() {
        return Err(invalid("strong error needs at least one p and one reference"));
    }
    for &p in ps {
        check_moment_order(spec, p)?;
    }
    if coeffs.dim() != spec.dimension() {
        return Err(invalid("coefficient and driver dimensions differ"));
    }
    if references.contains(&Reference::FiniteActivityOracle) && spec.exact_marginals {
        return Err(invalid("the finite-activity oracle needs a jump skeleton, not exact marginals"));
    }
    let seed = params.master_seed;
    let outcomes = params.executor.map_indexed(params.paths, |i| {
        aborted_to_none(path_sup_errors(coeffs, spec, ladder, references, seed, i as u64))
    });
    let (rows, indices, aborted) = collect(outcomes)?;
    if rows.len() < params.batches {
        return Err(invalid(format!("only {} paths survived", rows.len())));
    }
    let mut reports = Vec::new();
    for (r_idx, r) in references.iter().enumerate() {
        for &p in ps {
            let mut estimates = Vec::with_capacity(ladder.len());
            let mut spreads = Vec::with_capacity(ladder.len());
            for j in 0..ladder.len() {
                let col = r_idx * ladder.len() + j;
                let (v, s) = mom_column(&rows, &indices, col, params.batches, |e| e.powf(p))?;
                estimates.push(v);
                spreads.push(s);
            }
            reports.push(ErrorReport {
                variable: Variable::N,
                reference: Some(*r),
                p,
                ladder: ladder.iter().map(|&n| n as f64).collect(),
                estimates,
                spreads,
                paths: params.paths,
                aborted,
            });
        }
    }
    Ok(reports)
}

/// Bounded test function for weak errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `φ(x) = min(|x|, 1)^β`, with `|φ|_β = 1`.
    HolderCap { beta: f64 },
    /// `φ ≡ c`.
    Constant { value: f64 },
}

impl TestFunction {
    /// Parses `holder-cap:<β>` or `constant:<c>`.
    pub fn parse(name: &str) -> Result<Self> {
        let (head, arg) = name
            .split_once(':')
            .ok_or_else(|| invalid(format!("test function `{name}` needs a parameter")))?;
        let value: f64 = arg
            .parse()
            .map_err(|_| invalid(format!("bad parameter in test function `{name}`")))?;
        match head {
            "holder-cap" if value > 0.0 && value <= 1.0 => Ok(TestFunction::HolderCap { beta: value }),
            "holder-cap" => Err(invalid(format!("Hölder exponent {value} outside (0, 1]"))),
            "constant" if value.is_finite() => Ok(TestFunction::Constant { value }),
            _ => Err(invalid(format!("unknown test function `{name}`"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::HolderCap { beta } => format!("holder-cap:{beta}"),
            TestFunction::Constant { value } => format!("constant:{value}"),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::HolderCap { beta } => norm(x).min(1.0).powf(*beta),
            TestFunction::Constant { value } => *value,
        }
    }

    /// Declared Hölder exponent.
    pub fn beta(&self) -> f64 {
        match self {
            TestFunction::HolderCap { beta } => *beta,
            TestFunction::Constant { .. } => 1.0,
        }
    }

    /// Hölder seminorm `|φ|_β`.
    pub fn seminorm(&self) -> f64 {
        match self {
            TestFunction::HolderCap { .. } => 1.0,
            TestFunction::Constant { .. } => 0.0,
        }
    }
}

/// Paired weak-error estimates at time 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakReport {
    pub phi: String,
    pub beta_phi: f64,
    pub seminorm: f64,
    pub ladder: Vec<f64>,
    /// `|mean(φ(X^n_1) - φ(X^ref_1))|`.
    pub weak: Vec<f64>,
    /// Standard error of the paired differences.
    pub paired_se: Vec<f64>,
    /// `|φ|_β · mean |X^n_1 - X^ref_1|^β`.
    pub bound: Vec<f64>,
    /// Spearman correlation of `(log n, log weak)`.
    pub spearman: f64,
    pub paths: usize,
    pub aborted: usize,
}

impl WeakReport {
    /// Per-n check `weak ≤ bound + 4 · paired_se`.
    pub fn dominated(&self) -> Vec<bool> {
        self.weak
            .iter()
            .zip(&self.bound)
            .zip(&self.paired_se)
            .map(|((w, b), se)| *w <= b + 4.0 * se)
            .collect()
    }

    pub fn valid(&self) -> bool {
        self.aborted as f64 / self.paths as f64 <= MAX_ABORT_FRACTION
    }

    pub fn fit(&self, predicted: f64, check: Check, tolerance: f64) -> Result<RateFit> {
        let pts: Vec<(f64, f64)> = self.ladder.iter().copied().zip(self.weak.iter().copied()).collect();
        fit_rate(&pts, predicted, check, tolerance)
    }
}

/// Weak error `|Eφ(X^n_1) - Eφ(X^ref_1)|` on coupled paths. Plain means are
/// used so that the Hölder bound dominates path by path.
pub fn weak_error(
    coeffs: &SdeCoefficients,
    spec: &DriverSpec,
    ladder: &[usize],
    phi: &TestFunction,
    params: &RunParams,
) -> Result<WeakReport> {
    params.check()?;
    check_ladder(spec, ladder, 3)?;
    if coeffs.dim() != spec.dimension() {
        return Err(invalid("coefficient and driver dimensions differ"));
    }
    let beta = phi.beta();
    let kind = DriverKind::of(spec);
    let seed = params.master_seed;
    let outcomes = params.executor.map_indexed(params.paths, |i| {
        aborted_to_none((|| {
            let idx = i as u64;
            let base = realize_base_increments(seed, idx, spec, 0)?;
            let reference = euler_from_increments(coeffs, &base, kind, idx)?;
            let x_ref = reference.final_state();
            let phi_ref = phi.evaluate(x_ref);
            let mut row = Vec::with_capacity(2 * ladder.len());
            for &n in ladder {
                let path = euler_from_increments(coeffs, &base.aggregate(n)?, kind, idx)?;
                let x = path.final_state();
                let diff: Vec<f64> = x.iter().zip(x_ref).map(|(a, b)| a - b).collect();
                row.push(phi.evaluate(x) - phi_ref);
                row.push(norm(&diff).powf(beta));
            }
            Ok(row)
        })())
    });
    let (rows, _, aborted) = collect(outcomes)?;
    if rows.len() < 2 {
        return Err(invalid("weak error needs at least two surviving paths"));
    }
    let mut weak = Vec::new();
    let mut paired_se = Vec::new();
    let mut bound = Vec::new();
    for j in 0..ladder.len() {
        let d: Vec<f64> = rows.iter().map(|r| r[2 * j]).collect();
        let h: Vec<f64> = rows.iter().map(|r| r[2 * j + 1]).collect();
        let (m, se) = mean_and_se(&d);
        weak.push(m.abs());
        paired_se.push(se);
        bound.push(phi.seminorm() * mean_and_se(&h).0);
    }
    let logs_n: Vec<f64> = ladder.iter().map(|&n| (n as f64).ln()).collect();
    let logs_w: Vec<f64> = weak.iter().map(|w| w.ln()).collect();
    Ok(WeakReport {
        phi: phi.name(),
        beta_phi: beta,
        seminorm: phi.seminorm(),
        ladder: ladder.iter().map(|&n| n as f64).collect(),
        weak,
        paired_se,
        bound,
        spearman: spearman(&logs_n, &logs_w),
        paths: params.paths,
        aborted,
    })
}

/// `E|L_t|^p` (or `E|L⁰_t|^p`) for dyadic `t` in `t_ladder`. Only the window
/// `[0, max t]` of each path is simulated.
pub fn moment_scaling_driver(
    spec: &DriverSpec,
    p: f64,
    t_ladder: &[f64],
    params: &RunParams,
) -> Result<ErrorReport> {
    params.check()?;
    check_moment_order(spec, p)?;
    if t_ladder.is_empty() {
        return Err(invalid("empty t ladder"));
    }
    let mut offsets = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        let k = -t.log2();
        if !(t > 0.0 && t <= 1.0) || k.fract() != 0.0 || k > spec.base_log2 as f64 {
            return Err(invalid(format!(
                "t = {t} is not a dyadic time on the base grid 2^-{}",
                spec.base_log2
            )));
        }
        offsets.push(k as u32);
    }
    let window = *offsets.iter().min().expect("nonempty");
    let d = spec.dimension();
    let seed = params.master_seed;
    let outcomes = params.executor.map_indexed(params.paths, |i| -> PathSamples {
        let inc = realize_base_increments(seed, i as u64, spec, window)?;
        let cum = inc.cumulative();
        Ok(Some(
            offsets
                .iter()
                .map(|&k| {
                    let row = 1usize << (spec.base_log2 - k);
                    norm(&cum[row * d..(row + 1) * d])
                })
                .collect(),
        ))
    });
    let (rows, indices, aborted) = collect(outcomes)?;
    let mut estimates = Vec::new();
    let mut spreads = Vec::new();
    for j in 0..t_ladder.len() {
        let (v, s) = mom_column(&rows, &indices, j, params.batches, |x| x.powf(p))?;
        estimates.push(v);
        spreads.push(s);
    }
    Ok(ErrorReport {
        variable: Variable::T,
        reference: None,
        p,
        ladder: t_ladder.to_vec(),
        estimates,
        spreads,
        paths: params.paths,
        aborted,
    })
}

fn probe_increment(
    coeffs: &SdeCoefficients,
    base: &Increments,
    n: usize,
    u: f64,
    kind: DriverKind,
    path_index: u64,
) -> Result<f64> {
    let d = coeffs.dim();
    let coarse = euler_from_increments(coeffs, &base.aggregate(n)?, kind, path_index)?;
    let half = base.aggregate(2 * n)?;
    let k = ((u * n as f64) as usize).min(n - 1);
    let x = coarse.state(k);
    let mut b = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM * MAX_DIM];
    coeffs.drift_into(x, &mut b[..d]);
    coeffs.diffusion_into(x, &mut g[..d * d]);
    let dl = half.cell(2 * k);
    let dt = 0.5 / n as f64;
    let mut inc = [0.0; MAX_DIM];
    for i in 0..d {
        inc[i] = b[i] * dt + (0..d).map(|j| g[i * d + j] * dl[j]).sum::<f64>();
    }
    let out = norm(&inc[..d]);
    if !out.is_finite() {
        return Err(Error::PathAborted {
            path_index,
            resolution: n,
            step: k,
        });
    }
    Ok(out)
}

/// `E|X^n_t - X^n_{π_n(t)}|^p` at the midpoint `t` of a random cell of each
/// grid. One uniform per path picks the cell `floor(u n)` at every `n`.
pub fn grid_increment_scaling(
    coeffs: &SdeCoefficients,
    spec: &DriverSpec,
    p: f64,
    ladder: &[usize],
    params: &RunParams,
) -> Result<ErrorReport> {
    params.check()?;
    check_moment_order(spec, p)?;
    check_ladder(spec, ladder, 1)?;
    if coeffs.dim() != spec.dimension() {
        return Err(invalid("coefficient and driver dimensions differ"));
    }
    let kind = DriverKind::of(spec);
    let seed = params.master_seed;
    let outcomes = params.executor.map_indexed(params.paths, |i| {
        aborted_to_none((|| {
            let idx = i as u64;
            let u: f64 = rand::Rng::random(&mut stream_rng(seed, idx, Stream::Probe));
            let base = realize_base_increments(seed, idx, spec, 0)?;
            ladder
                .iter()
                .map(|&n| probe_increment(coeffs, &base, n, u, kind, idx))
                .collect::<Result<Vec<f64>>>()
        })())
    });
    let (rows, indices, aborted) = collect(outcomes)?;
    let mut estimates = Vec::new();
    let mut spreads = Vec::new();
    for j in 0..ladder.len() {
        let (v, s) = mom_column(&rows, &indices, j, params.batches, |x| x.powf(p))?;
        estimates.push(v);
        spreads.push(s);
    }
    Ok(ErrorReport {
        variable: Variable::N,
        reference: None,
        p,
        ladder: ladder.iter().map(|&n| n as f64).collect(),
        estimates,
        spreads,
        paths: params.paths,
        aborted,
    })
}

/// Strong-error estimates at cutoff ε and ε/2 on the same seeds. The
/// surrogate bias is subdominant when every estimate moves by less than the
/// batch spread of the ε run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub epsilon: f64,
    pub base: ErrorReport,
    pub halved: ErrorReport,
}

impl BiasReport {
    pub fn shifts(&self) -> Vec<f64> {
        self.base
            .estimates
            .iter()
            .zip(&self.halved.estimates)
            .map(|(a, b)| (a - b).abs())
            .collect()
    }

    pub fn subdominant(&self) -> bool {
        self.shifts().iter().zip(&self.base.spreads).all(|(d, s)| d < s)
    }
}

pub fn epsilon_bias(
    coeffs: &SdeCoefficients,
    spec: &DriverSpec,
    ladder: &[usize],
    p: f64,
    params: &RunParams,
) -> Result<BiasReport> {
    let base = strong_error(coeffs, spec, ladder, p, params)?;
    let mut halved_spec = spec.clone();
    halved_spec.epsilon_cut = 0.5 * spec.epsilon_cut;
    halved_spec.validate()?;
    let halved = strong_error(coeffs, &halved_spec, ladder, p, params)?;
    Ok(BiasReport {
        epsilon: spec.epsilon_cut,
        base,
        halved,
    })
}
