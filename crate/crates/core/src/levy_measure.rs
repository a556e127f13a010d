//! The Lévy measure `ρ(y) dy / |y|^{d+α}` and its samplers.
//!
//! `ρ` is stored as a function of direction only, so 0-homogeneity holds by
//! construction. In polar coordinates the measure factors into an angular
//! part `ρ(θ) dθ` and a radial part `r^{-1-α} dr`, which is how every
//! sampler and moment below is computed.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{sphere_integral, sphere_sweep, GaussRule};
use crate::MAX_DIM;

/// Proposals allowed before the direction sampler gives up.
pub const MAX_PROPOSALS: u64 = 1_000_000;

/// Stability index and driver choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableIndex {
    alpha: f64,
    truncated: bool,
}

impl StableIndex {
    pub fn new(alpha: f64, truncated: bool) -> Result<Self> {
        if !(1.0..2.0).contains(&alpha) {
            return Err(invalid(format!("alpha = {alpha} outside [1, 2)")));
        }
        Ok(Self { alpha, truncated })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `true` when the driver is `L⁰` (jumps of size at most one).
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn with_truncated(self, truncated: bool) -> Self {
        Self { truncated, ..self }
    }

    /// α = 1 needs the symmetric angular density for the untruncated driver.
    pub fn check_density(&self, density: &AngularDensity) -> Result<()> {
        if self.alpha == 1.0 && !self.truncated && !density.symmetric() {
            return Err(Error::Configuration(
                "alpha = 1 with the untruncated driver requires a symmetric angular density (sym): rho(-y) = rho(y)"
                    .into(),
            ));
        }
        Ok(())
    }
}

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Constant(f64),
    CosineTilt(f64),
    TwoSided { plus: f64, minus: f64 },
    Custom(DensityFn),
}

/// Angular integrals of ρ: mass, first moment and second-moment matrix
/// (row-major `d × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMoments {
    pub mass: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// The 0-homogeneous density ρ, evaluated on unit vectors.
#[derive(Clone)]
pub struct AngularDensity {
    name: String,
    dimension: usize,
    shape: Shape,
    upper_bound: f64,
    lower_bound: f64,
    symmetric: bool,
    holder_beta: Option<f64>,
    moments: SphereMoments,
}

impl fmt::Debug for AngularDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AngularDensity")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("upper_bound", &self.upper_bound)
            .field("lower_bound", &self.lower_bound)
            .field("symmetric", &self.symmetric)
            .field("holder_beta", &self.holder_beta)
            .finish()
    }
}

impl AngularDensity {
    /// ρ ≡ 1 in dimension `dim`.
    pub fn isotropic(dim: usize) -> Result<Self> {
        Self::constant(dim, 1.0)
    }

    /// ρ ≡ `level`.
    pub fn constant(dim: usize, level: f64) -> Result<Self> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(invalid(format!("constant density level {level} must be positive")));
        }
        let name = if level == 1.0 {
            "isotropic".to_string()
        } else {
            format!("isotropic:{level}")
        };
        Self::build(name, dim, Shape::Constant(level), level, level, true, None)
    }

    /// ρ(θ) = 1 + a·cos θ on the circle.
    pub fn cosine_tilt(tilt: f64) -> Result<Self> {
        if !(tilt.abs() < 1.0) {
            return Err(invalid(format!("cosine tilt {tilt} must satisfy |a| < 1")));
        }
        Self::build(
            format!("cosine-tilt:{tilt}"),
            2,
            Shape::CosineTilt(tilt),
            1.0 + tilt.abs(),
            1.0 - tilt.abs(),
            tilt == 0.0,
            Some(1.0),
        )
    }

    /// d = 1 density with weight `plus` on positive and `minus` on negative jumps.
    pub fn two_sided(plus: f64, minus: f64) -> Result<Self> {
        if !(plus > 0.0 && minus > 0.0 && plus.is_finite() && minus.is_finite()) {
            return Err(invalid(format!(
                "two-sided weights must be positive, got {plus}, {minus}"
            )));
        }
        Self::build(
            format!("two-sided:{plus}:{minus}"),
            1,
            Shape::TwoSided { plus, minus },
            plus.max(minus),
            plus.min(minus),
            plus == minus,
            None,
        )
    }

    /// User density. The declared bounds and symmetry flag are checked on a
    /// sphere sweep of 10⁴ points.
    pub fn custom<F>(
        dim: usize,
        rho: F,
        upper_bound: f64,
        lower_bound: f64,
        symmetric: bool,
        holder_beta: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let density = Self::build(
            "custom".into(),
            dim,
            Shape::Custom(Arc::new(rho)),
            upper_bound,
            lower_bound,
            symmetric,
            holder_beta,
        )?;
        density.check_bounds(10_000)?;
        Ok(density)
    }

    /// Registry lookup: `isotropic`, `isotropic:<c>`, `cosine-tilt:<a>`
    /// (d = 2) and `two-sided:<w+>:<w->` (d = 1).
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        let mut parts = name.split(':');
        let head = parts.next().unwrap_or_default();
        let params: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad density parameter '{p}' in '{name}'")))
            })
            .collect::<Result<_>>()?;
        let density = match (head, params.as_slice()) {
            ("isotropic", []) => Self::isotropic(dim)?,
            ("isotropic", [c]) => Self::constant(dim, *c)?,
            ("cosine-tilt", [a]) => Self::cosine_tilt(*a)?,
            ("two-sided", [p, m]) => Self::two_sided(*p, *m)?,
            _ => return Err(invalid(format!("unknown density '{name}'"))),
        };
        if density.dimension != dim {
            return Err(invalid(format!(
                "density '{name}' lives in dimension {}, configuration asks for {dim}",
                density.dimension
            )));
        }
        Ok(density)
    }

    fn build(
        name: String,
        dimension: usize,
        shape: Shape,
        upper_bound: f64,
        lower_bound: f64,
        symmetric: bool,
        holder_beta: Option<f64>,
    ) -> Result<Self> {
        if dimension == 0 || dimension > MAX_DIM {
            return Err(invalid(format!("dimension {dimension} not in 1..={MAX_DIM}")));
        }
        if !(upper_bound.is_finite() && upper_bound > 0.0) {
            return Err(invalid("upper bound K must be finite and positive"));
        }
        if !(lower_bound >= 0.0 && lower_bound <= upper_bound) {
            return Err(invalid("lower bound c0 must lie in [0, K]"));
        }
        let mut density = Self {
            name,
            dimension,
            shape,
            upper_bound,
            lower_bound,
            symmetric,
            holder_beta,
            moments: SphereMoments {
                mass: 0.0,
                first: vec![],
                second: vec![],
            },
        };
        density.moments = density.compute_moments()?;
        Ok(density)
    }

    fn compute_moments(&self) -> Result<SphereMoments> {
        let d = self.dimension;
        let m = 1 + d + d * d;
        let v = sphere_integral(d, m, |theta, out| {
            let r = self.evaluate(theta);
            out[0] = r;
            for i in 0..d {
                out[1 + i] = theta[i] * r;
                for j in 0..d {
                    out[1 + d + i * d + j] = theta[i] * theta[j] * r;
                }
            }
        })?;
        Ok(SphereMoments {
            mass: v[0],
            first: v[1..1 + d].to_vec(),
            second: v[1 + d..].to_vec(),
        })
    }

    /// ρ(θ) for a unit vector θ.
    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        match &self.shape {
            Shape::Constant(c) => *c,
            Shape::CosineTilt(a) => 1.0 + a * theta[0],
            Shape::TwoSided { plus, minus } => {
                if theta[0] > 0.0 {
                    *plus
                } else {
                    *minus
                }
            }
            Shape::Custom(f) => f(theta),
        }
    }

    /// ρ(y) for any nonzero y; only the direction matters.
    pub fn evaluate_at(&self, y: &[f64]) -> f64 {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut theta = [0.0; MAX_DIM];
        for (t, v) in theta.iter_mut().zip(y) {
            *t = v / norm;
        }
        self.evaluate(&theta[..self.dimension])
    }

    /// Checks `c0 ≤ ρ ≤ K` and, when declared, `ρ(-θ) = ρ(θ)` (to 1e-12)
    /// on a deterministic sweep of at least `count` directions.
    pub fn check_bounds(&self, count: usize) -> Result<()> {
        let d = self.dimension;
        for p in sphere_sweep(d, count) {
            let theta = &p[..d];
            let r = self.evaluate(theta);
            if !r.is_finite() || r > self.upper_bound || r < self.lower_bound {
                return Err(Error::Configuration(format!(
                    "rho({theta:?}) = {r} violates declared bounds [{}, {}]",
                    self.lower_bound, self.upper_bound
                )));
            }
            if self.symmetric {
                let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
                let diff = (r - self.evaluate(&neg)).abs();
                if diff > 1e-12 {
                    return Err(Error::Configuration(format!(
                        "density declared symmetric but |rho(theta) - rho(-theta)| = {diff:e} at {theta:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Hölder exponent of ρ on the sphere, recorded as metadata only.
    pub fn holder_beta(&self) -> Option<f64> {
        self.holder_beta
    }

    pub fn moments(&self) -> &SphereMoments {
        &self.moments
    }

    /// `m_ρ = ∫ ρ(θ) dθ` over the sphere.
    pub fn mass(&self) -> f64 {
        self.moments.mass
    }

    /// The constant level when ρ is constant.
    pub fn constant_level(&self) -> Option<f64> {
        match self.shape {
            Shape::Constant(c) => Some(c),
            _ => None,
        }
    }
}

/// Uniform direction on S^{d-1}.
fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> [f64; MAX_DIM] {
    match dim {
        1 => [if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0, 0.0],
        2 => {
            let phi = 2.0 * PI * rng.random::<f64>();
            [phi.cos(), phi.sin(), 0.0]
        }
        _ => {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let phi = 2.0 * PI * rng.random::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            [s * phi.cos(), s * phi.sin(), z]
        }
    }
}

/// Direction with law `ρ(θ) dθ / m_ρ`, by rejection against the uniform
/// law with acceptance probability `ρ(θ)/K`.
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R, density: &AngularDensity) -> Result<[f64; MAX_DIM]> {
    let k = density.upper_bound;
    for _ in 0..MAX_PROPOSALS {
        let theta = uniform_direction(rng, density.dimension);
        let r = density.evaluate(&theta[..density.dimension]);
        if r > k {
            return Err(Error::RejectionExhausted {
                proposals: MAX_PROPOSALS,
                upper_bound: k,
            });
        }
        if rng.random::<f64>() * k < r {
            return Ok(theta);
        }
    }
    Err(Error::RejectionExhausted {
        proposals: MAX_PROPOSALS,
        upper_bound: k,
    })
}

fn check_radii(r_min: f64, r_max: f64) -> Result<()> {
    if !(r_min > 0.0) {
        return Err(invalid(format!("r_min = {r_min} must be positive")));
    }
    if !(r_min < r_max) {
        return Err(invalid(format!("r_min = {r_min} must be below r_max = {r_max}")));
    }
    Ok(())
}

/// Inverse CDF of the density ∝ r^{-1-α} on `[r_min, r_max]`; `r_max` may
/// be `f64::INFINITY`, whose tail term `r_max^{-α}` is then exactly zero.
pub fn radius_from_uniform(u: f64, alpha: f64, r_min: f64, r_max: f64) -> f64 {
    if u == 0.0 {
        return r_min;
    }
    let lo = r_min.powf(-alpha);
    let hi = if r_max.is_infinite() { 0.0 } else { r_max.powf(-alpha) };
    let r = (lo - u * (lo - hi)).powf(-1.0 / alpha);
    r.clamp(r_min, r_max)
}

/// Radius with density ∝ r^{-1-α} on `[r_min, r_max]`.
pub fn sample_radius<R: Rng + ?Sized>(rng: &mut R, alpha: f64, r_min: f64, r_max: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha = {alpha} must be positive")));
    }
    check_radii(r_min, r_max)?;
    Ok(radius_from_uniform(rng.random::<f64>(), alpha, r_min, r_max))
}

/// `∫_{r_min}^{r_max} r^{-1-α} dr`.
pub(crate) fn radial_mass(alpha: f64, r_min: f64, r_max: f64) -> f64 {
    let hi = if r_max.is_infinite() { 0.0 } else { r_max.powf(-alpha) };
    (r_min.powf(-alpha) - hi) / alpha
}

/// Total mass of the Lévy measure on `{ε < |y| ≤ r_max}`.
pub fn jump_intensity(density: &AngularDensity, alpha: f64, epsilon: f64, r_max: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= r_max) {
        return Err(invalid(format!(
            "need 0 < epsilon <= r_max, got epsilon = {epsilon}, r_max = {r_max}"
        )));
    }
    if epsilon == r_max {
        return Ok(0.0);
    }
    Ok(density.mass() * radial_mass(alpha, epsilon, r_max))
}

/// Covariance of the compensated jumps with |y| ≤ ε, per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallJumpMoments {
    pub epsilon: f64,
    /// Row-major `d × d`.
    pub covariance: Vec<f64>,
    pub mass_sphere: f64,
}

impl SmallJumpMoments {
    /// Lower-triangular Cholesky factor of the covariance (row-major). Zero
    /// pivots are tolerated, which covers degenerate directions.
    pub fn cholesky(&self) -> Vec<f64> {
        let d = (self.covariance.len() as f64).sqrt() as usize;
        let a = &self.covariance;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = a[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    l[i * d + i] = s.max(0.0).sqrt();
                } else if l[j * d + j] > 0.0 {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        l
    }
}

/// `Σ(ε) = ∫_{|y|≤ε} y yᵀ ρ(y) |y|^{-d-α} dy = ε^{2-α}/(2-α) ∫ θθᵀ ρ(θ) dθ`.
pub fn small_jump_moments(density: &AngularDensity, alpha: f64, epsilon: f64) -> Result<SmallJumpMoments> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("epsilon = {epsilon} must lie in (0, 1]")));
    }
    if !(alpha < 2.0) {
        return Err(invalid(format!("alpha = {alpha} must be below 2")));
    }
    let radial = epsilon.powf(2.0 - alpha) / (2.0 - alpha);
    let covariance = density.moments.second.iter().map(|v| v * radial).collect();
    Ok(SmallJumpMoments {
        epsilon,
        covariance,
        mass_sphere: density.mass(),
    })
}

/// `∫_{|y|>1} y ρ(y) |y|^{-d-α} dy = (1/(α-1)) ∫ θ ρ(θ) dθ` for α ∈ (1, 2);
/// zero for α = 1, where only |y| ≤ 1 is compensated.
pub fn big_jump_compensator(density: &AngularDensity, index: &StableIndex) -> Result<Vec<f64>> {
    index.check_density(density)?;
    let alpha = index.alpha();
    if alpha == 1.0 {
        return Ok(vec![0.0; density.dimension]);
    }
    if density.symmetric {
        return Ok(vec![0.0; density.dimension]);
    }
    Ok(density.moments.first.iter().map(|v| v / (alpha - 1.0)).collect())
}

/// `∫_{ε<|y|≤1} y ρ(y) |y|^{-d-α} dy`.
pub fn mid_jump_compensator(density: &AngularDensity, alpha: f64, epsilon: f64) -> Vec<f64> {
    if density.symmetric || epsilon >= 1.0 {
        return vec![0.0; density.dimension];
    }
    let radial = if alpha == 1.0 {
        -epsilon.ln()
    } else {
        (epsilon.powf(1.0 - alpha) - 1.0) / (alpha - 1.0)
    };
    density.moments.first.iter().map(|v| v * radial).collect()
}

/// Quadrature panels used for the oscillatory tail of the scale constant.
const TAIL_PERIODS: usize = 4000;

fn scale_constant_uncached(alpha: f64) -> f64 {
    let rule = GaussRule::new(20);
    // [0, 1]: v = s^k with k = 1/(2-α) flattens the v^{1-α} singularity.
    let k = 1.0 / (2.0 - alpha);
    let head = |s: f64| {
        if s == 0.0 {
            return 0.5 * k;
        }
        let v = s.powf(k);
        let one_minus_cos = 2.0 * (0.5 * v).sin().powi(2);
        one_minus_cos * v.powf(-1.0 - alpha) * k * s.powf(k - 1.0)
    };
    let near = rule.adaptive(&head, 0.0, 1.0, 1e-14);
    // [1, ∞): (1 - cos v) v^{-1-α} = v^{-1-α} - cos v · v^{-1-α}.
    let f = |v: f64| v.powf(-1.0 - alpha);
    let osc = |v: f64| v.cos() * f(v);
    let mut cos_part = rule.integrate(osc, 1.0, PI);
    for j in 1..TAIL_PERIODS {
        let a = PI * j as f64;
        cos_part += rule.integrate(osc, a, a + PI);
    }
    // Remaining tail by two integrations by parts.
    let v = PI * TAIL_PERIODS as f64;
    let df = -(1.0 + alpha) * v.powf(-2.0 - alpha);
    cos_part += -v.sin() * f(v) - v.cos() * df;
    let far = 1.0 / alpha - cos_part;
    2.0 * (near + far)
}

/// `c_α = 2∫₀^∞ (1 - cos v) v^{-1-α} dv`, the characteristic exponent of
/// the d = 1 driver with ρ ≡ 1: `E exp(iuL_t) = exp(-t c_α |u|^α)`.
/// Values are cached per α.
pub fn stable_scale_constant(alpha: f64) -> Result<f64> {
    if !(1.0..2.0).contains(&alpha) {
        return Err(invalid(format!("alpha = {alpha} outside [1, 2)")));
    }
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache poisoned").get(&alpha.to_bits()) {
        return Ok(*v);
    }
    let value = scale_constant_uncached(alpha);
    cache.lock().expect("cache poisoned").insert(alpha.to_bits(), value);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn rng() -> rand_chacha::ChaCha8Rng {
        stream_rng(11, 0, Stream::Probe)
    }

    #[test]
    fn stable_index_domain() {
        assert!(StableIndex::new(1.0, false).is_ok());
        assert!(StableIndex::new(0.99, false).is_err());
        assert!(StableIndex::new(2.0, true).is_err());
    }

    #[test]
    fn alpha_one_untruncated_requires_symmetry() {
        let idx = StableIndex::new(1.0, false).unwrap();
        let asym = AngularDensity::two_sided(2.0, 1.0).unwrap();
        let err = idx.check_density(&asym).unwrap_err();
        assert!(err.to_string().contains("(sym)"));
        assert!(idx.with_truncated(true).check_density(&asym).is_ok());
        assert!(big_jump_compensator(&asym, &idx).is_err());
    }

    #[test]
    fn registry_names() {
        assert_eq!(AngularDensity::from_name("isotropic", 3).unwrap().dimension(), 3);
        assert!(AngularDensity::from_name("cosine-tilt:0.5", 2).is_ok());
        assert!(AngularDensity::from_name("cosine-tilt:0.5", 1).is_err());
        assert!(AngularDensity::from_name("two-sided:2:1", 1).is_ok());
        assert!(AngularDensity::from_name("bogus", 1).is_err());
        assert!(AngularDensity::from_name("two-sided:x:1", 1).is_err());
    }

    #[test]
    fn builtin_densities_respect_bounds_and_symmetry() {
        for d in [
            AngularDensity::isotropic(2).unwrap(),
            AngularDensity::isotropic(3).unwrap(),
            AngularDensity::cosine_tilt(0.5).unwrap(),
            AngularDensity::cosine_tilt(0.0).unwrap(),
            AngularDensity::two_sided(3.0, 3.0).unwrap(),
        ] {
            d.check_bounds(10_000).unwrap();
        }
    }

    #[test]
    fn custom_density_with_wrong_bound_rejected() {
        let bad = AngularDensity::custom(2, |t| 1.0 + 0.9 * t[0], 1.5, 0.1, false, None);
        assert!(bad.is_err());
        let asym = AngularDensity::custom(2, |t| 1.0 + 0.1 * t[1], 1.2, 0.5, true, None);
        assert!(asym.is_err());
        let ok = AngularDensity::custom(2, |t| 1.0 + 0.1 * t[0] * t[0], 1.2, 0.5, true, Some(1.0));
        assert!(ok.is_ok());
    }

    #[test]
    fn uniform_circle_has_zero_mean_cosine() {
        let density = AngularDensity::isotropic(2).unwrap();
        let mut r = rng();
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_direction(&mut r, &density).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        // Var(cos θ) = 1/2 under the uniform law
        let sigma = (0.5 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean = {mean}");
    }

    #[test]
    fn constant_density_below_upper_bound_is_still_uniform() {
        let density = AngularDensity::custom(2, |_| 0.25, 1.0, 0.25, true, None).unwrap();
        let mut r = rng();
        let n = 40_000;
        let upper_half = (0..n)
            .filter(|_| sample_direction(&mut r, &density).unwrap()[1] > 0.0)
            .count() as f64
            / n as f64;
        assert!((upper_half - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn cosine_tilt_mean_matches_quadrature() {
        // Oracle: trapezoid quadrature of ∫cosθ ρ and ∫ρ over the circle.
        let m = 4096;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let rho = 1.0 + 0.5 * th.cos();
            num += th.cos() * rho;
            den += rho;
        }
        let expect = num / den;
        assert!((expect - 0.25).abs() < 1e-12);

        let density = AngularDensity::cosine_tilt(0.5).unwrap();
        let mut r = rng();
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_direction(&mut r, &density).unwrap()[0])
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn inconsistent_upper_bound_detected() {
        // Declared K below sup ρ: the sampler notices on the first offending proposal.
        let density = AngularDensity::cosine_tilt(0.5).unwrap();
        let broken = AngularDensity {
            upper_bound: 0.5,
            ..density
        };
        let mut r = rng();
        let res = (0..100).try_for_each(|_| sample_direction(&mut r, &broken).map(|_| ()));
        assert!(matches!(res, Err(Error::RejectionExhausted { .. })));
    }

    #[test]
    fn radius_inverse_cdf_endpoints_and_midpoint() {
        assert_eq!(radius_from_uniform(0.0, 1.5, 0.01, 1.0), 0.01);
        let near_one = radius_from_uniform(1.0 - 1e-15, 1.5, 0.01, 1.0);
        assert!((near_one - 1.0).abs() < 1e-9);
        // 1/(100 - 0.5 * 99)
        let r = radius_from_uniform(0.5, 1.0, 0.01, 1.0);
        assert!((r - 1.0 / 50.5).abs() < 1e-15);
        assert!((r - 0.019_802_0).abs() < 1e-7);
        assert!(radius_from_uniform(0.999, 1.5, 0.01, f64::INFINITY).is_finite());
    }

    #[test]
    fn radius_rejects_bad_ranges() {
        let mut r = rng();
        assert!(sample_radius(&mut r, 1.5, 0.0, 1.0).is_err());
        assert!(sample_radius(&mut r, 1.5, 1.0, 1.0).is_err());
        assert!(sample_radius(&mut r, 1.5, 2.0, 1.0).is_err());
    }

    fn ks_pvalue(d: f64, n: usize) -> f64 {
        let sn = (n as f64).sqrt();
        let lambda = (sn + 0.12 + 0.11 / sn) * d;
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
            sum += term;
            if term.abs() < 1e-16 {
                break;
            }
        }
        sum.clamp(0.0, 1.0)
    }

    #[test]
    fn radius_passes_kolmogorov_smirnov() {
        let n = 100_000;
        for (i, alpha) in [1.0, 1.5, 1.9].into_iter().enumerate() {
            for (j, r_min) in [1e-3, 1e-2].into_iter().enumerate() {
                for (k, r_max) in [1.0, f64::INFINITY].into_iter().enumerate() {
                    let mut r = stream_rng(5, (i * 4 + j * 2 + k) as u64, Stream::Probe);
                    let mut xs: Vec<f64> = (0..n)
                        .map(|_| sample_radius(&mut r, alpha, r_min, r_max).unwrap())
                        .collect();
                    xs.sort_by(f64::total_cmp);
                    let lo = r_min.powf(-alpha);
                    let hi = if r_max.is_infinite() { 0.0 } else { r_max.powf(-alpha) };
                    let cdf = |x: f64| (lo - x.powf(-alpha)) / (lo - hi);
                    let d = xs
                        .iter()
                        .enumerate()
                        .map(|(m, &x)| {
                            let f = cdf(x);
                            (f - m as f64 / n as f64).max((m + 1) as f64 / n as f64 - f)
                        })
                        .fold(0.0, f64::max);
                    let p = ks_pvalue(d, n);
                    assert!(p > 1e-3, "alpha {alpha} r_min {r_min} r_max {r_max}: D = {d}, p = {p}");
                }
            }
        }
    }

    #[test]
    fn samplers_are_pure_in_rng_state() {
        let density = AngularDensity::cosine_tilt(0.3).unwrap();
        let a = sample_direction(&mut rng(), &density).unwrap();
        let b = sample_direction(&mut rng(), &density).unwrap();
        assert_eq!(a, b);
        let ra = sample_radius(&mut rng(), 1.3, 0.1, 2.0).unwrap();
        let rb = sample_radius(&mut rng(), 1.3, 0.1, 2.0).unwrap();
        assert_eq!(ra.to_bits(), rb.to_bits());
    }

    #[test]
    fn intensity_closed_forms() {
        let d1 = AngularDensity::isotropic(1).unwrap();
        // Oracle: ∫_{ε<|y|≤1} |y|^{-2} dy by Gauss–Legendre on both half-lines.
        let rule = GaussRule::new(30);
        let quad = 2.0 * rule.adaptive(&|y: f64| y.powi(-2), 0.01, 1.0, 1e-12);
        let lam = jump_intensity(&d1, 1.0, 0.01, 1.0).unwrap();
        assert!((lam - 198.0).abs() < 1e-9);
        assert!((lam - quad).abs() < 1e-8 * quad);

        let lam = jump_intensity(&d1, 1.5, 0.1, f64::INFINITY).unwrap();
        let expect = 2.0 * 0.1f64.powf(-1.5) / 1.5;
        assert!((lam - expect).abs() < 1e-12);
        assert!((lam - 42.1637).abs() < 1e-4);

        assert_eq!(jump_intensity(&d1, 1.5, 0.5, 0.5).unwrap(), 0.0);
        assert!(jump_intensity(&d1, 1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn small_jump_variance_d1() {
        let d1 = AngularDensity::isotropic(1).unwrap();
        let m = small_jump_moments(&d1, 1.5, 0.1).unwrap();
        // Oracle: 2∫_0^ε y^2 y^{-2.5} dy by adaptive quadrature.
        let rule = GaussRule::new(20);
        let quad = 2.0 * rule.adaptive(&|y: f64| y.powf(-0.5), 0.0, 0.1, 1e-13);
        assert!((m.covariance[0] - quad).abs() < 1e-6 * quad);
        assert!((m.covariance[0] - 1.264_911).abs() < 1e-6);
        let tiny = small_jump_moments(&d1, 1.5, 1e-12).unwrap();
        assert!(tiny.covariance[0] < 1e-5);
        assert!(small_jump_moments(&d1, 1.5, 1.5).is_err());
    }

    #[test]
    fn small_jump_covariance_isotropic_d2_and_scaling() {
        let d2 = AngularDensity::isotropic(2).unwrap();
        let m = small_jump_moments(&d2, 1.3, 0.01).unwrap();
        assert!((m.covariance[0] - m.covariance[3]).abs() <= 1e-12);
        assert!(m.covariance[1].abs() <= 1e-12);
        for density in [d2, AngularDensity::cosine_tilt(0.4).unwrap()] {
            for alpha in [1.0, 1.5, 1.9] {
                let a = small_jump_moments(&density, alpha, 0.05).unwrap();
                let b = small_jump_moments(&density, alpha, 0.1).unwrap();
                let ratio = 2f64.powf(2.0 - alpha);
                for (x, y) in a.covariance.iter().zip(&b.covariance) {
                    if x.abs() > 1e-14 {
                        assert!((y / x - ratio).abs() < 1e-6 * ratio);
                    }
                }
            }
        }
    }

    #[test]
    fn cholesky_reproduces_covariance() {
        let d = AngularDensity::cosine_tilt(0.6).unwrap();
        let m = small_jump_moments(&d, 1.4, 0.2).unwrap();
        let l = m.cholesky();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[i * 2 + k] * l[j * 2 + k]).sum();
                assert!((v - m.covariance[i * 2 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn compensator_cases() {
        let idx = StableIndex::new(1.5, false).unwrap();
        let sym = AngularDensity::isotropic(2).unwrap();
        assert_eq!(big_jump_compensator(&sym, &idx).unwrap(), vec![0.0, 0.0]);
        let two = AngularDensity::two_sided(2.0, 1.0).unwrap();
        let c = big_jump_compensator(&two, &idx).unwrap();
        // Oracle: ∫_1^∞ y (2 - 1) y^{-2.5} dy by quadrature after y = 1/s².
        let rule = GaussRule::new(20);
        let quad = (2.0 - 1.0)
            * rule.adaptive(
                &|s: f64| {
                    let y = s.powi(-2);
                    y * y.powf(-2.5) * 2.0 * s.powi(-3)
                },
                0.0,
                1.0,
                1e-13,
            );
        assert!((c[0] - 2.0).abs() < 1e-12);
        assert!((c[0] - quad).abs() < 1e-10);
        let one = StableIndex::new(1.0, false).unwrap();
        assert_eq!(big_jump_compensator(&AngularDensity::isotropic(1).unwrap(), &one).unwrap(), vec![0.0]);
    }

    #[test]
    fn scale_constant_matches_closed_form_and_second_scheme() {
        use statrs::function::gamma::gamma;
        for alpha in [1.05, 1.3, 1.5, 1.7, 1.95] {
            let c = stable_scale_constant(alpha).unwrap();
            let closed = -2.0 * gamma(-alpha) * (PI * alpha / 2.0).cos();
            assert!((c - closed).abs() < 1e-8 * closed, "alpha {alpha}: {c} vs {closed}");
        }
        // Independent route: power series on [0, 1], period-2π panels on the tail.
        let alpha = 1.5;
        let mut head = 0.0;
        let mut fact = 1.0;
        for k in 1..30 {
            fact *= ((2 * k - 1) * (2 * k)) as f64;
            head += (-1f64).powi(k as i32 + 1) / (fact * (2 * k) as f64 - fact * alpha);
        }
        let rule = GaussRule::new(30);
        let f = |v: f64| (1.0 - v.cos()) * v.powf(-1.0 - alpha);
        let mut tail = rule.integrate(f, 1.0, 2.0 * PI);
        let periods = 3000;
        for j in 1..periods {
            let a = 2.0 * PI * j as f64;
            tail += rule.integrate(f, a, a + 2.0 * PI);
        }
        let v = 2.0 * PI * periods as f64;
        tail += v.powf(-alpha) / alpha - (1.0 + alpha) * v.powf(-2.0 - alpha);
        let other = 2.0 * (head + tail);
        let c = stable_scale_constant(alpha).unwrap();
        assert!((c - other).abs() < 1e-8 * c, "{c} vs {other}");
    }

    #[test]
    fn scale_constant_positive_and_continuous() {
        // c_α grows like 1/(2 - α), so the grid stops where its slope
        // would exceed 100.
        let mut alpha = 1.0;
        while alpha < 1.86 {
            let c = stable_scale_constant(alpha).unwrap();
            assert!(c > 0.0 && c.is_finite());
            let c2 = stable_scale_constant(alpha + 1e-4).unwrap();
            assert!((c - c2).abs() <= 1e-2);
            alpha += 0.05;
        }
        assert!((stable_scale_constant(1.0).unwrap() - PI).abs() < 1e-8);
    }
}
