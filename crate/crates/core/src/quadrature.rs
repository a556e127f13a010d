//! Numerical integration: Gauss–Legendre rules on intervals and the sphere
//! rules used for angular moments (counting measure on S⁰, trapezoid on S¹,
//! product Gauss on S²).

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Relative tolerance for sphere refinement.
pub const SPHERE_TOLERANCE: f64 = 1e-8;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed Gauss–Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(points: usize) -> Self {
        let (nodes, weights) = gauss_legendre(points);
        Self { nodes, weights }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Adaptive bisection: accepts a panel when the rule on the panel and on
    /// its two halves agree to `tol` (absolute, scaled to the panel width).
    pub fn adaptive<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, tol: f64) -> f64 {
        let whole = self.integrate(f, a, b);
        self.refine(f, a, b, whole, tol, 0)
    }

    fn refine<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.integrate(f, a, mid);
        let right = self.integrate(f, mid, b);
        if (left + right - whole).abs() <= tol || depth >= 40 {
            return left + right;
        }
        self.refine(f, a, mid, left, 0.5 * tol, depth + 1)
            + self.refine(f, mid, b, right, 0.5 * tol, depth + 1)
    }
}

/// Unit vectors on S^{d-1} with quadrature weights summing to |S^{d-1}|.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Level `level` rule; higher levels are strictly finer.
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        match dim {
            1 => Ok(Self {
                dim,
                points: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
                weights: vec![1.0, 1.0],
            }),
            2 => {
                let n = 16usize << level;
                let w = 2.0 * PI / n as f64;
                let points = (0..n)
                    .map(|j| {
                        let phi = 2.0 * PI * j as f64 / n as f64;
                        [phi.cos(), phi.sin(), 0.0]
                    })
                    .collect();
                Ok(Self {
                    dim,
                    points,
                    weights: vec![w; n],
                })
            }
            3 => {
                let nz = 8usize << level;
                let nphi = 2 * nz;
                let (zs, wz) = gauss_legendre(nz);
                let wphi = 2.0 * PI / nphi as f64;
                let mut points = Vec::with_capacity(nz * nphi);
                let mut weights = Vec::with_capacity(nz * nphi);
                for (z, w) in zs.iter().zip(&wz) {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    for j in 0..nphi {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
                        points.push([s * phi.cos(), s * phi.sin(), *z]);
                        weights.push(w * wphi);
                    }
                }
                Ok(Self { dim, points, weights })
            }
            _ => Err(invalid(format!(
                "dimension {dim} unsupported (sphere rules exist for d = 1, 2, 3)"
            ))),
        }
    }

    fn apply<F: Fn(&[f64], &mut [f64])>(&self, components: usize, f: &F) -> (Vec<f64>, f64) {
        let mut acc = vec![0.0; components];
        let mut scale = 0.0;
        let mut buf = vec![0.0; components];
        for (p, w) in self.points.iter().zip(&self.weights) {
            f(&p[..self.dim], &mut buf);
            let mut sup: f64 = 0.0;
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a += w * v;
                sup = sup.max(v.abs());
            }
            scale += w * sup;
        }
        (acc, scale)
    }
}

/// Integrates a vector-valued function over S^{d-1}, refining until the
/// change between levels is below `SPHERE_TOLERANCE` relative to the
/// integral of the sup-norm of the integrand.
pub fn sphere_integral<F>(dim: usize, components: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let max_level = match dim {
        1 => 0,
        2 => 12,
        3 => 6,
        _ => return SphereRule::new(dim, 0).map(|_| Vec::new()),
    };
    let (mut prev, _) = SphereRule::new(dim, 0)?.apply(components, &f);
    if dim == 1 {
        return Ok(prev);
    }
    let mut change = f64::INFINITY;
    let mut nodes = 0;
    for level in 1..=max_level {
        let rule = SphereRule::new(dim, level)?;
        nodes = rule.points.len();
        let (next, scale) = rule.apply(components, &f);
        change = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let reference = scale.max(f64::MIN_POSITIVE);
        change /= reference;
        if change <= SPHERE_TOLERANCE {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature { nodes, change })
}

/// Deterministic, roughly uniform point set on S^{d-1} of at least `count`
/// points (equispaced on S¹, Fibonacci lattice on S²).
pub fn sphere_sweep(dim: usize, count: usize) -> Vec<[f64; 3]> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..count)
            .map(|j| {
                let phi = 2.0 * PI * (j as f64 + 0.5) / count as f64;
                [phi.cos(), phi.sin(), 0.0]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let s = (1.0 - z * z).sqrt();
                    let phi = golden * j as f64;
                    [s * phi.cos(), s * phi.sin(), z]
                })
                .collect()
        }
    }
}

/// Surface area of S^{d-1}.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}
