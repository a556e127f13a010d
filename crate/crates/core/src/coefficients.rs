//! Drift/diffusion pairs `(b, G)` with declared regularity constants, and an
//! empirical validator for those constants.
//!
//! Norms: vectors use the Euclidean norm and matrices the Frobenius norm.
//! Every built-in family acts componentwise, so its constants follow from
//! the scalar profiles.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rng::{stream_rng, Stream};
use crate::MAX_DIM;

type VecField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Family {
    HolderDrift { beta: f64, offset: f64 },
    Lipschitz,
    Degenerate,
    Constant { drift: f64, diffusion: f64 },
    Custom { drift: VecField, diffusion: VecField },
}

/// Declared bounds. `holder_constant` is `[b]_β` for the declared β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityBounds {
    pub drift_sup: f64,
    pub holder_constant: f64,
    pub diffusion_sup: f64,
    pub diffusion_lipschitz: f64,
}

/// SDE coefficients: `b: R^d → R^d`, `G: R^d → R^{d×d}` (row-major).
#[derive(Clone)]
pub struct SdeCoefficients {
    name: String,
    dim: usize,
    family: Family,
    beta: f64,
    bounds: RegularityBounds,
    nondegenerate: Option<f64>,
    x0: Vec<f64>,
}

impl fmt::Debug for SdeCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeCoefficients")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("bounds", &self.bounds)
            .field("nondegenerate", &self.nondegenerate)
            .field("x0", &self.x0)
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(invalid(format!("dimension {dim} not in 1..={MAX_DIM}")));
    }
    Ok(())
}

impl SdeCoefficients {
    /// `b_i(x) = clamp(sign(x_i - a)|x_i - a|^β, ±1)`, `G = I + 0.2 diag(tanh x_i)`.
    pub fn holder_drift(dim: usize, beta: f64, offset: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("Hölder exponent {beta} must lie in (0, 1]")));
        }
        let d = dim as f64;
        Ok(Self {
            name: format!("holder-drift:{beta}"),
            dim,
            family: Family::HolderDrift { beta, offset },
            beta,
            bounds: RegularityBounds {
                drift_sup: d.sqrt(),
                // |s(u) - s(v)| ≤ 2^{1-β}|u - v|^β per component, and
                // Σ h_i^{2β} ≤ d^{1-β} |h|^{2β}.
                holder_constant: 2f64.powf(1.0 - beta) * d.powf(0.5 * (1.0 - beta)),
                diffusion_sup: (d * 1.44).sqrt(),
                diffusion_lipschitz: 0.2,
            },
            nondegenerate: Some(0.8f64.powi(dim as i32)),
            x0: vec![0.0; dim],
        })
    }

    /// `b_i(x) = -sin x_i`, `G = I + 0.3 diag(cos x_i)`.
    pub fn lipschitz(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let d = dim as f64;
        Ok(Self {
            name: "lipschitz".into(),
            dim,
            family: Family::Lipschitz,
            beta: 1.0,
            bounds: RegularityBounds {
                drift_sup: d.sqrt(),
                holder_constant: 1.0,
                diffusion_sup: (d * 1.69).sqrt(),
                diffusion_lipschitz: 0.3,
            },
            nondegenerate: Some(0.7f64.powi(dim as i32)),
            x0: vec![0.0; dim],
        })
    }

    /// `b_i(x) = 0.5 cos x_i`, `G = diag(tanh x_i)`, singular at the origin.
    pub fn degenerate(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let d = dim as f64;
        Ok(Self {
            name: "degenerate".into(),
            dim,
            family: Family::Degenerate,
            beta: 1.0,
            bounds: RegularityBounds {
                drift_sup: 0.5 * d.sqrt(),
                holder_constant: 0.5,
                diffusion_sup: d.sqrt(),
                diffusion_lipschitz: 1.0,
            },
            nondegenerate: None,
            x0: vec![0.5; dim],
        })
    }

    /// `b ≡ drift · (1, …, 1)`, `G ≡ diffusion · I`.
    pub fn constant(dim: usize, drift: f64, diffusion: f64) -> Result<Self> {
        check_dim(dim)?;
        let d = dim as f64;
        Ok(Self {
            name: format!("constant:{drift}:{diffusion}"),
            dim,
            family: Family::Constant { drift, diffusion },
            beta: 1.0,
            bounds: RegularityBounds {
                drift_sup: drift.abs() * d.sqrt(),
                holder_constant: 0.0,
                diffusion_sup: diffusion.abs() * d.sqrt(),
                diffusion_lipschitz: 0.0,
            },
            nondegenerate: (diffusion != 0.0).then(|| diffusion.abs().powi(dim as i32)),
            x0: vec![0.0; dim],
        })
    }

    /// User coefficients with user-declared constants.
    pub fn custom<B, G>(
        dim: usize,
        drift: B,
        diffusion: G,
        beta: f64,
        bounds: RegularityBounds,
        nondegenerate: Option<f64>,
    ) -> Result<Self>
    where
        B: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(Self {
            name: "custom".into(),
            dim,
            family: Family::Custom {
                drift: Arc::new(drift),
                diffusion: Arc::new(diffusion),
            },
            beta,
            bounds,
            nondegenerate,
            x0: vec![0.0; dim],
        })
    }

    /// Registry: `holder-drift:<β>`, `holder-drift:<β>:<a>`, `lipschitz`,
    /// `degenerate`, `constant:<b0>:<G0>`.
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        let mut parts = name.split(':');
        let head = parts.next().unwrap_or_default();
        let params: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad coefficient parameter '{p}' in '{name}'")))
            })
            .collect::<Result<_>>()?;
        match (head, params.as_slice()) {
            ("holder-drift", [beta]) => Self::holder_drift(dim, *beta, 0.0),
            ("holder-drift", [beta, offset]) => {
                let mut c = Self::holder_drift(dim, *beta, *offset)?;
                c.name = name.to_string();
                Ok(c)
            }
            ("lipschitz", []) => Self::lipschitz(dim),
            ("degenerate", []) => Self::degenerate(dim),
            ("constant", [b0, g0]) => Self::constant(dim, *b0, *g0),
            _ => Err(invalid(format!("unknown coefficient family '{name}'"))),
        }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim || x0.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "x0 must be {} finite numbers, got {x0:?}",
                self.dim
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn with_bounds(mut self, bounds: RegularityBounds) -> Self {
        self.bounds = bounds;
        self
    }

    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            Family::HolderDrift { beta, offset } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    let u = xi - offset;
                    *o = (u.signum() * u.abs().powf(*beta)).clamp(-1.0, 1.0);
                }
            }
            Family::Lipschitz => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -xi.sin();
                }
            }
            Family::Degenerate => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = 0.5 * xi.cos();
                }
            }
            Family::Constant { drift, .. } => out.fill(*drift),
            Family::Custom { drift, .. } => drift(x, out),
        }
    }

    #[inline]
    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let diag = |out: &mut [f64], f: &dyn Fn(f64) -> f64| {
            out.fill(0.0);
            for i in 0..d {
                out[i * d + i] = f(x[i]);
            }
        };
        match &self.family {
            Family::HolderDrift { .. } => diag(out, &|v| 1.0 + 0.2 * v.tanh()),
            Family::Lipschitz => diag(out, &|v| 1.0 + 0.3 * v.cos()),
            Family::Degenerate => diag(out, &|v| v.tanh()),
            Family::Constant { diffusion, .. } => {
                let g = *diffusion;
                diag(out, &|_| g)
            }
            Family::Custom { diffusion, .. } => diffusion(x, out),
        }
    }

    /// `true` when `b` and `G` do not depend on the state.
    pub fn is_constant(&self) -> bool {
        matches!(self.family, Family::Constant { .. })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn bounds(&self) -> &RegularityBounds {
        &self.bounds
    }

    /// Declared lower bound on `|det G|`, if any.
    pub fn nondegenerate(&self) -> Option<f64> {
        self.nondegenerate
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// Lipschitz in both coefficients (β = 1).
    pub fn is_lipschitz(&self) -> bool {
        self.beta >= 1.0
    }
}

pub fn determinant(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => f64::NAN,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Empirical regularity of a coefficient pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub samples: usize,
    pub drift_sup: f64,
    pub holder_quotient_max: f64,
    pub diffusion_sup: f64,
    pub diffusion_lipschitz_max: f64,
    pub min_abs_det: f64,
    pub all_finite: bool,
    /// One message per declared constant found violated.
    pub violations: Vec<String>,
}

impl RegularityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Half-width of the box the validator samples states from.
pub const VALIDATION_BOX: f64 = 4.0;
const SLACK: f64 = 1e-6;

/// Samples `n_samples` states and as many pairs (separations log-uniform in
/// [1e-6, 2]) and checks the declared constants. Never mutates `coeffs`.
pub fn validate(coeffs: &SdeCoefficients, n_samples: usize, seed: u64) -> Result<RegularityReport> {
    if n_samples < 1000 {
        return Err(invalid(format!("n_samples = {n_samples} below 1000")));
    }
    let d = coeffs.dim;
    let mut rng = stream_rng(seed, 0, Stream::Probe);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let (mut gx, mut gy) = (vec![0.0; d * d], vec![0.0; d * d]);
    let mut rep = RegularityReport {
        samples: n_samples,
        drift_sup: 0.0,
        holder_quotient_max: 0.0,
        diffusion_sup: 0.0,
        diffusion_lipschitz_max: 0.0,
        min_abs_det: f64::INFINITY,
        all_finite: true,
        violations: Vec::new(),
    };
    for _ in 0..n_samples {
        for xi in x.iter_mut() {
            *xi = VALIDATION_BOX * (2.0 * rng.random::<f64>() - 1.0);
        }
        let sep = 10f64.powf(-6.0 + (2f64.log10() + 6.0) * rng.random::<f64>());
        let mut dir: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let dn = norm(&dir).max(1e-300);
        dir.iter_mut().for_each(|v| *v /= dn);
        for i in 0..d {
            y[i] = x[i] + sep * dir[i];
        }
        coeffs.drift_into(&x, &mut bx);
        coeffs.drift_into(&y, &mut by);
        coeffs.diffusion_into(&x, &mut gx);
        coeffs.diffusion_into(&y, &mut gy);
        if bx.iter().chain(&by).chain(&gx).chain(&gy).any(|v| !v.is_finite()) {
            rep.all_finite = false;
            continue;
        }
        let h = distance(&x, &y);
        if h == 0.0 {
            continue;
        }
        rep.drift_sup = rep.drift_sup.max(norm(&bx));
        rep.diffusion_sup = rep.diffusion_sup.max(norm(&gx));
        rep.holder_quotient_max = rep.holder_quotient_max.max(distance(&bx, &by) / h.powf(coeffs.beta));
        rep.diffusion_lipschitz_max = rep.diffusion_lipschitz_max.max(distance(&gx, &gy) / h);
        rep.min_abs_det = rep.min_abs_det.min(determinant(&gx, d).abs());
    }
    let b = coeffs.bounds;
    let mut check = |name: &str, seen: f64, declared: f64| {
        if seen > declared * (1.0 + SLACK) + 1e-300 && seen > 0.0 {
            rep.violations
                .push(format!("{name}: observed {seen:.6e} exceeds declared {declared:.6e}"));
        }
    };
    check("drift sup", rep.drift_sup, b.drift_sup);
    check("drift Hölder seminorm", rep.holder_quotient_max, b.holder_constant);
    check("diffusion sup", rep.diffusion_sup, b.diffusion_sup);
    check("diffusion Lipschitz constant", rep.diffusion_lipschitz_max, b.diffusion_lipschitz);
    if let Some(c0) = coeffs.nondegenerate {
        if rep.min_abs_det < c0 * (1.0 - SLACK) {
            rep.violations.push(format!(
                "|det G|: observed minimum {:.6e} below declared {c0:.6e}",
                rep.min_abs_det
            ));
        }
    }
    if !rep.all_finite {
        rep.violations.push("non-finite coefficient values".into());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry() {
        for name in ["holder-drift:0.4", "holder-drift:0.4:0.5", "lipschitz", "degenerate", "constant:0.5:2"] {
            let c = SdeCoefficients::builtin(name, 2).unwrap();
            assert_eq!(c.name(), name);
        }
        assert!(SdeCoefficients::builtin("nope", 1).is_err());
        assert!(SdeCoefficients::builtin("holder-drift:1.5", 1).is_err());
        assert!(SdeCoefficients::builtin("lipschitz", 4).is_err());
    }

    #[test]
    fn constant_family_is_constant() {
        let c = SdeCoefficients::constant(2, 0.5, 2.0).unwrap();
        let mut b = [0.0; 2];
        let mut g = [0.0; 4];
        for x in [[0.0, 0.0], [10.0, -3.0]] {
            c.drift_into(&x, &mut b);
            c.diffusion_into(&x, &mut g);
            assert_eq!(b, [0.5, 0.5]);
            assert_eq!(g, [2.0, 0.0, 0.0, 2.0]);
        }
        let rep = validate(&c, 1000, 1).unwrap();
        assert_eq!(rep.holder_quotient_max, 0.0);
        assert_eq!(rep.diffusion_lipschitz_max, 0.0);
        assert!(rep.ok());
    }

    #[test]
    fn identity_diffusion_has_unit_determinant() {
        let c = SdeCoefficients::constant(3, 0.0, 1.0).unwrap();
        let rep = validate(&c, 2000, 2).unwrap();
        assert_eq!(rep.min_abs_det, 1.0);
    }

    #[test]
    fn builtins_respect_declared_constants() {
        for d in 1..=3 {
            for name in ["holder-drift:0.4", "holder-drift:0.8", "lipschitz", "degenerate"] {
                let c = SdeCoefficients::builtin(name, d).unwrap();
                let rep = validate(&c, 10_000, 3).unwrap();
                assert!(rep.ok(), "{name} d={d}: {:?}", rep.violations);
                assert!(rep.all_finite);
            }
        }
    }

    #[test]
    fn lipschitz_determinant_bound() {
        let c = SdeCoefficients::lipschitz(1).unwrap();
        let rep = validate(&c, 10_000, 4).unwrap();
        assert!(rep.min_abs_det >= c.nondegenerate().unwrap());
    }

    #[test]
    fn holder_quotient_is_stable_under_more_samples() {
        let c = SdeCoefficients::builtin("holder-drift:0.4", 1).unwrap();
        let a = validate(&c, 10_000, 5).unwrap().holder_quotient_max;
        let b = validate(&c, 40_000, 6).unwrap().holder_quotient_max;
        assert!(a.is_finite() && b.is_finite());
        assert!((a / b - 1.0).abs() < 0.25, "{a} vs {b}");
        // supremum of the signed power's quotient is 2^{1-β}
        assert!(b <= 2f64.powf(0.6) * (1.0 + 1e-9));
    }

    #[test]
    fn halved_holder_constant_is_flagged() {
        let c = SdeCoefficients::builtin("holder-drift:0.4", 1).unwrap();
        let mut bounds = *c.bounds();
        bounds.holder_constant *= 0.5;
        let rep = validate(&c.with_bounds(bounds), 10_000, 7).unwrap();
        assert!(!rep.ok());
        assert!(rep.violations[0].contains("Hölder"));
    }

    #[test]
    fn degenerate_diffusion_vanishes_at_origin() {
        let c = SdeCoefficients::degenerate(2).unwrap();
        let mut g = [1.0; 4];
        c.diffusion_into(&[0.0, 0.0], &mut g);
        assert_eq!(determinant(&g, 2), 0.0);
        assert!(c.nondegenerate().is_none());
    }

    #[test]
    fn validator_requires_enough_samples() {
        assert!(validate(&SdeCoefficients::lipschitz(1).unwrap(), 10, 0).is_err());
    }
}
