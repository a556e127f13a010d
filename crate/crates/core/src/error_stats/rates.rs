//! Predicted exponents for each convergence and scaling claim.
//!
//! Rates are stated for the quantity against its ladder variable: `n` for
//! strong, weak and grid-increment errors (negative exponents), `t` for
//! driver moments (positive exponents). Logarithmic factors are dropped.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The claim an experiment checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    /// Hölder drift, nondegenerate `G`, driver `L`: `n^{-pβ/α}`.
    StrongHolder,
    /// Hölder drift, nondegenerate `G`, driver `L⁰`: `n^{-pβ/α}` below
    /// `p = α/β`, `n^{-1}` from there on.
    StrongHolderTruncated,
    /// Lipschitz coefficients, driver `L`: `n^{-p/α}` (`n^{-p}` for α = 1).
    StrongLipschitz,
    /// Lipschitz coefficients, driver `L⁰`: as above for `p < α`, `n^{-1}`
    /// for `p ≥ α`.
    StrongLipschitzTruncated,
    /// Strong error measured against both the event-driven oracle and the
    /// fine-grid reference; predicted as for `StrongLipschitz`.
    OracleAgreement,
    /// `|Eφ(X) - Eφ(X^n)|` for β-Hölder φ: `n^{-β/α}` (`n^{-β}` for α = 1).
    Weak,
    /// `E|L_t|^p` or `E|L⁰_t|^p` against `t`.
    DriverMoment,
    /// `E|X^n_t - X^n_{π_n(t)}|^p` against `n`.
    GridIncrement,
}

/// What is being measured, which decides the experiment routine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Strong,
    Weak,
    DriverMoment,
    GridIncrement,
}

impl Claim {
    pub fn kind(self) -> Kind {
        match self {
            Claim::StrongHolder
            | Claim::StrongHolderTruncated
            | Claim::StrongLipschitz
            | Claim::StrongLipschitzTruncated
            | Claim::OracleAgreement => Kind::Strong,
            Claim::Weak => Kind::Weak,
            Claim::DriverMoment => Kind::DriverMoment,
            Claim::GridIncrement => Kind::GridIncrement,
        }
    }

    /// Whether the claim concerns the truncated driver, if it is specific.
    pub fn driver(self) -> Option<bool> {
        match self {
            Claim::StrongHolder | Claim::StrongLipschitz | Claim::OracleAgreement | Claim::Weak => {
                Some(false)
            }
            Claim::StrongHolderTruncated | Claim::StrongLipschitzTruncated => Some(true),
            Claim::DriverMoment | Claim::GridIncrement => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Claim::StrongHolder => "strong-holder",
            Claim::StrongHolderTruncated => "strong-holder-truncated",
            Claim::StrongLipschitz => "strong-lipschitz",
            Claim::StrongLipschitzTruncated => "strong-lipschitz-truncated",
            Claim::OracleAgreement => "oracle-agreement",
            Claim::Weak => "weak",
            Claim::DriverMoment => "driver-moment",
            Claim::GridIncrement => "grid-increment",
        }
    }
}

/// Parameters that select a case of a rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCase {
    pub alpha: f64,
    pub p: f64,
    /// Hölder exponent of the drift (Hölder claims) or of φ (weak claim).
    pub beta: f64,
    pub truncated: bool,
}

fn moment_exponent(alpha: f64, p: f64, truncated: bool) -> Result<f64> {
    if truncated {
        Ok(if p >= alpha {
            1.0
        } else if alpha > 1.0 {
            p / alpha
        } else {
            p
        })
    } else if p >= alpha {
        Err(invalid(format!(
            "E|L_t|^p is infinite for p = {p} ≥ α = {alpha} on the untruncated driver"
        )))
    } else if alpha > 1.0 {
        Ok(p / alpha)
    } else {
        Ok(p)
    }
}

/// Predicted exponent of the claim for the given case.
pub fn predicted_exponent(claim: Claim, case: RateCase) -> Result<f64> {
    let RateCase {
        alpha,
        p,
        beta,
        truncated,
    } = case;
    if !(p > 0.0) {
        return Err(invalid(format!("moment order p = {p} must be positive")));
    }
    if let Some(t) = claim.driver() {
        if t != truncated {
            let which = if t { "truncated" } else { "untruncated" };
            return Err(invalid(format!("claim {} concerns the {which} driver", claim.as_str())));
        }
    }
    if !truncated && p >= alpha && claim.kind() != Kind::Weak {
        return Err(invalid(format!(
            "p = {p} ≥ α = {alpha}: only moments p < α exist for the untruncated driver"
        )));
    }
    let lipschitz = |p: f64| if alpha > 1.0 { -p / alpha } else { -p };
    Ok(match claim {
        Claim::StrongHolder => -p * beta / alpha,
        Claim::StrongHolderTruncated => {
            if p < alpha / beta {
                -p * beta / alpha
            } else {
                -1.0
            }
        }
        Claim::StrongLipschitz | Claim::OracleAgreement => lipschitz(p),
        Claim::StrongLipschitzTruncated => {
            if p < alpha {
                lipschitz(p)
            } else {
                -1.0
            }
        }
        Claim::Weak => lipschitz(beta),
        Claim::DriverMoment => moment_exponent(alpha, p, truncated)?,
        Claim::GridIncrement => -moment_exponent(alpha, p, truncated)?,
    })
}
