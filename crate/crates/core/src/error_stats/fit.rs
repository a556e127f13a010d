//! Least-squares rate fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Estimates at or below this value count as exact zeros.
pub const EXACT_THRESHOLD: f64 = 1e-12;

/// Minimum number of ladder points for a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// How a fitted slope is compared with the predicted exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `slope ≤ predicted + tolerance`: the error decays at least as fast.
    UpperBound,
    /// `|slope - predicted| ≤ tolerance`.
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// All estimates vanish; no fit was attempted.
    Exact,
}

impl Verdict {
    pub fn passed(self) -> bool {
        !matches!(self, Verdict::Fail)
    }
}

/// OLS fit of `log2 estimate` against `log2 x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub predicted_exponent: f64,
    pub tolerance: f64,
    pub check: Check,
    pub verdict: Verdict,
    pub points: usize,
}

impl RateFit {
    /// Fitted `log2 estimate` at `log2 x`.
    pub fn line(&self, log2_x: f64) -> f64 {
        self.intercept + self.slope * log2_x
    }
}

/// Fits a power law to `(x, estimate)` pairs. If every estimate is at most
/// [`EXACT_THRESHOLD`] the fit is skipped with verdict `Exact`.
pub fn fit_rate(points: &[(f64, f64)], predicted: f64, check: Check, tolerance: f64) -> Result<RateFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(invalid(format!(
            "a rate fit needs at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, _)| !(*x > 0.0)) {
        return Err(invalid("ladder abscissae must be positive"));
    }
    if points.iter().all(|(_, y)| *y <= EXACT_THRESHOLD) {
        return Ok(RateFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            slope_se: f64::NAN,
            r_squared: f64::NAN,
            predicted_exponent: predicted,
            tolerance,
            check,
            verdict: Verdict::Exact,
            points: points.len(),
        });
    }
    if let Some((x, y)) = points.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(invalid(format!(
            "estimate {y} at {x} is not positive; a log-log fit is undefined"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| x.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("ladder abscissae are all equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope_se = (ssr / (k - 2.0) / sxx).sqrt();
    // Flat data leaves only rounding in `sst`; call that a perfect fit.
    let r_squared = if sst <= 1e-24 { 1.0 } else { 1.0 - ssr / sst };
    let ok = match check {
        Check::UpperBound => slope <= predicted + tolerance,
        Check::Band => (slope - predicted).abs() <= tolerance,
    };
    Ok(RateFit {
        slope,
        intercept,
        slope_se,
        r_squared,
        predicted_exponent: predicted,
        tolerance,
        check,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        points: points.len(),
    })
}
