//! Experiment config files.
//!
//! A config is a TOML document with a fixed schema (unknown keys are
//! rejected). [`parse`] checks syntax and schema; [`Plan::from_source`]
//! additionally builds the driver and coefficients and checks every
//! cross-field rule. Diagnostics carry the 1-based line of the offending key
//! whenever the source text is available.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coefficients::SdeCoefficients;
use crate::error_stats::fit::{Check, MIN_FIT_POINTS};
use crate::error_stats::{predicted_exponent, Claim, Kind, RateCase, Reference, TestFunction, DEFAULT_BATCHES};
use crate::levy_measure::{AngularDensity, StableIndex};
use crate::path_driver::{DriverSpec, SmallJumpMode};

/// Headroom between the finest ladder resolution and the base grid for
/// strong and weak errors.
pub const STRONG_HEADROOM: u32 = 3;

/// A config error, optionally anchored to a line of the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.origin, l, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub claim: Claim,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub driver: DriverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientSection>,
    pub experiment: ExperimentSection,
    pub verdict: VerdictSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<WeakSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverSection {
    pub alpha: f64,
    #[serde(default = "default_density")]
    pub density: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub truncated: bool,
    #[serde(default = "default_mode")]
    pub small_jump_mode: SmallJumpMode,
    pub epsilon: f64,
    pub base_log2: u32,
    #[serde(default)]
    pub exact_marginals: bool,
}

fn default_density() -> String {
    "isotropic".into()
}

fn default_dimension() -> usize {
    1
}

fn default_mode() -> SmallJumpMode {
    SmallJumpMode::GaussianSurrogate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

/// Which references a strong experiment compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceChoice {
    FineEuler,
    FiniteActivityOracle,
    Both,
}

impl ReferenceChoice {
    pub fn references(self) -> Vec<Reference> {
        match self {
            ReferenceChoice::FineEuler => vec![Reference::FineEuler],
            ReferenceChoice::FiniteActivityOracle => vec![Reference::FiniteActivityOracle],
            ReferenceChoice::Both => vec![Reference::FineEuler, Reference::FiniteActivityOracle],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ladder: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ladder: Option<Vec<f64>>,
    pub paths: usize,
    pub master_seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_reference")]
    pub reference: ReferenceChoice,
    /// Also rerun with ε halved and require every estimate to move by less
    /// than its batch spread.
    #[serde(default)]
    pub epsilon_bias: bool,
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

fn default_reference() -> ReferenceChoice {
    ReferenceChoice::FineEuler
}

/// Verdict rule of a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    UpperBound,
    Band,
    /// Weak error below the coupled strong bound at every ladder point.
    Domination,
}

impl CheckKind {
    pub fn as_fit_check(self) -> Option<Check> {
        match self {
            CheckKind::UpperBound => Some(Check::UpperBound),
            CheckKind::Band => Some(Check::Band),
            CheckKind::Domination => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictSection {
    pub check: CheckKind,
    #[serde(default)]
    pub tolerance: f64,
    /// Replaces the tabulated exponent (single `p` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
    /// Largest allowed slope difference between the two references.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakSection {
    pub phi: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl ExperimentConfig {
    /// Canonical TOML rendering; parses back to an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// `output.dir`, or `out/<name>`.
    pub fn output_dir(&self) -> String {
        match &self.output {
            Some(o) => o.dir.clone(),
            None => format!("out/{}", self.name),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (top level for `None`). Falls back to
/// the section header, then to `None`.
pub fn key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_start_matches('[').split(']').next().unwrap_or("").trim();
            current = Some(name.to_string());
            if Some(name) == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    header
}

/// Syntax and schema check.
pub fn parse(text: &str, origin: &str) -> Result<ExperimentConfig, Diagnostic> {
    toml::from_str::<ExperimentConfig>(text).map_err(|e| Diagnostic {
        origin: origin.to_string(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })
}

/// Ladder of an experiment, in its own variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Ladder {
    N(Vec<usize>),
    T(Vec<f64>),
}

impl Ladder {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Ladder::N(v) => v.iter().map(|&n| n as f64).collect(),
            Ladder::T(v) => v.clone(),
        }
    }
}

/// A validated config with everything needed to run it.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub spec: DriverSpec,
    pub coeffs: Option<SdeCoefficients>,
    pub phi: Option<TestFunction>,
    pub ladder: Ladder,
    /// Predicted exponent per moment order (one entry for weak claims).
    pub predicted: Vec<f64>,
}

struct Ctx<'a> {
    text: Option<&'a str>,
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: Option<&str>, key: &str, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            origin: self.origin.to_string(),
            line: self.text.and_then(|t| key_line(t, section, key)),
            message: message.into(),
        }
    }
}

impl Plan {
    /// Parses and validates config text.
    pub fn from_source(text: &str, origin: &str) -> Result<Plan, Diagnostic> {
        let config = parse(text, origin)?;
        Self::build(config, Some(text), origin)
    }

    /// Validates an already parsed config; diagnostics carry no lines.
    pub fn from_config(config: ExperimentConfig) -> Result<Plan, Diagnostic> {
        Self::build(config, None, "config")
    }

    fn build(config: ExperimentConfig, text: Option<&str>, origin: &str) -> Result<Plan, Diagnostic> {
        let cx = Ctx { text, origin };
        let drv = Some("driver");
        let exp = Some("experiment");
        let c = &config;
        if c.name.trim().is_empty() || c.name.contains(['/', '\\']) {
            return Err(cx.err(None, "name", "name must be non-empty and contain no path separators"));
        }
        let kind = c.claim.kind();

        let d = &c.driver;
        let index = StableIndex::new(d.alpha, d.truncated).map_err(|e| cx.err(drv, "alpha", e.to_string()))?;
        let density =
            AngularDensity::from_name(&d.density, d.dimension).map_err(|e| cx.err(drv, "density", e.to_string()))?;
        index
            .check_density(&density)
            .map_err(|e| cx.err(drv, "density", e.to_string()))?;
        let spec = DriverSpec::new(index, density, d.epsilon, d.small_jump_mode, d.base_log2)
            .and_then(|s| s.with_exact_marginals(d.exact_marginals))
            .map_err(|e| {
                let key = if d.exact_marginals { "exact_marginals" } else { "epsilon" };
                cx.err(drv, if e.to_string().contains("base_log2") { "base_log2" } else { key }, e.to_string())
            })?;
        if let Some(t) = c.claim.driver() {
            if t != d.truncated {
                let want = if t { "true" } else { "false" };
                return Err(cx.err(
                    drv,
                    "truncated",
                    format!("claim {} needs truncated = {want}", c.claim.as_str()),
                ));
            }
        }

        let coeffs = match (&c.coefficients, kind) {
            (None, Kind::DriverMoment) => None,
            (Some(_), Kind::DriverMoment) => {
                return Err(cx.err(Some("coefficients"), "name", "driver-moment experiments take no coefficients"))
            }
            (None, _) => return Err(cx.err(None, "claim", "a [coefficients] section is required")),
            (Some(cs), _) => {
                let sec = Some("coefficients");
                let mut co = SdeCoefficients::builtin(&cs.name, d.dimension)
                    .map_err(|e| cx.err(sec, "name", e.to_string()))?;
                if let Some(x0) = &cs.x0 {
                    co = co.with_x0(x0.clone()).map_err(|e| cx.err(sec, "x0", e.to_string()))?;
                }
                match c.claim {
                    Claim::StrongLipschitz
                    | Claim::StrongLipschitzTruncated
                    | Claim::OracleAgreement
                    | Claim::Weak
                        if !co.is_lipschitz() =>
                    {
                        return Err(cx.err(
                            sec,
                            "name",
                            format!("claim {} needs Lipschitz coefficients", c.claim.as_str()),
                        ))
                    }
                    Claim::StrongHolder | Claim::StrongHolderTruncated => {
                        if co.nondegenerate().is_none() {
                            return Err(cx.err(sec, "name", "Hölder claims need a nondegenerate diffusion"));
                        }
                        if co.beta() <= 1.0 - d.alpha / 2.0 {
                            return Err(cx.err(
                                sec,
                                "name",
                                format!(
                                    "Hölder exponent {} must exceed 1 - alpha/2 = {}",
                                    co.beta(),
                                    1.0 - d.alpha / 2.0
                                ),
                            ));
                        }
                    }
                    _ => {}
                }
                Some(co)
            }
        };

        let e = &c.experiment;
        if e.batches == 0 || e.paths < e.batches {
            return Err(cx.err(exp, "paths", format!("{} paths cannot fill {} batches", e.paths, e.batches)));
        }
        let ladder = match (kind, &e.n_ladder, &e.t_ladder) {
            (Kind::DriverMoment, None, Some(ts)) => {
                for &t in ts {
                    let k = -t.log2();
                    if !(t > 0.0 && t <= 1.0) || k.fract() != 0.0 || k > d.base_log2 as f64 {
                        return Err(cx.err(
                            exp,
                            "t_ladder",
                            format!("t = {t} is not a dyadic time in [2^-{}, 1]", d.base_log2),
                        ));
                    }
                }
                Ladder::T(ts.clone())
            }
            (Kind::DriverMoment, _, _) => {
                return Err(cx.err(exp, "t_ladder", "driver-moment experiments need t_ladder and no n_ladder"))
            }
            (_, Some(ns), None) => {
                let headroom = if kind == Kind::GridIncrement { 1 } else { STRONG_HEADROOM };
                let max = 1u64 << (d.base_log2 - headroom);
                for &n in ns {
                    if n == 0 || !n.is_power_of_two() {
                        return Err(cx.err(exp, "n_ladder", format!("n = {n} is not a power of two")));
                    }
                    if n > max {
                        return Err(cx.err(
                            exp,
                            "n_ladder",
                            format!("n = {n} exceeds 2^(base_log2 - {headroom}) = {max}"),
                        ));
                    }
                }
                Ladder::N(ns.iter().map(|&n| n as usize).collect())
            }
            _ => return Err(cx.err(exp, "n_ladder", "this claim needs n_ladder and no t_ladder")),
        };
        let points = ladder.values();
        if points.len() < MIN_FIT_POINTS {
            return Err(cx.err(
                exp,
                if matches!(ladder, Ladder::T(_)) { "t_ladder" } else { "n_ladder" },
                format!("a ladder needs at least {MIN_FIT_POINTS} points"),
            ));
        }
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(cx.err(exp, "n_ladder", "ladder values must be distinct"));
        }

        let phi = match (kind, &c.weak) {
            (Kind::Weak, Some(w)) => {
                Some(TestFunction::parse(&w.phi).map_err(|err| cx.err(Some("weak"), "phi", err.to_string()))?)
            }
            (Kind::Weak, None) => return Err(cx.err(None, "claim", "weak claims need a [weak] section")),
            (_, Some(_)) => return Err(cx.err(Some("weak"), "phi", "[weak] only applies to the weak claim")),
            (_, None) => None,
        };

        if kind == Kind::Weak {
            if !e.p.is_empty() {
                return Err(cx.err(exp, "p", "weak experiments take no moment orders"));
            }
        } else {
            if e.p.is_empty() {
                return Err(cx.err(exp, "p", "at least one moment order p is required"));
            }
            for &p in &e.p {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(cx.err(exp, "p", format!("moment order p = {p} must be positive")));
                }
                if !d.truncated && p >= d.alpha {
                    return Err(cx.err(
                        exp,
                        "p",
                        format!(
                            "p = {p} ≥ alpha = {}: only the moments p < alpha exist for the untruncated driver",
                            d.alpha
                        ),
                    ));
                }
            }
        }

        let reference = e.reference;
        if reference != ReferenceChoice::FineEuler {
            if kind != Kind::Strong {
                return Err(cx.err(exp, "reference", "only strong experiments take a reference"));
            }
            if d.small_jump_mode != SmallJumpMode::Drop || d.exact_marginals {
                return Err(cx.err(
                    exp,
                    "reference",
                    "the finite-activity oracle needs small_jump_mode = \"drop\" and no exact marginals",
                ));
            }
        }
        if e.epsilon_bias && (kind != Kind::Strong || d.exact_marginals) {
            return Err(cx.err(exp, "epsilon_bias", "the ε-bias check applies to strong experiments on a jump skeleton"));
        }

        let v = &c.verdict;
        let vs = Some("verdict");
        match (kind, v.check) {
            (Kind::Weak, CheckKind::Domination) => {}
            (Kind::Weak, _) => return Err(cx.err(vs, "check", "weak experiments use check = \"domination\"")),
            (_, CheckKind::Domination) => {
                return Err(cx.err(vs, "check", "domination only applies to weak experiments"))
            }
            _ => {}
        }
        if !(v.tolerance >= 0.0 && v.tolerance.is_finite()) {
            return Err(cx.err(vs, "tolerance", "tolerance must be finite and non-negative"));
        }
        if v.predicted.is_some() && e.p.len() > 1 {
            return Err(cx.err(vs, "predicted", "an explicit prediction needs a single moment order"));
        }
        match (v.agreement, reference) {
            (Some(a), ReferenceChoice::Both) if a >= 0.0 && a.is_finite() => {}
            (Some(_), ReferenceChoice::Both) => {
                return Err(cx.err(vs, "agreement", "agreement must be finite and non-negative"))
            }
            (Some(_), _) => return Err(cx.err(vs, "agreement", "agreement needs reference = \"both\"")),
            (None, _) => {}
        }

        let beta_of = || -> f64 {
            match (&phi, &coeffs) {
                (Some(f), _) => f.beta(),
                (None, Some(co)) => co.beta(),
                (None, None) => 1.0,
            }
        };
        let orders: Vec<f64> = if kind == Kind::Weak { vec![1.0] } else { e.p.clone() };
        let mut predicted = Vec::with_capacity(orders.len());
        for p in orders {
            let table = predicted_exponent(
                c.claim,
                RateCase {
                    alpha: d.alpha,
                    p,
                    beta: beta_of(),
                    truncated: d.truncated,
                },
            )
            .map_err(|err| cx.err(exp, "p", err.to_string()))?;
            predicted.push(v.predicted.unwrap_or(table));
        }

        Ok(Plan {
            config,
            spec,
            coeffs,
            phi,
            ladder,
            predicted,
        })
    }
}
