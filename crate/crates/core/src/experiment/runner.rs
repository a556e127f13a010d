//! Runs a validated plan and renders its artifacts.
//!
//! `report.csv` and `summary.json` depend only on the config text and the
//! seed, never on the worker count or the clock. `manifest.json` adds the
//! version, worker count and wall time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::error_stats::{
    strong_errors, weak_error, grid_increment_scaling, moment_scaling_driver, BiasReport, ErrorReport, Kind,
    RateFit, Reference, RunParams, Verdict, WeakReport,
};
use crate::exec::Executor;
use crate::experiment::config::{Ladder, Plan, ReferenceChoice};

pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const CSV_HEADER: &str =
    "config_hash,kind,series,p,x,log2_x,estimate,log2_estimate,fit_log2,spread,paths,aborted,bound";

/// Version string recorded in manifests: crate version and `git describe`.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("LEVY_EULER_GIT_DESCRIBE"), ")");

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Recursively sorts object keys, whatever map type serde_json was built with.
pub fn sorted(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect::<Map<_, _>>())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sorted).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn render_json(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&sorted(v)).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

fn fit_json(series: &str, p: Option<f64>, fit: &RateFit) -> Value {
    json!({
        "series": series,
        "p": p,
        "slope": fit.slope,
        "slope_se": fit.slope_se,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "predicted_exponent": fit.predicted_exponent,
        "tolerance": fit.tolerance,
        "check": fit.check,
        "verdict": fit.verdict,
        "points": fit.points,
    })
}

/// Result of running a plan, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub report_csv: String,
    pub summary: Value,
}

impl Outcome {
    pub fn summary_json(&self) -> String {
        render_json(self.summary.clone())
    }
}

struct Series<'a> {
    name: String,
    report: &'a ErrorReport,
    fit: Option<&'a RateFit>,
}

fn push_rows(csv: &mut String, hash: &str, kind: &str, s: &Series) {
    let r = s.report;
    for (j, &x) in r.ladder.iter().enumerate() {
        let est = r.estimates[j];
        let fit_log2 = s
            .fit
            .filter(|f| f.verdict != Verdict::Exact)
            .map(|f| num(f.line(x.log2())))
            .unwrap_or_default();
        csv.push_str(&format!(
            "{hash},{kind},{},{},{},{},{},{},{},{},{},{},\n",
            s.name,
            r.p,
            x,
            x.log2(),
            num(est),
            num(est.log2()),
            fit_log2,
            num(r.spreads[j]),
            r.paths,
            r.aborted,
        ));
    }
}

fn push_weak_rows(csv: &mut String, hash: &str, w: &WeakReport) {
    for (j, &x) in w.ladder.iter().enumerate() {
        csv.push_str(&format!(
            "{hash},weak,weak,,{},{},{},{},,{},{},{},{}\n",
            x,
            x.log2(),
            num(w.weak[j]),
            num(w.weak[j].log2()),
            num(w.paired_se[j]),
            w.paths,
            w.aborted,
            num(w.bound[j]),
        ));
    }
}

/// Runs the experiment described by `plan`. `source` is the config text the
/// plan came from; its hash labels every artifact.
pub fn execute(plan: &Plan, source: &str, executor: Executor) -> Result<Outcome> {
    let cfg = &plan.config;
    let e = &cfg.experiment;
    let hash = sha256_hex(source.as_bytes());
    let params = RunParams {
        paths: e.paths,
        master_seed: e.master_seed,
        batches: e.batches,
        executor,
    };
    let kind = cfg.claim.kind();
    let kind_name = match kind {
        Kind::Strong => "strong",
        Kind::Weak => "weak",
        Kind::DriverMoment => "driver-moment",
        Kind::GridIncrement => "grid-increment",
    };
    let tol = cfg.verdict.tolerance;
    let check = cfg.verdict.check.as_fit_check();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut summary = json!({
        "name": cfg.name,
        "claim": cfg.claim,
        "kind": kind_name,
        "config_hash": hash,
        "master_seed": e.master_seed,
        "paths": e.paths,
        "batches": e.batches,
        "predicted_exponents": plan.predicted,
    });
    let mut passed = true;
    let mut all_exact = true;
    let mut aborted = 0usize;

    match kind {
        Kind::Weak => {
            let coeffs = plan.coeffs.as_ref().expect("validated");
            let phi = plan.phi.as_ref().expect("validated");
            let Ladder::N(ladder) = &plan.ladder else { unreachable!("validated") };
            let w = weak_error(coeffs, &plan.spec, ladder, phi, &params)?;
            push_weak_rows(&mut csv, &hash, &w);
            let dominated = w.dominated();
            let ok = dominated.iter().all(|d| *d);
            passed &= ok;
            all_exact = false;
            aborted = w.aborted;
            summary["weak"] = json!({
                "phi": w.phi,
                "beta_phi": w.beta_phi,
                "seminorm": w.seminorm,
                "spearman": w.spearman,
                "dominated": dominated,
                "passed": ok,
            });
            summary["fits"] = json!([]);
        }
        _ => {
            let check = check.expect("validated");
            let mut reports: Vec<(String, ErrorReport)> = Vec::new();
            let mut bias: Vec<BiasReport> = Vec::new();
            match (kind, &plan.ladder) {
                (Kind::Strong, Ladder::N(ladder)) => {
                    let coeffs = plan.coeffs.as_ref().expect("validated");
                    let refs = e.reference.references();
                    for r in strong_errors(coeffs, &plan.spec, ladder, &e.p, &refs, &params)? {
                        reports.push((r.reference.expect("strong").as_str().to_string(), r));
                    }
                    if e.epsilon_bias {
                        let mut halved = plan.spec.clone();
                        halved.epsilon_cut *= 0.5;
                        halved.validate()?;
                        let hs = strong_errors(coeffs, &halved, ladder, &e.p, &[Reference::FineEuler], &params)?;
                        for h in hs {
                            let base = reports
                                .iter()
                                .find(|(s, r)| s == "fine-euler" && r.p == h.p)
                                .map(|(_, r)| r.clone())
                                .expect("fine-euler report for every p");
                            bias.push(BiasReport {
                                epsilon: plan.spec.epsilon_cut,
                                base,
                                halved: h,
                            });
                        }
                    }
                }
                (Kind::GridIncrement, Ladder::N(ladder)) => {
                    let coeffs = plan.coeffs.as_ref().expect("validated");
                    for &p in &e.p {
                        let r = grid_increment_scaling(coeffs, &plan.spec, p, ladder, &params)?;
                        reports.push(("grid-increment".into(), r));
                    }
                }
                (Kind::DriverMoment, Ladder::T(ts)) => {
                    for &p in &e.p {
                        reports.push(("driver".into(), moment_scaling_driver(&plan.spec, p, ts, &params)?));
                    }
                }
                _ => unreachable!("ladder variable is validated against the claim"),
            }
            let mut fits = Vec::new();
            let mut fit_of: Vec<(String, f64, RateFit)> = Vec::new();
            for (series, r) in &reports {
                let k = e.p.iter().position(|p| *p == r.p).expect("p from config");
                let fit = r.fit(plan.predicted[k], check, tol)?;
                passed &= fit.verdict.passed();
                all_exact &= fit.verdict == Verdict::Exact;
                aborted = aborted.max(r.aborted);
                fits.push(fit_json(series, Some(r.p), &fit));
                fit_of.push((series.clone(), r.p, fit));
            }
            for ((series, r), (_, _, fit)) in reports.iter().zip(&fit_of) {
                push_rows(
                    &mut csv,
                    &hash,
                    kind_name,
                    &Series {
                        name: series.clone(),
                        report: r,
                        fit: Some(fit),
                    },
                );
            }
            summary["fits"] = Value::Array(fits);

            if e.reference == ReferenceChoice::Both {
                let limit = cfg.verdict.agreement;
                let mut rows = Vec::new();
                for &p in &e.p {
                    let slope = |name: &str| {
                        fit_of
                            .iter()
                            .find(|(s, q, _)| s == name && *q == p)
                            .map(|(_, _, f)| f.slope)
                            .expect("both references fitted")
                    };
                    let diff = (slope("fine-euler") - slope("finite-activity-oracle")).abs();
                    let ok = limit.is_none_or(|a| diff <= a);
                    passed &= ok;
                    rows.push(json!({ "p": p, "slope_difference": diff, "passed": ok }));
                }
                summary["agreement"] = json!({ "tolerance": limit, "per_p": rows });
            }

            if !bias.is_empty() {
                let mut rows = Vec::new();
                for b in &bias {
                    let ok = b.subdominant();
                    passed &= ok;
                    push_rows(
                        &mut csv,
                        &hash,
                        kind_name,
                        &Series {
                            name: "fine-euler-half-epsilon".into(),
                            report: &b.halved,
                            fit: None,
                        },
                    );
                    rows.push(json!({
                        "p": b.base.p,
                        "shifts": b.shifts(),
                        "spreads": b.base.spreads,
                        "subdominant": ok,
                    }));
                    aborted = aborted.max(b.halved.aborted);
                }
                summary["epsilon_bias"] = json!({
                    "epsilon": plan.spec.epsilon_cut,
                    "halved_epsilon": 0.5 * plan.spec.epsilon_cut,
                    "per_p": rows,
                });
            }
        }
    }

    let abort_fraction = aborted as f64 / e.paths as f64;
    let abort_ok = abort_fraction <= crate::error_stats::MAX_ABORT_FRACTION;
    passed &= abort_ok;
    summary["aborted"] = json!(aborted);
    summary["abort_fraction"] = json!(abort_fraction);
    summary["abort_ok"] = json!(abort_ok);
    summary["passed"] = json!(passed);
    summary["verdict"] = json!(if !passed {
        "fail"
    } else if all_exact {
        "exact"
    } else {
        "pass"
    });
    Ok(Outcome {
        passed,
        report_csv: csv,
        summary: sorted(summary),
    })
}

/// Manifest for an outcome.
pub fn manifest(plan: &Plan, source: &str, outcome: &Outcome, workers: usize, wall_seconds: f64) -> Value {
    sorted(json!({
        "config": serde_json::to_value(&plan.config).expect("config serializes"),
        "config_source": source,
        "config_hash": sha256_hex(source.as_bytes()),
        "version": VERSION,
        "master_seed": plan.config.experiment.master_seed,
        "workers": workers,
        "wall_time_seconds": wall_seconds,
        "files": {
            REPORT_FILE: sha256_hex(outcome.report_csv.as_bytes()),
            SUMMARY_FILE: sha256_hex(outcome.summary_json().as_bytes()),
        },
    }))
}

/// What [`run`] wrote.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub outcome: Outcome,
    pub out_dir: PathBuf,
    pub wall_seconds: f64,
}

/// Executes the plan and writes the three artifacts into `out_dir`.
pub fn run(plan: &Plan, source: &str, executor: Executor, out_dir: &Path) -> Result<RunRecord> {
    let start = Instant::now();
    let outcome = execute(plan, source, executor)?;
    let wall = start.elapsed().as_secs_f64();
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(REPORT_FILE), &outcome.report_csv)?;
    fs::write(out_dir.join(SUMMARY_FILE), outcome.summary_json())?;
    let m = manifest(plan, source, &outcome, executor.workers(), wall);
    fs::write(out_dir.join(MANIFEST_FILE), render_json(m))?;
    Ok(RunRecord {
        outcome,
        out_dir: out_dir.to_path_buf(),
        wall_seconds: wall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONSTANT: &str = r#"name = "const"
claim = "strong-lipschitz"

[driver]
alpha = 1.5
truncated = false
epsilon = 0.05
base_log2 = 9

[coefficients]
name = "constant:0.5:1"

[experiment]
p = [1.0]
n_ladder = [4, 8, 16, 32, 64]
paths = 64
master_seed = 1

[verdict]
check = "upper-bound"
tolerance = 0.1
"#;

    #[test]
    fn constant_run_is_exact() {
        let plan = Plan::from_source(CONSTANT, "c").unwrap();
        let out = execute(&plan, CONSTANT, Executor::Sequential).unwrap();
        assert!(out.passed);
        assert_eq!(out.summary["verdict"], "exact");
        let lines: Vec<&str> = out.report_csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 6);
        for l in &lines[1..] {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 13);
            assert!(cols[6].parse::<f64>().unwrap() <= 1e-12);
            assert_eq!(cols[8], "");
        }
        assert!(!out.report_csv.contains('\r'));
    }

    #[test]
    fn summary_keys_are_sorted() {
        let plan = Plan::from_source(CONSTANT, "c").unwrap();
        let out = execute(&plan, CONSTANT, Executor::Sequential).unwrap();
        let text = out.summary_json();
        let keys: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut s = keys.clone();
        s.sort();
        assert_eq!(keys, s);
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.25), "2.5e-1");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(1.0), "1e0");
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
