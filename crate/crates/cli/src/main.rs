use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_euler::exec::Executor;
use levy_euler::experiment::{preset, presets, run, Plan};
use levy_euler::path_driver::build_skeleton;

/// Coupled-grid Euler convergence experiments for stable-like Lévy SDEs.
#[derive(Parser)]
#[command(name = "levy-euler", version = levy_euler::experiment::runner::VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write report.csv, summary.json and manifest.json.
    Run {
        /// Config file, or the name of a shipped preset.
        config: String,
        /// Worker threads; 0 uses every available core.
        #[arg(long, env = "LEVY_EULER_WORKERS", default_value_t = 0)]
        workers: usize,
        /// Output directory; defaults to the config's `output.dir`.
        #[arg(long, env = "LEVY_EULER_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// List shipped presets, or print one.
    Presets {
        name: Option<String>,
    },
    /// Parse and validate a config without running it.
    Validate { config: String },
    /// Print one path's jump skeleton as JSON.
    DumpSkeleton { config: String, path_index: u64 },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Config text and a label for diagnostics.
fn load(config: &str) -> Result<(String, String), String> {
    let path = Path::new(config);
    if path.exists() {
        return std::fs::read_to_string(path)
            .map(|t| (t, config.to_string()))
            .map_err(|e| format!("{config}: {e}"));
    }
    match preset(config) {
        Some(p) => Ok((p.text.to_string(), p.file_name.to_string())),
        None => Err(format!("{config}: no such file or preset")),
    }
}

fn plan(config: &str) -> Result<(Plan, String), String> {
    let (text, origin) = load(config)?;
    let plan = Plan::from_source(&text, &origin).map_err(|d| d.to_string())?;
    Ok((plan, text))
}

fn fmt_exponents(v: &[f64]) -> String {
    v.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(", ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets { name: None } => {
            for p in presets() {
                match p.plan() {
                    Ok(plan) => println!(
                        "{:<34} {:<28} predicted [{}]  {}",
                        p.name,
                        plan.config.claim.as_str(),
                        fmt_exponents(&plan.predicted),
                        plan.config.description.as_deref().unwrap_or("")
                    ),
                    Err(d) => println!("{:<34} invalid: {d}", p.name),
                }
            }
            ExitCode::SUCCESS
        }
        Command::Presets { name: Some(name) } => match preset(&name) {
            Some(p) => {
                print!("{}", p.text);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("no preset named {name}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Validate { config } => match plan(&config) {
            Ok((plan, _)) => {
                println!(
                    "{}: ok ({}, predicted [{}])",
                    plan.config.name,
                    plan.config.claim.as_str(),
                    fmt_exponents(&plan.predicted)
                );
                ExitCode::SUCCESS
            }
            Err(msg) => {
                eprintln!("{msg}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::DumpSkeleton { config, path_index } => {
            let (plan, _) = match plan(&config) {
                Ok(p) => p,
                Err(msg) => {
                    eprintln!("{msg}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match build_skeleton(plan.config.experiment.master_seed, path_index, &plan.spec) {
                Ok(sk) => {
                    println!("{}", serde_json::to_string_pretty(&sk.to_json()).expect("JSON"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAIL)
                }
            }
        }
        Command::Run { config, workers, out } => {
            let (plan, text) = match plan(&config) {
                Ok(p) => p,
                Err(msg) => {
                    eprintln!("{msg}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(plan.config.output_dir()));
            let record = match run(&plan, &text, Executor::with_workers(workers), &dir) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAIL);
                }
            };
            let s = &record.outcome.summary;
            if let Some(fits) = s["fits"].as_array() {
                for f in fits {
                    println!(
                        "{} p={} slope={} predicted={} tolerance={} {}",
                        f["series"].as_str().unwrap_or(""),
                        f["p"],
                        f["slope"],
                        f["predicted_exponent"],
                        f["tolerance"],
                        f["verdict"].as_str().unwrap_or("")
                    );
                }
            }
            println!(
                "{}: {} in {:.1} s -> {}",
                plan.config.name,
                s["verdict"].as_str().unwrap_or("?"),
                record.wall_seconds,
                record.out_dir.display()
            );
            if record.outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
    }
}
