use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use delay_frost::experiment::{compare, emit_plots, report, run_scenario, ExperimentConfig, RunSummary};

/// Delay-robust distributed optimization experiments.
#[derive(Parser)]
#[command(name = "delay-frost", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write traces, summary and resolved config.
    Run {
        config: PathBuf,
        /// Output directory (defaults to <root>/<scenario name>; root from DFROST_OUTPUT_ROOT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render SVG figures.
        #[arg(long)]
        plot: bool,
    },
    /// Run two scenarios and compare their final estimates.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        /// Directory receiving one subdirectory per run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail unless the final consensus values agree to this tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Print the summary of a finished run.
    Report { dir: PathBuf },
    /// Render SVG figures from a finished run.
    Plot { dir: PathBuf },
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<(RunSummary, PathBuf)> {
    let cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let dir = out.unwrap_or_else(|| cfg.output_dir());
    let summary = run_scenario(&cfg, &dir).with_context(|| format!("running {}", cfg.name))?;
    Ok((summary, dir))
}

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, out, plot } => {
            let (summary, dir) = run(&config, out)?;
            print!("{}", report(&dir)?);
            if plot {
                for p in emit_plots(&dir)? {
                    println!("wrote {}", p.display());
                }
            }
            Ok(exit(summary.passed))
        }
        Command::Compare { config_a, config_b, out, tolerance } => {
            let (a, b) = match &out {
                Some(root) => (run(&config_a, Some(root.join("a")))?, run(&config_b, Some(root.join("b")))?),
                None => (run(&config_a, None)?, run(&config_b, None)?),
            };
            if a.1 == b.1 {
                anyhow::bail!("both scenarios write to {}; pass --out or rename one", a.1.display());
            }
            let c = compare(&a.0, &b.0)?;
            println!("{}: {:?} ({})", c.a, a.0.consensus_value, if a.0.passed { "checks passed" } else { "checks failed" });
            println!("{}: {:?} ({})", c.b, b.0.consensus_value, if b.0.passed { "checks passed" } else { "checks failed" });
            println!("consensus gap {:.3e}, largest agent gap {:.3e}", c.consensus_gap, c.agent_gap);
            let within = tolerance.is_none_or(|t| c.consensus_gap <= t);
            if let Some(t) = tolerance {
                println!("[{}] consensus gap within {t:.1e}", if within { "PASS" } else { "FAIL" });
            }
            Ok(exit(a.0.passed && b.0.passed && within))
        }
        Command::Report { dir } => {
            let text = report(&dir)?;
            print!("{text}");
            Ok(exit(delay_frost::experiment::load_summary(&dir)?.passed))
        }
        Command::Plot { dir } => {
            for p in emit_plots(&dir)? {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
