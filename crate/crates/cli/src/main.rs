//! `igo`: constants, verification suite, gated optimization runs and one-shot
//! correlations.
//!
//! Exit status: 0 when every check holds, 1 when any check is violated, 2 for
//! configuration, input or I/O errors.

mod config;
mod output;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use igo_surrogate::correlation::kendall_tau_b;
use igo_surrogate::experiment::{run_checks, verification_suite, ExperimentConfig};
use igo_surrogate::ranking::utilities;
use igo_surrogate::{correlation::pearson_weights, Verdict};

#[derive(Parser, Debug)]
#[command(
    name = "igo",
    version,
    about = "Gaussian IGO under correlation-gated surrogates"
)]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only run checks whose name or family matches this glob.
    #[arg(long, global = true)]
    filter: Option<String>,
    /// Worker threads.
    #[arg(long, global = true, env = "IGO_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the scheme constants and step-size bounds.
    Constants,
    /// Run the verification suite and write one report row per check.
    Verify,
    /// Run a gated optimization trajectory.
    Optimize,
    /// Kendall tau-b of two value files and Pearson rho of their utilities.
    Correlate {
        f_values: PathBuf,
        g_values: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            config::parse(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => io::stdout()
            .lock()
            .write_all(bytes)
            .context("writing to stdout"),
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: not a real number", path.display(), i + 1))
        })
        .collect()
}

fn filter_fn(pattern: Option<&str>) -> Result<impl Fn(&str) -> bool> {
    let pattern = pattern
        .map(glob::Pattern::new)
        .transpose()
        .context("invalid --filter glob")?;
    Ok(move |name: &str| pattern.as_ref().is_none_or(|p| p.matches(name)))
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Constants => {
            let rows: Vec<(String, f64)> = cfg
                .constants()?
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            let mut buf = Vec::new();
            output::write_pairs(&mut buf, ["constant", "value"], &rows)?;
            emit(out, &buf)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let keep = filter_fn(cli.filter.as_deref())?;
            let checks = verification_suite(&cfg, &keep)?;
            let reports = run_checks(&checks)?;
            let mut buf = Vec::new();
            output::write_reports(&mut buf, &reports)?;
            emit(out, &buf)?;
            let violated: Vec<&str> = reports
                .iter()
                .filter(|r| r.verdict == Verdict::Violated)
                .map(|r| r.name.as_str())
                .collect();
            eprintln!("{} checks, {} violated", reports.len(), violated.len());
            for name in &violated {
                eprintln!("violated: {name}");
            }
            Ok(if violated.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Optimize => {
            let rows = cfg.optimize()?;
            let mut buf = Vec::new();
            output::write_trajectory(&mut buf, &rows)?;
            emit(out, &buf)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Correlate { f_values, g_values } => {
            let f = read_values(f_values)?;
            let g = read_values(g_values)?;
            anyhow::ensure!(
                f.len() == g.len(),
                "value files differ in length ({} vs {})",
                f.len(),
                g.len()
            );
            let mut rows = Vec::new();
            match kendall_tau_b(&f, &g) {
                Ok(t) => rows.push(("tau_b".to_string(), t)),
                Err(e) => eprintln!("tau_b: {e}"),
            }
            let rho = cfg
                .weights
                .build(f.len())
                .and_then(|w| pearson_weights(&utilities(&f, &w)?, &utilities(&g, &w)?));
            match rho {
                Ok(r) => rows.push(("rho_weights".to_string(), r)),
                Err(e) => eprintln!("rho_weights: {e}"),
            }
            let mut buf = Vec::new();
            output::write_pairs(&mut buf, ["statistic", "value"], &rows)?;
            emit(out, &buf)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
