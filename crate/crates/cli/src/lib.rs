//! Experiment runner for the `entropic-hedge` library.
//!
//! Subcommands read a JSON config, run one pipeline and write versioned
//! CSV files. Exit codes: 0 success, 1 invariant or assumption violation,
//! 2 usage or config error, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use entropic_hedge::envelope::write_terminal;
use entropic_hedge::hjb::write_surface;
use entropic_hedge::Error;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Violation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(Error::Numerical { .. } | Error::Domain(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "entropic-hedge", version, about = "Exponential hedging experiments in the Bachelier model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Probe the structural assumption on the payoff.
    Check,
    /// Build the smooth terminal and solve the HJB equation.
    Solve,
    /// Convergence table with the sandwich bounds.
    Converge,
    /// Dual lower bounds and the feedback verification.
    Dual,
    /// Certainty equivalents by backward recursion.
    Ce,
    /// Evaluate the configured hedging strategy.
    HedgeEval,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(cli)),
            Err(e) => Err(CliError::Config(format!("cannot start {t} threads: {e}"))),
        },
        None => execute(cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    let head = output::header(&bytes, cli.seed);
    let out = &cli.out;
    match cli.command {
        Command::Check => {
            let r = commands::check(&cfg)?;
            println!(
                "radius {} alpha {} nodes {} sup|f| {} violations {}",
                r.radius,
                r.alpha,
                r.nodes_checked,
                r.bound_sup,
                r.violations.len()
            );
            for v in r.violations.iter().take(20) {
                println!("  {v}");
            }
            Ok(if r.passed { 0 } else { 1 })
        }
        Command::Solve => {
            if let Some(q) = &cfg.quadratic_test {
                let (err, _) = commands::quadratic_error(q)?;
                let pass = err <= q.tolerance;
                println!("quadratic test: max error {err:e} tolerance {:e} {}", q.tolerance, verdict(pass));
                return Ok(if pass { 0 } else { 1 });
            }
            let s = commands::solve(&cfg)?;
            let u = &s.surface;
            std::fs::create_dir_all(out)?;
            write_surface(u, &out.join("value_surface.bin"))?;
            let eps = s.terminal.as_ref().map_or(f64::NAN, |t| t.epsilon);
            if let Some(t) = &s.terminal {
                write_terminal(t, &out.join("terminal.txt"))?;
            }
            println!(
                "u0 {} alpha' {} residual_max {} epsilon {} gap_2eps {}",
                s.u0,
                u.alpha_observed,
                u.residual_max,
                eps,
                2.0 * eps
            );
            Ok(0)
        }
        Command::Converge => {
            let s = commands::solve(&cfg)?;
            let rows = commands::converge(&cfg, &s, cli.seed)?;
            output::write(out, "convergence.csv", &output::convergence_csv(&head, &rows))?;
            let broken: Vec<usize> = rows.iter().filter(|r| !r.sandwich_holds()).map(|r| r.n).collect();
            for r in &rows {
                println!("n {} c_n {} gap_upper {} {}", r.n, r.c_n, r.gap_upper(), verdict(r.sandwich_holds()));
            }
            if broken.is_empty() {
                Ok(0)
            } else {
                Err(CliError::Violation(format!("sandwich fails for n = {broken:?}")))
            }
        }
        Command::Dual => {
            let s = commands::solve(&cfg)?;
            let r = commands::dual(&cfg, &s, cli.seed)?;
            output::write(out, "dual.csv", &output::dual_csv(&head, &r))?;
            for p in &r.pieces {
                println!("m {} bound {} specific_entropy {}", p.m, p.value.value, p.specific_entropy);
            }
            if let Some(f) = &r.feedback {
                println!("feedback {} stderr {} u0 {} {}", f.value, f.stderr, r.u0, verdict(r.feedback_consistent()));
            }
            let gap = r.min_one_period_gap();
            println!("one-period duality: {} checks, min gap {gap:e}", r.one_period.len());
            if !r.feedback_consistent() {
                return Err(CliError::Violation("feedback value inconsistent with u(0, S0)".into()));
            }
            if gap < -SANDWICH_GAP {
                return Err(CliError::Violation(format!("one-period duality gap {gap:e} is negative")));
            }
            Ok(0)
        }
        Command::Ce => {
            let rows = commands::ce(&cfg)?;
            output::write(out, "ce.csv", &output::ce_csv(&head, &rows))?;
            for r in &rows {
                println!("n {} c_n {}", r.n, r.c_n);
            }
            Ok(0)
        }
        Command::HedgeEval => {
            let solved = match cfg.strategy {
                config::StrategyConfig::Gradient => Some(commands::solve(&cfg)?),
                _ => None,
            };
            let rows = commands::hedge_eval(&cfg, solved.as_ref(), cli.seed)?;
            output::write(out, "hedge.csv", &output::hedge_csv(&head, &rows))?;
            for r in &rows {
                println!("n {} exact {:?} mc {:?}", r.n, r.exact, r.mc.as_ref().map(|e| e.value));
            }
            Ok(0)
        }
    }
}

const SANDWICH_GAP: f64 = commands::SANDWICH_TOL;

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}
