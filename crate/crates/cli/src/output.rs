//! Versioned CSV emission.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::commands::{CeRow, ConvergenceRow, DualReport, HedgeRow};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CONVERGENCE_COLUMNS: &str =
    "n,c_n,lower_bound,dual_value,strategy_value_exact,strategy_value_mc,mc_stderr,limit_u0,gap_upper,gap_lower";

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// First line of every CSV file.
pub fn header(config_bytes: &[u8], seed: u64) -> String {
    format!("# entropic-hedge {VERSION} config-sha256={} seed={seed}\n", config_hash(config_bytes))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn convergence_csv(head: &str, rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{head}{CONVERGENCE_COLUMNS}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.c_n,
            r.lower_bound,
            r.dual_value,
            r.strategy_value_exact,
            opt(r.strategy_value_mc),
            opt(r.mc_stderr),
            r.limit_u0,
            r.gap_upper(),
            r.gap_lower()
        )
        .unwrap();
    }
    s
}

pub fn ce_csv(head: &str, rows: &[CeRow]) -> String {
    let mut s = format!("{head}n,c_n,gamma0,bracket_width\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.n, r.c_n, r.gamma0, r.bracket_width).unwrap();
    }
    s
}

pub fn hedge_csv(head: &str, rows: &[HedgeRow]) -> String {
    let mut s = format!("{head}n,strategy_value_exact,strategy_value_mc,mc_stderr,heavy_paths\n");
    for r in rows {
        let mc = r.mc.as_ref();
        writeln!(
            s,
            "{},{},{},{},{}",
            r.n,
            opt(r.exact),
            opt(mc.map(|e| e.value)),
            opt(mc.map(|e| e.stderr)),
            mc.map(|e| e.heavy_paths.to_string()).unwrap_or_default()
        )
        .unwrap();
    }
    s
}

/// Optimized controls as rows `m,t_start,t_end,sigma` followed by the
/// per-`m` values.
pub fn dual_csv(head: &str, report: &DualReport) -> String {
    let mut s = format!("{head}m,t_start,t_end,sigma\n");
    for p in &report.pieces {
        for (w, sigma) in p.control.breakpoints.windows(2).zip(&p.control.pieces) {
            writeln!(s, "{},{},{},{}", p.m, w[0], w[1], sigma.get(0, 0)).unwrap();
        }
    }
    s.push_str("m,value,payoff_part,entropy_part,specific_entropy\n");
    for p in &report.pieces {
        let v = &p.value;
        writeln!(s, "{},{},{},{},{}", p.m, v.value, v.payoff_part, v.entropy_part, p.specific_entropy).unwrap();
    }
    s
}

pub fn write(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}
