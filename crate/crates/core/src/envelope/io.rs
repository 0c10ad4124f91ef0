use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SampledFunction, SmoothTerminal};
use crate::error::{Error, Result};
use crate::numerics::Grid1D;

const MAGIC: &str = "# entropic-hedge smooth-terminal v1";

/// Writes a terminal as columnar text: a commented header, then one row per
/// node with its coordinates, `h` and `ĥ`.
pub fn write_terminal(t: &SmoothTerminal, path: &Path) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "# dim {}", t.h.dim()).unwrap();
    for a in &t.h.axes {
        writeln!(s, "# axis {} {} {}", a.lo, a.hi, a.count).unwrap();
    }
    writeln!(s, "# padding {}", t.h.padding).unwrap();
    writeln!(s, "# delta {}", t.delta).unwrap();
    writeln!(s, "# shrink {}", t.shrink).unwrap();
    writeln!(s, "# shift {}", t.shift).unwrap();
    for k in 0..t.h.len() {
        for x in t.h.point(k) {
            write!(s, "{x} ").unwrap();
        }
        writeln!(s, "{} {}", t.h.values[k], t.envelope[k]).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

fn parse_f64(tok: Option<&str>, what: &str) -> Result<f64> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad or missing {what}")))
}

/// Reads a terminal written by [`write_terminal`] and re-derives its
/// curvature constants.
pub fn read_terminal(path: &Path) -> Result<SmoothTerminal> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Format("not a smooth-terminal file".into()));
    }
    let mut axes = Vec::new();
    let (mut padding, mut delta, mut shrink, mut shift) = (None, None, None, None);
    let mut h = Vec::new();
    let mut env = Vec::new();
    let mut dim = 0usize;
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("dim") => dim = parse_f64(it.next(), "dim")? as usize,
                Some("axis") => {
                    let lo = parse_f64(it.next(), "axis lo")?;
                    let hi = parse_f64(it.next(), "axis hi")?;
                    let count = parse_f64(it.next(), "axis count")? as usize;
                    axes.push(Grid1D::new(lo, hi, count)?);
                }
                Some("padding") => padding = Some(parse_f64(it.next(), "padding")?),
                Some("delta") => delta = Some(parse_f64(it.next(), "delta")?),
                Some("shrink") => shrink = Some(parse_f64(it.next(), "shrink")?),
                Some("shift") => shift = Some(parse_f64(it.next(), "shift")?),
                _ => return Err(Error::Format(format!("unknown header line '{line}'"))),
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != dim + 2 {
            return Err(Error::Format(format!("row has {} columns, expected {}", cols.len(), dim + 2)));
        }
        h.push(parse_f64(Some(cols[dim]), "h")?);
        env.push(parse_f64(Some(cols[dim + 1]), "envelope")?);
    }
    if axes.len() != dim {
        return Err(Error::Format("axis count does not match dim".into()));
    }
    let missing = |what: &str| Error::Format(format!("missing {what}"));
    let hf = SampledFunction::new(axes, h, padding.ok_or_else(|| missing("padding"))?)?;
    SmoothTerminal::from_values(
        hf,
        env,
        delta.ok_or_else(|| missing("delta"))?,
        shrink.ok_or_else(|| missing("shrink"))?,
        shift.ok_or_else(|| missing("shift"))?,
    )
}
