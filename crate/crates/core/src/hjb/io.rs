use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{pde_residual, ValueSurface};
use crate::error::{Error, Result};
use crate::numerics::Grid1D;

const MAGIC: &str = "entropic-hedge value-surface v1";

/// Writes a text header (`key value` lines ending with `data`) followed by
/// the values as little-endian `f64`, slice-major then row-major.
pub fn write_surface(u: &ValueSurface, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "time {} {} {}", u.times.lo, u.times.hi, u.times.count)?;
    for a in &u.axes {
        writeln!(w, "axis {} {} {}", a.lo, a.hi, a.count)?;
    }
    writeln!(w, "alpha {}", u.alpha)?;
    writeln!(w, "semiconvexity {}", u.c_semiconvex)?;
    writeln!(w, "alpha_observed {}", u.alpha_observed)?;
    writeln!(w, "residual_max {}", u.residual_max)?;
    writeln!(w, "n_t {}", u.n_t)?;
    writeln!(w, "clamp_fraction {}", u.clamp_fraction)?;
    writeln!(w, "data")?;
    for v in &u.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn num<T: std::str::FromStr>(tok: Option<&str>, key: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad value for '{key}'")))
}

/// Reads a surface written by [`write_surface`], checking sizes, finiteness,
/// the recorded curvature margin and the recorded residual.
pub fn read_surface(path: &Path) -> Result<ValueSurface> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Format("not a value-surface file".into()));
    }
    let mut times = None;
    let mut axes = Vec::new();
    let (mut alpha, mut c, mut alpha_obs, mut resid, mut n_t, mut clamp) = (None, None, None, None, None, 0.0);
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("missing data section".into()));
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap_or("");
        match key {
            "data" => break,
            "time" | "axis" => {
                let g = Grid1D::new(num(it.next(), key)?, num(it.next(), key)?, num(it.next(), key)?)?;
                if key == "time" {
                    times = Some(g);
                } else {
                    axes.push(g);
                }
            }
            "alpha" => alpha = Some(num(it.next(), key)?),
            "semiconvexity" => c = Some(num(it.next(), key)?),
            "alpha_observed" => alpha_obs = Some(num(it.next(), key)?),
            "residual_max" => resid = Some(num(it.next(), key)?),
            "n_t" => n_t = Some(num(it.next(), key)?),
            "clamp_fraction" => clamp = num(it.next(), key)?,
            _ => return Err(Error::Format(format!("unknown header key '{key}'"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("missing header '{k}'"));
    let times: Grid1D = times.ok_or_else(|| missing("time"))?;
    if !(1..=2).contains(&axes.len()) {
        return Err(Error::Format("surface must have one or two axes".into()));
    }
    let total = times.count * axes.iter().map(|a| a.count).product::<usize>();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * total {
        return Err(Error::Format(format!("expected {} values, found {} bytes", total, bytes.len())));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("surface contains non-finite values".into()));
    }
    let u = ValueSurface {
        times,
        axes,
        values,
        alpha: alpha.ok_or_else(|| missing("alpha"))?,
        c_semiconvex: c.ok_or_else(|| missing("semiconvexity"))?,
        alpha_observed: alpha_obs.ok_or_else(|| missing("alpha_observed"))?,
        residual_max: resid.ok_or_else(|| missing("residual_max"))?,
        n_t: n_t.ok_or_else(|| missing("n_t"))?,
        clamp_fraction: clamp,
        warnings: Vec::new(),
    };
    let hi = u.max_curvature();
    if hi > 1.0 - u.alpha_observed + 1e-9 {
        return Err(Error::Format(format!("surface curvature {hi} exceeds recorded margin")));
    }
    if !(u.residual_max >= 0.0) || !pde_residual(&u).is_finite() {
        return Err(Error::Format("surface residual is not finite".into()));
    }
    Ok(u)
}
