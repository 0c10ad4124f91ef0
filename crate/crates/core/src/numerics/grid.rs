use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `lo, lo + step, ..., hi` with `count ≥ 2` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let g = Grid1D { lo, hi, count };
        g.validate()?;
        Ok(g)
    }

    /// Grid over `[lo, hi]` whose step is as close as possible to `step`
    /// without exceeding it.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::arg(format!("grid step {step} must be positive")));
        }
        let cells = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
        Self::new(lo, hi, cells + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::arg(format!("grid bounds [{}, {}] invalid", self.lo, self.hi)));
        }
        if self.count < 2 {
            return Err(Error::arg("grid needs at least two nodes"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Cell index `i` and fraction `t ∈ [0, 1]` such that `x` lies at
    /// `node(i) + t·step`; points outside the grid are clamped.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        if !(x > self.lo) {
            return (0, 0.0);
        }
        if x >= self.hi {
            return (self.count - 2, 1.0);
        }
        let s = (x - self.lo) / self.step();
        let i = (s.floor() as usize).min(self.count - 2);
        (i, (s - i as f64).clamp(0.0, 1.0))
    }

    /// Linear interpolation of nodal values with constant extrapolation.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        let (i, t) = self.locate(x);
        if t == 0.0 {
            return values[i];
        }
        if t == 1.0 {
            return values[i + 1];
        }
        values[i] + t * (values[i + 1] - values[i])
    }
}
