//! Experiment configuration: a single JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use entropic_hedge::hedging::MarketSpec;
use entropic_hedge::numerics::Grid1D;
use entropic_hedge::payoffs::PayoffSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub payoff: PayoffSpec,
    pub market: MarketSpec,
    /// Target sup-distance between the smooth terminal and the envelope.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub dp: DpConfig,
    /// Rebalancing counts, strictly increasing.
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub dual: DualConfig,
    #[serde(default)]
    pub assumption: AssumptionConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    /// Runs `solve` against a quadratic terminal with a closed-form solution.
    #[serde(default)]
    pub quadratic_test: Option<QuadraticTestConfig>,
    /// Previously written value surface to reuse instead of solving.
    #[serde(default)]
    pub surface: Option<PathBuf>,
}

/// HJB grid centred at `S₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub half_width: f64,
    pub dx: f64,
    /// Room left beyond the region of interest for the mollifier.
    pub padding: f64,
    pub slices: usize,
    /// Time steps; the smallest CFL-compliant multiple of `slices` if absent.
    pub time_steps: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { half_width: 30.0, dx: 1.0 / 64.0, padding: 22.0, slices: 1024, time_steps: None }
    }
}

/// Grid and quadrature for the backward recursion, centred at `S₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpConfig {
    pub half_width: f64,
    pub dx: f64,
    pub quad_order: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig { half_width: 8.0, dx: 1.0 / 64.0, quad_order: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    /// Paths per `n` for the hedging criterion; zero disables it.
    pub paths: usize,
    pub feedback_paths: usize,
    pub euler_steps: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig { paths: 100_000, feedback_paths: 1_000_000, euler_steps: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualConfig {
    pub k_bound: f64,
    /// Piece counts to optimize; `converge` uses the largest.
    pub pieces: Vec<usize>,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig { k_bound: 100.0, pieces: vec![1, 2, 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionConfig {
    /// Probe radius; searched over a short ladder if absent.
    pub radius: Option<f64>,
    pub alpha: f64,
    pub probe_step: f64,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        AssumptionConfig { radius: None, alpha: 0.5, probe_step: 1.0 / 64.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    /// Spatial gradient of the solved value surface.
    #[default]
    Gradient,
    Zero,
    Constant(Vec<f64>),
}

/// Terminal `½a x²` on `[−half_width, half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticTestConfig {
    pub curvature: f64,
    pub half_width: f64,
    pub dx: f64,
    pub slices: usize,
    pub tolerance: f64,
}

impl Default for QuadraticTestConfig {
    fn default() -> Self {
        QuadraticTestConfig { curvature: 0.5, half_width: 8.0, dx: 1.0 / 128.0, slices: 16, tolerance: 5e-3 }
    }
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_n_list() -> Vec<usize> {
    vec![4, 8, 16, 32, 64]
}

impl ExperimentConfig {
    /// Parses and validates; syntax and schema errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", path.display())))?;
        Ok((Self::from_json(text)?, bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = self.payoff.validate().map_err(|e| CliError::Config(format!("payoff: {e}")))?;
        let dm = self.market.validate().map_err(|e| CliError::Config(format!("market: {e}")))?;
        if d != dm {
            return bad(format!("payoff dimension {d} differs from market dimension {dm}"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive".into());
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_list must be non-empty, positive and strictly increasing".into());
        }
        let s = &self.solver;
        if !(s.dx > 0.0 && s.half_width > 0.0 && s.padding >= 0.0 && s.padding < s.half_width) || s.slices == 0 {
            return bad("solver needs dx > 0, 0 ≤ padding < half_width and slices ≥ 1".into());
        }
        if let Some(nt) = s.time_steps {
            if nt == 0 || nt % s.slices != 0 {
                return bad(format!("solver.time_steps = {nt} must be a positive multiple of slices"));
            }
        }
        if !(self.dp.dx > 0.0 && self.dp.half_width > 0.0) || !(2..=256).contains(&self.dp.quad_order) {
            return bad("dp needs dx > 0, half_width > 0 and quad_order in 2..=256".into());
        }
        let mc = &self.monte_carlo;
        if mc.paths == 1 || mc.feedback_paths == 1 || mc.euler_steps == 0 {
            return bad("monte_carlo needs 0 or ≥ 2 paths and euler_steps ≥ 1".into());
        }
        if self.dual.pieces.is_empty() || self.dual.pieces.iter().any(|m| !(1..=8).contains(m)) {
            return bad("dual.pieces must list piece counts in 1..=8".into());
        }
        if !(1.0..=100.0).contains(&self.dual.k_bound) {
            return bad("dual.k_bound must lie in [1, 100]".into());
        }
        let a = &self.assumption;
        if !(a.alpha > 0.0 && a.alpha <= 1.0 && a.probe_step > 0.0) || a.radius.is_some_and(|r| !(r > 0.0)) {
            return bad("assumption needs alpha in (0, 1], probe_step > 0 and radius > 0".into());
        }
        if let StrategyConfig::Constant(g) = &self.strategy {
            if g.len() != d || g.iter().any(|v| !v.is_finite()) {
                return bad("constant strategy must have one finite ratio per asset".into());
            }
        }
        if let Some(q) = &self.quadratic_test {
            if !(q.curvature < 1.0 && q.dx > 0.0 && q.half_width > 0.0 && q.slices > 0 && q.tolerance > 0.0) {
                return bad("quadratic_test needs curvature < 1, dx, half_width, slices and tolerance positive".into());
            }
        }
        if let Some(p) = &self.surface {
            if !p.is_file() {
                return bad(format!("surface file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.market.s0.len()
    }

    pub fn solver_axis(&self) -> Result<Grid1D, CliError> {
        let c = self.market.s0[0];
        Ok(Grid1D::with_step(c - self.solver.half_width, c + self.solver.half_width, self.solver.dx)?)
    }

    pub fn dp_axis(&self) -> Result<Grid1D, CliError> {
        let c = self.market.s0[0];
        Ok(Grid1D::with_step(c - self.dp.half_width, c + self.dp.half_width, self.dp.dx)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUT: &str = r#"{"payoff": {"kind": "put", "strike": 1.0, "weights": [1.0]},
        "market": {"s0": [0.0], "drift": [0.0]}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(PUT).unwrap();
        assert_eq!(c.n_list, vec![4, 8, 16, 32, 64]);
        assert_eq!(c.dual.k_bound, 100.0);
        assert_eq!(c.strategy, StrategyConfig::Gradient);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = PUT.replace("\"drift\"", "\"drfit\"");
        match ExperimentConfig::from_json(&text) {
            Err(CliError::Config(m)) => assert!(m.starts_with("line 2 column"), "{m}"),
            other => panic!("{other:?}"),
        }
        let text = PUT.replace("\"strike\"", "\"striek\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn n_list_must_increase() {
        let text = PUT.replace("}}", "}, \"n_list\": [4, 4]}");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn sampled_payoff_parses() {
        let text = r#"{"payoff": {"kind": "sampled", "axes": [{"lo": -1.0, "hi": 1.0, "count": 3}],
            "values": [0.0, 1.0, 0.0]}, "market": {"s0": [0.0], "drift": [0.0]}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert!(matches!(c.payoff, PayoffSpec::Sampled(_)));
    }

    #[test]
    fn strategies_parse() {
        let text = PUT.replace("}}", "}, \"strategy\": {\"constant\": [0.5]}}");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap().strategy, StrategyConfig::Constant(vec![0.5]));
        let text = PUT.replace("}}", "}, \"strategy\": \"zero\"}");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap().strategy, StrategyConfig::Zero);
    }
}
