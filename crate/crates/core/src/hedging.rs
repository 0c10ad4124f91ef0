//! Bachelier market simulation and evaluation of the exponential hedging
//! criterion `(1/n) log E exp(n (f(S₁) − V₁))` for a fixed strategy.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{gradient_at, ValueSurface};
use crate::numerics::{gauss_legendre, log_mean_exp, norm_pdf, Grid1D, QuadRule, RngStream};
use crate::payoffs::PayoffSpec;

/// `S_t = S₀ + b t + W_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub s0: Vec<f64>,
    pub drift: Vec<f64>,
}

impl MarketSpec {
    pub fn new(s0: Vec<f64>, drift: Vec<f64>) -> Result<Self> {
        let m = MarketSpec { s0, drift };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.s0.is_empty() || self.s0.len() != self.drift.len() || self.s0.len() > 2 {
            return Err(Error::arg("market needs matching S0 and drift of dimension 1 or 2"));
        }
        if self.s0.iter().chain(&self.drift).any(|v| !v.is_finite()) {
            return Err(Error::arg("market parameters must be finite"));
        }
        Ok(self.s0.len())
    }

    pub fn dim(&self) -> usize {
        self.s0.len()
    }

    pub fn drift_norm_sq(&self) -> f64 {
        self.drift.iter().map(|b| b * b).sum()
    }
}

/// Hedge ratios `γ_i` tabulated on a grid for each rebalancing date (d = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedStrategy {
    pub grid: Grid1D,
    /// `n × grid.count`, date-major.
    pub values: Vec<f64>,
}

/// Markov hedging strategy: `γ_i` is a function of `S_{i/n}` only.
#[derive(Debug, Clone)]
pub enum StrategySpec {
    /// `γ_i(x) = ∇u((i+1)/n, x)`.
    GradientOf(Arc<ValueSurface>),
    Constant(Vec<f64>),
    Zero,
    Tabulated(TabulatedStrategy),
}

impl StrategySpec {
    /// Hedge ratio held over `[i/n, (i+1)/n]` at state `x`.
    pub fn ratio(&self, i: usize, n: usize, x: &[f64]) -> Vec<f64> {
        match self {
            StrategySpec::GradientOf(u) => gradient_at(u, (i + 1) as f64 / n as f64, x).0,
            StrategySpec::Constant(g) => g.clone(),
            StrategySpec::Zero => vec![0.0; x.len()],
            StrategySpec::Tabulated(t) => {
                let c = t.grid.count;
                vec![t.grid.interp(&t.values[i * c..(i + 1) * c], x[0])]
            }
        }
    }

    fn check(&self, n: usize, d: usize) -> Result<()> {
        match self {
            StrategySpec::GradientOf(u) if u.dim() != d => {
                Err(Error::arg("strategy surface dimension does not match the market"))
            }
            StrategySpec::Constant(g) if g.len() != d => {
                Err(Error::arg("constant strategy dimension does not match the market"))
            }
            StrategySpec::Tabulated(t) if d != 1 || t.values.len() != n * t.grid.count => {
                Err(Error::arg("tabulated strategy needs d = 1 and n × grid values"))
            }
            _ => Ok(()),
        }
    }
}

/// Paths per random block.
pub const BLOCK: usize = 4096;

/// Simulated increments of the price on the trading grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub s0: Vec<f64>,
    pub n: usize,
    pub count: usize,
    /// `count × n × d`, path-major.
    pub increments: Vec<f64>,
    pub seed: u64,
    pub stream_id: u64,
}

impl PathBatch {
    pub fn dim(&self) -> usize {
        self.s0.len()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let w = self.n * self.dim();
        &self.increments[p * w..(p + 1) * w]
    }

    /// `S₁` of path `p`.
    pub fn terminal(&self, p: usize) -> Vec<f64> {
        let d = self.dim();
        let mut s = self.s0.clone();
        for step in self.path(p).chunks_exact(d) {
            for (x, dx) in s.iter_mut().zip(step) {
                *x += dx;
            }
        }
        s
    }
}

/// Increments `N(b/n, I/n)`; block `k` of `BLOCK` paths draws from
/// `rng.derive(k)`, so the batch does not depend on thread scheduling.
pub fn simulate_paths(market: &MarketSpec, n: usize, count: usize, rng: &RngStream) -> Result<PathBatch> {
    let d = market.validate()?;
    if n == 0 || count == 0 {
        return Err(Error::arg("need n ≥ 1 and count ≥ 1"));
    }
    let w = n * d;
    let mut increments = vec![0.0; count * w];
    let scale = 1.0 / (n as f64).sqrt();
    increments.par_chunks_mut(BLOCK * w).enumerate().for_each(|(k, chunk)| {
        let mut r = rng.derive(k as u64);
        for (j, v) in chunk.iter_mut().enumerate() {
            *v = market.drift[j % d] / n as f64 + scale * r.standard_normal();
        }
    });
    Ok(PathBatch { s0: market.s0.clone(), n, count, increments, seed: rng.seed(), stream_id: rng.stream_id() })
}

/// Terminal portfolio value `Σ_i ⟨γ_i(S_{i/n}), ΔS_i⟩` per path.
pub fn portfolio_value(batch: &PathBatch, strategy: &StrategySpec) -> Result<Vec<f64>> {
    let d = batch.dim();
    strategy.check(batch.n, d)?;
    let out: Vec<f64> = (0..batch.count)
        .into_par_iter()
        .map(|p| {
            let mut s = batch.s0.clone();
            let mut v = 0.0;
            for (i, step) in batch.path(p).chunks_exact(d).enumerate() {
                let g = strategy.ratio(i, batch.n, &s);
                for k in 0..d {
                    v += g[k] * step[k];
                    s[k] += step[k];
                }
            }
            v
        })
        .collect();
    if let Some(p) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(crate::error::Module::Hedging, format!("strategy produced a non-finite value on path {p}")));
    }
    Ok(out)
}

/// Monte Carlo estimate of the criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionEstimate {
    pub value: f64,
    /// Bootstrap standard error.
    pub stderr: f64,
    pub count: usize,
    /// Paths carrying more than 10% of the exponential mass.
    pub heavy_paths: usize,
    /// Largest single-path share of the exponential mass.
    pub max_mass_share: f64,
}

/// Largest `n` accepted by the Monte Carlo evaluator.
pub const MC_MAX_N: usize = 64;
const BOOTSTRAP_RESAMPLES: u64 = 200;

/// `(1/n) log mean exp(n (f(S₁) − V))` with a bootstrap standard error.
pub fn criterion_mc(batch: &PathBatch, f: &PayoffSpec, strategy: &StrategySpec) -> Result<CriterionEstimate> {
    let n = batch.n;
    if n > MC_MAX_N {
        return Err(Error::arg(format!("Monte Carlo criterion limited to n ≤ {MC_MAX_N}")));
    }
    if f.validate()? != batch.dim() {
        return Err(Error::arg("payoff dimension does not match the batch"));
    }
    let v = portfolio_value(batch, strategy)?;
    let nf = n as f64;
    let expo: Vec<f64> = (0..batch.count).into_par_iter().map(|p| nf * (f.eval(&batch.terminal(p)) - v[p])).collect();
    let lme = log_mean_exp(&expo)?;
    let total = lme + (batch.count as f64).ln();
    let shares: Vec<f64> = expo.iter().map(|e| (e - total).exp()).collect();
    let heavy_paths = shares.iter().filter(|s| **s > 0.1).count();
    let max_mass_share = shares.iter().fold(0.0f64, |a, b| a.max(*b));
    let boot = RngStream::new(batch.seed, batch.stream_id).derive(u64::MAX);
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut g = boot.derive(r);
            let sample: Vec<f64> = (0..batch.count).map(|_| expo[g.index(batch.count)]).collect();
            log_mean_exp(&sample).map(|x| x / nf)
        })
        .collect::<Result<_>>()?;
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (stats.len() - 1) as f64;
    Ok(CriterionEstimate { value: lme / nf, stderr: var.sqrt(), count: batch.count, heavy_paths, max_mass_share })
}

/// Shared one-step machinery for the backward recursions in d = 1.
pub(crate) struct StepRule {
    pub deltas: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// Standard-normal mass beyond this many deviations is dropped in the
/// terminal step.
const TERMINAL_Z: f64 = 10.0;
const TERMINAL_PANEL: f64 = 0.5;

impl StepRule {
    pub fn new(rule: &QuadRule, n: usize, b: f64) -> Self {
        let nf = n as f64;
        let deltas = rule.nodes.iter().map(|z| z / nf.sqrt() + b / nf).collect();
        let log_weights = rule.weights.iter().map(|w| w.ln()).collect();
        StepRule { deltas, log_weights }
    }

    /// Rule for the last step at `x`, where the target is the payoff with
    /// the given kinks: Gauss–Legendre panels in `z` split at every kink.
    pub fn terminal(kinks: &[f64], x: f64, n: usize, b: f64) -> Self {
        let nf = n as f64;
        let (mean, sd) = (b / nf, 1.0 / nf.sqrt());
        let mut cuts: Vec<f64> = kinks
            .iter()
            .map(|k| (k - x - mean) / sd)
            .filter(|z| z.abs() < TERMINAL_Z)
            .collect();
        let panels = (2.0 * TERMINAL_Z / TERMINAL_PANEL) as usize;
        cuts.extend((0..=panels).map(|k| -TERMINAL_Z + k as f64 * TERMINAL_PANEL));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| *a - *b < 1e-12);
        let mut deltas = Vec::new();
        let mut log_weights = Vec::new();
        for w in cuts.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            let order = ((32.0 * half).ceil() as usize).clamp(2, 8);
            let q = gauss_legendre(order).expect("fixed order");
            for (t, wt) in q.nodes.iter().zip(&q.weights) {
                let z = mid + half * t;
                deltas.push(mean + sd * z);
                log_weights.push((half * wt * norm_pdf(z)).ln());
            }
        }
        StepRule { deltas, log_weights }
    }

    /// `ln w_k + n V(x + Δ_k)`.
    pub fn exponents(&self, grid: &Grid1D, v: &[f64], x: f64, n: usize) -> Vec<f64> {
        self.exponents_of(|y| grid.interp(v, y), x, n)
    }

    /// `ln w_k + n g(x + Δ_k)`.
    pub fn exponents_of<G: Fn(f64) -> f64>(&self, g: G, x: f64, n: usize) -> Vec<f64> {
        let nf = n as f64;
        self.deltas.iter().zip(&self.log_weights).map(|(d, lw)| lw + nf * g(x + d)).collect()
    }

    /// `log Σ_k exp(a_k − n γ Δ_k)`.
    pub fn objective(&self, a: &[f64], n: usize, gamma: f64) -> f64 {
        let nf = n as f64;
        let m = a.iter().zip(&self.deltas).fold(f64::NEG_INFINITY, |acc, (ak, d)| acc.max(ak - nf * gamma * d));
        let s: f64 = a.iter().zip(&self.deltas).map(|(ak, d)| (ak - nf * gamma * d - m).exp()).sum();
        m + s.ln()
    }
}

/// Checks the recursion grid leaves `6 + |b|` units on both sides of `S₀`.
pub(crate) fn check_padding(grid: &Grid1D, s0: f64, b: f64) -> Result<()> {
    let need = 6.0 + b.abs();
    if grid.lo > s0 - need || grid.hi < s0 + need {
        let have = (s0 - grid.lo).min(grid.hi - s0);
        return Err(Error::Padding { required: need, available: have });
    }
    Ok(())
}

/// Exact backward evaluation of the criterion in d = 1:
/// `W_k(x) = (1/n) log E exp(n W_{k+1}(x + Δ) − n γ_k(x) Δ)`, `W_n = f`,
/// with `Δ ~ N(b/n, 1/n)` by quadrature and linear interpolation of
/// `W_{k+1}` (constant outside the grid). The last step integrates `f`
/// itself with panels split at its kinks. Linear parts of `f` are removed
/// exactly and the strategy is shifted accordingly. Returns `W_0(S₀)`.
pub fn criterion_exact_1d(
    f: &PayoffSpec,
    strategy: &StrategySpec,
    n: usize,
    market: &MarketSpec,
    grid: &Grid1D,
    rule: &QuadRule,
) -> Result<f64> {
    if market.validate()? != 1 || f.validate()? != 1 {
        return Err(Error::arg("criterion_exact_1d needs d = 1"));
    }
    if n == 0 {
        return Err(Error::arg("need n ≥ 1"));
    }
    strategy.check(n, 1)?;
    let (s0, b) = (market.s0[0], market.drift[0]);
    check_padding(grid, s0, b)?;
    let (c0, slope, base) = f.split_linear();
    let c = slope[0];
    let step = StepRule::new(rule, n, b);
    let xs = grid.nodes();
    let nf = n as f64;
    let kinks = base.kinks_1d();
    let mut w = base.sample_on(&[*grid]);
    for k in (0..n).rev() {
        w = xs
            .par_iter()
            .map(|&x| {
                let gamma = strategy.ratio(k, n, &[x])[0] - c;
                if k + 1 == n {
                    let local = StepRule::terminal(&kinks, x, n, b);
                    let a = local.exponents_of(|y| base.eval(&[y]), x, n);
                    return local.objective(&a, n, gamma) / nf;
                }
                let a = step.exponents(grid, &w, x, n);
                step.objective(&a, n, gamma) / nf
            })
            .collect();
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(crate::error::Module::Hedging, format!("non-finite criterion at step {k}")));
        }
    }
    Ok(c0 + c * s0 + grid.interp(&w, s0))
}
