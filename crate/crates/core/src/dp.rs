//! Exact certainty equivalent `c_n` in d = 1 by backward induction over the
//! rebalancing dates, and the one-period duality check.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Module, Result};
use crate::hedging::{check_padding, MarketSpec, StepRule};
use crate::numerics::{entropy_rate_eigen, Grid1D, QuadRule};
use crate::payoffs::PayoffSpec;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const BRACKET_TOL: f64 = 1e-10;
const MAX_EXPANSION: f64 = 1024.0;

/// Minimizes a convex function given its value and the sign of its slope.
/// The bracket `[lo, hi]` is widened until the slope changes sign, then
/// shrunk by golden-section search below `BRACKET_TOL`. Near the minimum the
/// values are flat to rounding, so the reported minimizer comes from
/// bisecting the slope sign instead.
fn golden_min<F, D>(f: F, slope: D, mut lo: f64, mut hi: f64) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let width0 = hi - lo;
    while slope(lo) > 0.0 {
        lo -= hi - lo;
        if hi - lo > MAX_EXPANSION * width0 {
            return Err(Error::numerical(Module::Dp, "minimizer bracket could not be established"));
        }
    }
    while slope(hi) < 0.0 {
        hi += hi - lo;
        if hi - lo > MAX_EXPANSION * width0 {
            return Err(Error::numerical(Module::Dp, "minimizer bracket could not be established"));
        }
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if slope(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let root = 0.5 * (a + b);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > BRACKET_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fx = [f(root), f(mid), f1, f2].into_iter().fold(f64::INFINITY, f64::min);
    Ok((root, fx, hi - lo))
}

/// Slope sign helper: `Σ_k π_k Δ_k` under `π ∝ exp(a_k − s Δ_k)`, negated.
fn tilted_slope(a: &[f64], deltas: &[f64], s: f64) -> f64 {
    let m = a.iter().zip(deltas).fold(f64::NEG_INFINITY, |acc, (ak, d)| acc.max(ak - s * d));
    let mut num = 0.0;
    let mut den = 0.0;
    for (ak, d) in a.iter().zip(deltas) {
        let e = (ak - s * d - m).exp();
        num += e * d;
        den += e;
    }
    -num / den
}

/// Largest slope of the piecewise-linear interpolant.
pub fn lipschitz(grid: &Grid1D, values: &[f64]) -> f64 {
    let s = grid.step();
    values.windows(2).fold(0.0, |a, w| a.max((w[1] - w[0]).abs() / s))
}

/// Result of one inner minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePeriodValue {
    pub value: f64,
    pub gamma: f64,
    pub bracket_width: f64,
}

fn minimize_step(step: &StepRule, a: &[f64], n: usize, lip: f64) -> Result<OnePeriodValue> {
    let nf = n as f64;
    let (gamma, val, width) = golden_min(
        |g| step.objective(a, n, g),
        |g| tilted_slope(a, &step.deltas, nf * g),
        -lip - 1.0,
        lip + 1.0,
    )?;
    Ok(OnePeriodValue { value: val / nf, gamma, bracket_width: width })
}

/// `(1/n) inf_γ log E exp(n V(x + Δ) − n γ Δ)`, `Δ ~ N(b/n, 1/n)`, where
/// `V` is the linear interpolant of `vnext` on `grid` (constant outside).
pub fn one_period_value(
    x: f64,
    grid: &Grid1D,
    vnext: &[f64],
    n: usize,
    b: f64,
    rule: &QuadRule,
) -> Result<OnePeriodValue> {
    if n == 0 || vnext.len() != grid.count {
        return Err(Error::arg("need n ≥ 1 and one value per grid node"));
    }
    let step = StepRule::new(rule, n, b);
    let a = step.exponents(grid, vnext, x, n);
    minimize_step(&step, &a, n, lipschitz(grid, vnext))
}

/// The inner objective `γ ↦ log Σ_k w_k exp(n V(x + Δ_k) − n γ Δ_k)`.
pub fn inner_objective(x: f64, grid: &Grid1D, vnext: &[f64], n: usize, b: f64, rule: &QuadRule, gamma: f64) -> f64 {
    let step = StepRule::new(rule, n, b);
    let a = step.exponents(grid, vnext, x, n);
    step.objective(&a, n, gamma)
}

/// Value functions of the recursion and the minimizing hedge ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct CertEquivResult {
    pub n: usize,
    pub grid: Grid1D,
    /// `V_0, ..., V_n` on the grid.
    pub values: Vec<Vec<f64>>,
    pub c_n: f64,
    /// `γ*_k` on the grid for `k = 0..n`.
    pub gamma_star: Vec<Vec<f64>>,
    /// Largest final bracket width of the inner minimizations.
    pub bracket_width: f64,
}

impl CertEquivResult {
    /// Rows `k,x,V,gamma`; the last date has no hedge ratio.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,x,V,gamma\n");
        for (k, v) in self.values.iter().enumerate() {
            for (i, x) in self.grid.nodes().iter().enumerate() {
                match self.gamma_star.get(k) {
                    Some(g) => writeln!(s, "{k},{x},{},{}", v[i], g[i]).unwrap(),
                    None => writeln!(s, "{k},{x},{},", v[i]).unwrap(),
                }
            }
        }
        s
    }
}

/// Minimum quadrature order accepted by the recursion.
pub const MIN_ORDER: usize = 32;

/// Certainty equivalent `c_n = V_0(S₀)` of the exponential hedging problem
/// with `n` rebalancing dates (d = 1).
///
/// Linear parts of `f` are hedged exactly, so the recursion runs on the
/// remaining payoff and the result is shifted by `c0 + c S₀`. The last step
/// integrates the payoff itself with panels split at its kinks; earlier
/// steps use `rule` on the interpolated value function.
pub fn certainty_equivalent(
    f: &PayoffSpec,
    n: usize,
    market: &MarketSpec,
    grid: &Grid1D,
    rule: &QuadRule,
) -> Result<CertEquivResult> {
    if market.validate()? != 1 || f.validate()? != 1 {
        return Err(Error::arg("certainty_equivalent needs d = 1"));
    }
    if n == 0 {
        return Err(Error::arg("need n ≥ 1"));
    }
    if rule.len() < MIN_ORDER {
        return Err(Error::arg(format!("quadrature order must be at least {MIN_ORDER}")));
    }
    let (s0, b) = (market.s0[0], market.drift[0]);
    check_padding(grid, s0, b)?;
    let (c0, slope, base) = f.split_linear();
    let c = slope[0];
    let step = StepRule::new(rule, n, b);
    let xs = grid.nodes();
    let mut values = vec![Vec::new(); n + 1];
    let mut gammas = vec![Vec::new(); n];
    values[n] = base.sample_on(&[*grid]);
    let kinks = base.kinks_1d();
    let mut width = 0.0f64;
    for k in (0..n).rev() {
        let next = &values[k + 1];
        let lip = lipschitz(grid, next);
        let sup = next.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
        let res: Vec<OnePeriodValue> = xs
            .par_iter()
            .map(|&x| {
                if k + 1 == n {
                    let local = StepRule::terminal(&kinks, x, n, b);
                    return minimize_step(&local, &local.exponents_of(|y| base.eval(&[y]), x, n), n, lip);
                }
                minimize_step(&step, &step.exponents(grid, next, x, n), n, lip)
            })
            .collect::<Result<_>>()?;
        if let Some(r) = res.iter().find(|r| !r.value.is_finite() || r.value > sup + 1e-8) {
            return Err(Error::numerical(Module::Dp, format!("value {} at step {k} exceeds sup {sup}", r.value)));
        }
        width = res.iter().fold(width, |a, r| a.max(r.bracket_width));
        values[k] = res.iter().map(|r| r.value).collect();
        gammas[k] = res.iter().map(|r| r.gamma).collect();
    }
    let c_n = c0 + c * s0 + grid.interp(&values[0], s0);
    for (k, v) in values.iter_mut().enumerate() {
        for (vi, x) in v.iter_mut().zip(&xs) {
            *vi += c0 + c * x;
        }
        if let Some(g) = gammas.get_mut(k) {
            g.iter_mut().for_each(|gi| *gi += c);
        }
    }
    Ok(CertEquivResult { n, grid: *grid, values, c_n, gamma_star: gammas, bracket_width: width })
}

/// Both sides of the one-period duality inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePeriodDualReport {
    /// `inf_γ log E exp(φ(Y) − γY)`, `Y ~ N(λ, 1)`.
    pub lhs: f64,
    /// `sup_Σ (E φ(√Σ Z) − G(Σ)) − λ²/2` over `Σ ∈ [1/K, K]`.
    pub rhs: f64,
    pub lambda: f64,
    pub gap: f64,
    pub gamma_star: f64,
    pub sigma_star: f64,
}

/// Evaluates both sides of the one-period duality for `φ` and drift `λ`.
pub fn one_period_dual_check<F: Fn(f64) -> f64 + Sync>(
    phi: F,
    lambda: f64,
    k_bound: f64,
    rule: &QuadRule,
) -> Result<OnePeriodDualReport> {
    if !(k_bound >= 1.0) {
        return Err(Error::arg("K must be at least 1"));
    }
    let ys: Vec<f64> = rule.nodes.iter().map(|z| lambda + z).collect();
    let a: Vec<f64> = rule.weights.iter().zip(&ys).map(|(w, y)| w.ln() + phi(*y)).collect();
    let lse = |g: f64| {
        let m = a.iter().zip(&ys).fold(f64::NEG_INFINITY, |acc, (ak, y)| acc.max(ak - g * y));
        m + a.iter().zip(&ys).map(|(ak, y)| (ak - g * y - m).exp()).sum::<f64>().ln()
    };
    let (gamma_star, lhs, _) = golden_min(lse, |g| tilted_slope(&a, &ys, g), -1.0, 1.0)?;
    let dual = |s: f64| -> f64 {
        let sigma = s.exp();
        let pay = rule.expect(|z| phi(sigma.sqrt() * z));
        pay - entropy_rate_eigen(&[sigma]).unwrap_or(f64::INFINITY)
    };
    let lk = k_bound.ln();
    let (mut lo, mut hi) = (-lk, lk);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (dual(x1), dual(x2));
    while hi - lo > BRACKET_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = dual(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = dual(x2);
        }
    }
    let s_star = 0.5 * (lo + hi);
    let best = [dual(s_star), dual(-lk), dual(lk), f1, f2].into_iter().fold(f64::NEG_INFINITY, f64::max);
    let rhs = best - 0.5 * lambda * lambda;
    Ok(OnePeriodDualReport { lhs, rhs, lambda, gap: lhs - rhs, gamma_star, sigma_star: s_star.exp() })
}
