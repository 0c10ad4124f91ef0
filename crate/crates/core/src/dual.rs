//! Dual objective `E f(S₀ + ∫√Σ dW) − E ∫ G(Σ) dt` over deterministic
//! piecewise-constant covariance controls and over HJB feedback fields.

use rayon::prelude::*;

use crate::error::{Error, Module, Result};
use crate::hedging::BLOCK;
use crate::hjb::ControlField;
use crate::numerics::{entropy_rate, gaussian_expectation_1d, spd_sqrt, QuadRule, RngStream, SpdMatrix};
use crate::payoffs::PayoffSpec;

/// Relative slack on the eigenvalue box `[1/K, K]`.
const BOX_TOL: f64 = 1e-12;

/// Covariance control, constant on each interval of the breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseControl {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<SpdMatrix>,
    pub k_bound: f64,
}

impl PiecewiseControl {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<SpdMatrix>, k_bound: f64) -> Result<Self> {
        if pieces.is_empty() || breakpoints.len() != pieces.len() + 1 {
            return Err(Error::arg("need one more breakpoint than pieces"));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::arg("breakpoints must run from 0 to 1"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::arg("breakpoints must be strictly increasing"));
        }
        if !(k_bound >= 1.0 && k_bound.is_finite()) {
            return Err(Error::arg("K must be finite and at least 1"));
        }
        let d = pieces[0].dim();
        for p in &pieces {
            if p.dim() != d {
                return Err(Error::arg("pieces must share a dimension"));
            }
            for l in p.eigenvalues() {
                if l < (1.0 / k_bound) * (1.0 - BOX_TOL) || l > k_bound * (1.0 + BOX_TOL) {
                    return Err(Error::domain(format!("eigenvalue {l} outside [1/K, K]")));
                }
            }
        }
        Ok(PiecewiseControl { breakpoints, pieces, k_bound })
    }

    /// `m` equal intervals, every piece equal to `piece`.
    pub fn uniform(m: usize, piece: SpdMatrix, k_bound: f64) -> Result<Self> {
        let bp = (0..=m).map(|j| if j == m { 1.0 } else { j as f64 / m as f64 }).collect();
        Self::new(bp, vec![piece; m], k_bound)
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    /// `∫₀¹ Σ dt`.
    pub fn aggregate(&self) -> SpdMatrix {
        let mut acc = self.pieces[0].combine(0.0, &self.pieces[0], 0.0);
        for (w, p) in self.breakpoints.windows(2).zip(&self.pieces) {
            acc = acc.combine(1.0, p, w[1] - w[0]);
        }
        acc
    }
}

/// Payoff part, entropy part and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualValue {
    pub payoff_part: f64,
    pub entropy_part: f64,
    pub value: f64,
    pub stderr: f64,
}

/// `Σ_j (t_{j+1} − t_j) G(Σ_j)`.
pub fn specific_entropy(control: &PiecewiseControl) -> Result<f64> {
    let mut acc = 0.0;
    for (w, p) in control.breakpoints.windows(2).zip(&control.pieces) {
        acc += (w[1] - w[0]) * entropy_rate(p)?;
    }
    Ok(acc)
}

/// Smallest weight whose node must stay inside a sampled payoff's domain.
const SUPPORT_WEIGHT: f64 = 1e-15;

fn sampled_domain(f: &PayoffSpec) -> Option<Vec<(f64, f64)>> {
    match f {
        PayoffSpec::Sampled(s) => Some(s.axes.iter().map(|a| (a.lo, a.hi)).collect()),
        PayoffSpec::LinearAdjusted { base, .. } => sampled_domain(base),
        PayoffSpec::Barrier { inner, .. } => sampled_domain(inner),
        _ => None,
    }
}

/// Dual objective of a deterministic control: the terminal law is
/// `N(S₀, Σ̄)`, so the payoff part is a Gaussian integral. In d = 1 it is
/// computed by panels split at the payoff's kinks; in d = 2 by the tensor
/// product of `rule`.
pub fn objective_deterministic(f: &PayoffSpec, control: &PiecewiseControl, s0: &[f64], rule: &QuadRule) -> Result<DualValue> {
    let d = f.validate()?;
    if d != control.dim() || d != s0.len() {
        return Err(Error::arg("payoff, control and S0 dimensions differ"));
    }
    let root = spd_sqrt(&control.aggregate());
    let zmax = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .filter(|(_, w)| **w > SUPPORT_WEIGHT)
        .fold(0.0f64, |a, (z, _)| a.max(z.abs()));
    if let Some(dom) = sampled_domain(f) {
        for (k, (lo, hi)) in dom.iter().enumerate() {
            let reach = zmax * (0..d).map(|j| root.get(k, j).abs()).sum::<f64>();
            if s0[k] - reach < *lo || s0[k] + reach > *hi {
                return Err(Error::arg("quadrature support leaves the sampled payoff domain"));
            }
        }
    }
    let payoff_part = if d == 1 {
        let s = root.get(0, 0);
        let breaks: Vec<f64> = f.kinks_1d().iter().map(|k| (k - s0[0]) / s).collect();
        gaussian_expectation_1d(|z| f.eval(&[s0[0] + s * z]), &breaks)
    } else {
        rule.expect2(|z1, z2| {
            let x = root.mul_vec(&[z1, z2]);
            f.eval(&[s0[0] + x[0], s0[1] + x[1]])
        })
    };
    let entropy_part = specific_entropy(control)?;
    Ok(DualValue { payoff_part, entropy_part, value: payoff_part - entropy_part, stderr: 0.0 })
}

const FEEDBACK_BATCHES: usize = 100;

/// Monte Carlo dual objective of the feedback control `Σ*(t, X_t)`:
/// Euler steps with left-endpoint covariance and exact Gaussian increments.
/// Block `k` of `BLOCK` paths draws from `rng.derive(k)`.
pub fn objective_feedback(
    f: &PayoffSpec,
    field: &ControlField,
    s0: &[f64],
    euler_steps: usize,
    count: usize,
    rng: &RngStream,
) -> Result<DualValue> {
    let d = f.validate()?;
    if d != field.dim() || d != s0.len() {
        return Err(Error::arg("payoff, field and S0 dimensions differ"));
    }
    if euler_steps < 64 || count < 2 {
        return Err(Error::arg("need at least 64 Euler steps and 2 paths"));
    }
    let dt = 1.0 / euler_steps as f64;
    let sdt = dt.sqrt();
    let blocks = count.div_ceil(BLOCK);
    let per_block: Vec<Vec<(f64, f64)>> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut r = rng.derive(k as u64);
            let paths = BLOCK.min(count - k * BLOCK);
            let mut out = Vec::with_capacity(paths);
            for _ in 0..paths {
                let mut x = s0.to_vec();
                let mut ent = 0.0;
                for step in 0..euler_steps {
                    let t = step as f64 * dt;
                    if d == 1 {
                        let s = field.sigma_1d(t, x[0]);
                        ent += dt * 0.5 * (s - 1.0 - s.ln());
                        x[0] += s.sqrt() * sdt * r.standard_normal();
                    } else {
                        let s = field.sigma(t, &x);
                        ent += dt * entropy_rate(&s)?;
                        let root = spd_sqrt(&s);
                        let z = [r.standard_normal(), r.standard_normal()];
                        let dx = root.mul_vec(&z);
                        x[0] += sdt * dx[0];
                        x[1] += sdt * dx[1];
                    }
                }
                out.push((f.eval(&x), ent));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<(f64, f64)> = per_block.into_iter().flatten().collect();
    let nf = all.len() as f64;
    let payoff_part = all.iter().map(|p| p.0).sum::<f64>() / nf;
    let entropy_part = all.iter().map(|p| p.1).sum::<f64>() / nf;
    let nb = FEEDBACK_BATCHES.min(all.len());
    let size = all.len() / nb;
    let means: Vec<f64> = (0..nb)
        .map(|i| all[i * size..(i + 1) * size].iter().map(|p| p.0 - p.1).sum::<f64>() / size as f64)
        .collect();
    let mb = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|m| (m - mb) * (m - mb)).sum::<f64>() / (nb - 1) as f64;
    let value = payoff_part - entropy_part;
    if !value.is_finite() {
        return Err(Error::numerical(Module::Dual, "feedback objective is not finite"));
    }
    Ok(DualValue { payoff_part, entropy_part, value, stderr: (var / nb as f64).sqrt() })
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
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
    if f1 >= f2 { (x1, f1) } else { (x2, f2) }
}

/// Maximizes the deterministic dual objective over `m` equal pieces by
/// cyclic golden-section search on `log Σ_j ∈ [−log K, log K]` (d = 1).
/// Controls whose quadrature support leaves a sampled payoff's domain are
/// treated as infeasible.
pub fn optimize_piecewise(
    f: &PayoffSpec,
    m: usize,
    k_bound: f64,
    s0: &[f64],
    rule: &QuadRule,
) -> Result<(PiecewiseControl, DualValue)> {
    if f.validate()? != 1 || s0.len() != 1 {
        return Err(Error::arg("optimize_piecewise needs d = 1"));
    }
    if !(1..=8).contains(&m) || !(1.0..=100.0).contains(&k_bound) {
        return Err(Error::arg("need 1 ≤ m ≤ 8 and 1 ≤ K ≤ 100"));
    }
    let lk = k_bound.ln();
    let mut logs = vec![0.0; m];
    let eval = |logs: &[f64]| -> f64 {
        let pieces = logs.iter().map(|l| SpdMatrix::scalar(l.exp().clamp(1.0 / k_bound, k_bound))).collect();
        let bp = (0..=m).map(|j| if j == m { 1.0 } else { j as f64 / m as f64 }).collect();
        PiecewiseControl::new(bp, pieces, k_bound)
            .and_then(|c| objective_deterministic(f, &c, s0, rule))
            .map(|v| v.value)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = eval(&logs);
    for _cycle in 0..200 {
        let start = best;
        for j in 0..m {
            let (x, fx) = golden_max(
                |l| {
                    let mut trial = logs.clone();
                    trial[j] = l;
                    eval(&trial)
                },
                -lk,
                lk,
                1e-9,
            );
            if fx > best {
                best = fx;
                logs[j] = x;
            }
        }
        if best - start < 1e-8 {
            break;
        }
    }
    let pieces = logs.iter().map(|l| SpdMatrix::scalar(l.exp().clamp(1.0 / k_bound, k_bound))).collect();
    let control = PiecewiseControl::uniform(m, SpdMatrix::scalar(1.0), k_bound)
        .and_then(|c| PiecewiseControl::new(c.breakpoints, pieces, k_bound))?;
    let value = objective_deterministic(f, &control, s0, rule)?;
    Ok((control, value))
}

/// `dual − |b|²/(2n)`.
pub fn lower_bound_cn(dual_value: f64, b: &[f64], n: usize) -> f64 {
    dual_value - b.iter().map(|v| v * v).sum::<f64>() / (2.0 * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_hermite;

    #[test]
    fn entropy_examples() {
        let c = PiecewiseControl::uniform(1, SpdMatrix::scalar(2.0), 100.0).unwrap();
        assert!((specific_entropy(&c).unwrap() - 0.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
        let c = PiecewiseControl::new(vec![0.0, 0.5, 1.0], vec![SpdMatrix::scalar(2.0), SpdMatrix::scalar(0.5)], 100.0)
            .unwrap();
        assert!((specific_entropy(&c).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn put_under_identity() {
        let q = gauss_hermite(256).unwrap();
        let c = PiecewiseControl::uniform(1, SpdMatrix::scalar(1.0), 100.0).unwrap();
        let f = PayoffSpec::Put { strike: 1.0, weights: vec![1.0] };
        let v = objective_deterministic(&f, &c, &[0.0], &q).unwrap();
        assert!((v.value - 0.368_746_380_372_507_2).abs() < 1e-13, "{}", v.value);
    }

    #[test]
    fn lower_bound_arithmetic() {
        assert_eq!(lower_bound_cn(0.5, &[0.0], 3), 0.5);
        assert_eq!(lower_bound_cn(0.5, &[0.5], 2), 0.4375);
    }

    #[test]
    fn box_is_enforced() {
        assert!(PiecewiseControl::uniform(2, SpdMatrix::scalar(200.0), 100.0).is_err());
    }
}
