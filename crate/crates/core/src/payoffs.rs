//! Terminal payoff catalog and the structural-assumption validator.
//!
//! Catalog payoffs are evaluated in closed form; sampled payoffs are
//! multilinear interpolants on a grid with constant extrapolation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Grid1D;

/// Payoff given by nodal values on a 1D or 2D grid (row-major, last axis
/// fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledPayoff {
    pub axes: Vec<Grid1D>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub declared_bounded: bool,
}

impl SampledPayoff {
    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.axes.len()) {
            return Err(Error::arg("sampled payoff must be 1D or 2D"));
        }
        for a in &self.axes {
            a.validate()?;
        }
        let n: usize = self.axes.iter().map(|a| a.count).product();
        if n != self.values.len() {
            return Err(Error::arg(format!(
                "sampled payoff has {} values for {} nodes",
                self.values.len(),
                n
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("sampled payoff has non-finite values"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.axes.len() {
            1 => self.axes[0].interp(&self.values, x[0]),
            _ => {
                let (gx, gy) = (&self.axes[0], &self.axes[1]);
                let (i, s) = gx.locate(x[0]);
                let (j, t) = gy.locate(x[1]);
                let ny = gy.count;
                let v = |a: usize, b: usize| self.values[a * ny + b];
                let lo = v(i, j) + t * (v(i, j + 1) - v(i, j));
                let hi = v(i + 1, j) + t * (v(i + 1, j + 1) - v(i + 1, j));
                lo + s * (hi - lo)
            }
        }
    }
}

/// Terminal payoff `f: R^d → R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    /// `(K − Σ a_i |x_i|)⁺`.
    Put { strike: f64, weights: Vec<f64> },
    /// `min(K1, (Σ a_i |x_i| − K2)⁺)`.
    TruncatedCall { cap: f64, strike: f64, weights: Vec<f64> },
    /// `inner(x)` inside the closed ball of radius `radius`, zero outside.
    Barrier { inner: Box<PayoffSpec>, radius: f64 },
    /// `c0 + ⟨slope, x⟩ + base(x)`.
    LinearAdjusted { c0: f64, slope: Vec<f64>, base: Box<PayoffSpec> },
    Sampled(SampledPayoff),
}

fn weighted_abs(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, v)| a * v.abs()).sum()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl PayoffSpec {
    /// The identically zero payoff in dimension `d`.
    pub fn zero(d: usize) -> Self {
        PayoffSpec::Put { strike: 0.0, weights: vec![0.0; d] }
    }

    pub fn constant(c: f64, d: usize) -> Self {
        Self::linear(c, vec![0.0; d])
    }

    pub fn linear(c0: f64, slope: Vec<f64>) -> Self {
        let d = slope.len();
        PayoffSpec::LinearAdjusted { c0, slope, base: Box::new(Self::zero(d)) }
    }

    /// Dimension of the payoff after consistency checks.
    pub fn dim(&self) -> Result<usize> {
        self.validate()
    }

    /// Checks parameters and returns the dimension.
    pub fn validate(&self) -> Result<usize> {
        let check_weights = |w: &[f64]| -> Result<usize> {
            if !(1..=2).contains(&w.len()) {
                return Err(Error::arg("payoff dimension must be 1 or 2"));
            }
            if w.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::arg("payoff weights must be finite and non-negative"));
            }
            Ok(w.len())
        };
        match self {
            PayoffSpec::Put { strike, weights } => {
                if !(strike.is_finite() && *strike >= 0.0) {
                    return Err(Error::arg("put strike must be non-negative"));
                }
                check_weights(weights)
            }
            PayoffSpec::TruncatedCall { cap, strike, weights } => {
                if !(cap.is_finite() && strike.is_finite() && *cap >= 0.0) {
                    return Err(Error::arg("truncated call needs a finite non-negative cap"));
                }
                check_weights(weights)
            }
            PayoffSpec::Barrier { inner, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::arg("barrier radius must be positive"));
                }
                inner.validate()
            }
            PayoffSpec::LinearAdjusted { c0, slope, base } => {
                let d = base.validate()?;
                if slope.len() != d {
                    return Err(Error::arg("linear part dimension mismatch"));
                }
                if !c0.is_finite() || slope.iter().any(|v| !v.is_finite()) {
                    return Err(Error::arg("linear part must be finite"));
                }
                Ok(d)
            }
            PayoffSpec::Sampled(s) => {
                s.validate()?;
                Ok(s.axes.len())
            }
        }
    }

    /// Evaluates `f(x)`; `x.len()` must equal the payoff dimension.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PayoffSpec::Put { strike, weights } => (strike - weighted_abs(weights, x)).max(0.0),
            PayoffSpec::TruncatedCall { cap, strike, weights } => {
                (weighted_abs(weights, x) - strike).max(0.0).min(*cap)
            }
            PayoffSpec::Barrier { inner, radius } => {
                if norm(x) <= *radius {
                    inner.eval(x)
                } else {
                    0.0
                }
            }
            PayoffSpec::LinearAdjusted { c0, slope, base } => {
                c0 + slope.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + base.eval(x)
            }
            PayoffSpec::Sampled(s) => s.eval(x),
        }
    }

    /// Checked evaluation.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let d = self.validate()?;
        if x.len() != d {
            return Err(Error::arg(format!("point has dimension {}, payoff {d}", x.len())));
        }
        Ok(self.eval(x))
    }

    /// Splits off nested linear parts: `f = c0 + ⟨c, x⟩ + base`.
    pub fn split_linear(&self) -> (f64, Vec<f64>, &PayoffSpec) {
        match self {
            PayoffSpec::LinearAdjusted { c0, slope, base } => {
                let (b0, bc, inner) = base.split_linear();
                (c0 + b0, slope.iter().zip(&bc).map(|(a, b)| a + b).collect(), inner)
            }
            _ => {
                let d = self.validate().unwrap_or(1);
                (0.0, vec![0.0; d], self)
            }
        }
    }

    /// Values at every node of a 1D or 2D grid, row-major.
    pub fn sample_on(&self, axes: &[Grid1D]) -> Vec<f64> {
        match axes.len() {
            1 => axes[0].nodes().iter().map(|x| self.eval(&[*x])).collect(),
            _ => {
                let ys = axes[1].nodes();
                let mut out = Vec::with_capacity(axes[0].count * ys.len());
                for x in axes[0].nodes() {
                    for y in &ys {
                        out.push(self.eval(&[x, *y]));
                    }
                }
                out
            }
        }
    }

    /// Characteristic scale `K` used to pick candidate radii.
    pub fn scale(&self) -> f64 {
        let min_w = |w: &[f64]| w.iter().copied().filter(|a| *a > 0.0).fold(f64::INFINITY, f64::min);
        match self {
            PayoffSpec::Put { strike, weights } => {
                let m = min_w(weights);
                if m.is_finite() { strike / m } else { 0.0 }
            }
            PayoffSpec::TruncatedCall { cap, strike, weights } => {
                let m = min_w(weights);
                if m.is_finite() { (cap + strike.max(0.0)) / m } else { 0.0 }
            }
            PayoffSpec::Barrier { inner, radius } => radius.max(inner.scale()),
            PayoffSpec::LinearAdjusted { base, .. } => base.scale(),
            PayoffSpec::Sampled(s) => s
                .axes
                .iter()
                .map(|a| a.lo.abs().max(a.hi.abs()))
                .fold(0.0, f64::max),
        }
    }

    /// Lower bound on the distance from `x` to the set where the payoff may
    /// fail to be twice differentiable. Infinite when there is no such set.
    pub fn kink_distance(&self, x: &[f64]) -> f64 {
        let level = |w: &[f64], k: f64| {
            let wn = norm(w);
            let mut d = if wn > 0.0 { (weighted_abs(w, x) - k).abs() / wn } else { f64::INFINITY };
            for (a, v) in w.iter().zip(x) {
                if *a > 0.0 {
                    d = d.min(v.abs());
                }
            }
            d
        };
        match self {
            PayoffSpec::Put { strike, weights } => level(weights, *strike),
            PayoffSpec::TruncatedCall { cap, strike, weights } => {
                level(weights, *strike).min(level(weights, strike + cap))
            }
            PayoffSpec::Barrier { inner, radius } => {
                (norm(x) - radius).abs().min(inner.kink_distance(x))
            }
            PayoffSpec::LinearAdjusted { base, .. } => base.kink_distance(x),
            PayoffSpec::Sampled(_) => f64::INFINITY,
        }
    }

    /// Points where a one-dimensional payoff may fail to be smooth; every
    /// node for sampled payoffs.
    pub fn kinks_1d(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            PayoffSpec::Put { strike, weights } => {
                if weights[0] > 0.0 {
                    let k = strike / weights[0];
                    out.extend([-k, 0.0, k]);
                }
            }
            PayoffSpec::TruncatedCall { cap, strike, weights } => {
                if weights[0] > 0.0 {
                    let (a, b) = (strike / weights[0], (strike + cap) / weights[0]);
                    out.extend([-b, -a, 0.0, a, b]);
                }
            }
            PayoffSpec::Barrier { inner, radius } => {
                out.extend([-radius, *radius]);
                out.extend(inner.kinks_1d());
            }
            PayoffSpec::LinearAdjusted { base, .. } => out.extend(base.kinks_1d()),
            PayoffSpec::Sampled(s) => out.extend(s.axes[0].nodes()),
        }
        out
    }

    fn declared_unbounded(&self) -> bool {
        match self {
            PayoffSpec::Sampled(s) => !s.declared_bounded,
            PayoffSpec::Barrier { inner, .. } => inner.declared_unbounded(),
            PayoffSpec::LinearAdjusted { base, .. } => base.declared_unbounded(),
            _ => false,
        }
    }
}

/// What went wrong at a probe node.
#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// Largest Hessian eigenvalue exceeds `1 − α`.
    HessianBound { max_eigenvalue: f64 },
    /// Finite-difference gradient grows under refinement.
    GradientUnbounded { coarse: f64, fine: f64 },
    /// A sampled payoff was not declared bounded.
    UnboundedUndeclared,
    /// A barrier's inner payoff is negative inside the barrier.
    NegativeBarrierInner { value: f64 },
    /// The probe grid does not cover `[−2M, 2M]^d`.
    ProbeCoverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: Option<Vec<f64>>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::HessianBound { max_eigenvalue } => {
                write!(f, "hessian eigenvalue {max_eigenvalue:.6} exceeds 1 - alpha")?
            }
            ViolationKind::GradientUnbounded { coarse, fine } => {
                write!(f, "gradient grows under refinement ({coarse:.4} -> {fine:.4})")?
            }
            ViolationKind::UnboundedUndeclared => write!(f, "sampled payoff not declared bounded")?,
            ViolationKind::NegativeBarrierInner { value } => {
                write!(f, "barrier inner payoff negative ({value:.6})")?
            }
            ViolationKind::ProbeCoverage => write!(f, "probe grid does not cover [-2M, 2M]")?,
        }
        if let Some(x) = &self.location {
            write!(f, " at {x:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub passed: bool,
    pub radius: f64,
    pub alpha: f64,
    pub violations: Vec<Violation>,
    /// `sup |f|` over the probe nodes.
    pub bound_sup: f64,
    /// Number of nodes at which the Hessian was tested.
    pub nodes_checked: usize,
}

const HESSIAN_SLACK: f64 = 1e-6;

fn probe_points(probe: &[Grid1D]) -> Vec<Vec<f64>> {
    match probe.len() {
        1 => probe[0].nodes().into_iter().map(|x| vec![x]).collect(),
        _ => {
            let ys = probe[1].nodes();
            probe[0]
                .nodes()
                .into_iter()
                .flat_map(|x| ys.iter().map(move |y| vec![x, *y]))
                .collect()
        }
    }
}

fn max_hessian_eigenvalue(f: &PayoffSpec, x: &[f64], h: &[f64]) -> f64 {
    let fx = f.eval(x);
    if x.len() == 1 {
        return (f.eval(&[x[0] + h[0]]) - 2.0 * fx + f.eval(&[x[0] - h[0]])) / (h[0] * h[0]);
    }
    let e = |dx: f64, dy: f64| f.eval(&[x[0] + dx, x[1] + dy]);
    let fxx = (e(h[0], 0.0) - 2.0 * fx + e(-h[0], 0.0)) / (h[0] * h[0]);
    let fyy = (e(0.0, h[1]) - 2.0 * fx + e(0.0, -h[1])) / (h[1] * h[1]);
    let fxy = (e(h[0], h[1]) - e(h[0], -h[1]) - e(-h[0], h[1]) + e(-h[0], -h[1]))
        / (4.0 * h[0] * h[1]);
    let m = 0.5 * (fxx + fyy);
    let r = (0.25 * (fxx - fyy) * (fxx - fyy) + fxy * fxy).sqrt();
    m + r
}

/// Probes the structural assumption on `f`: bounded, and outside the ball
/// of radius `radius` twice differentiable with bounded gradient and
/// Hessian at most `1 − alpha`.
///
/// Derivatives are centred finite differences on `probe`; nodes whose
/// stencil meets a known kink, the ball, or the probe boundary are skipped.
pub fn validate_assumption(
    f: &PayoffSpec,
    radius: f64,
    alpha: f64,
    probe: &[Grid1D],
) -> Result<AssumptionReport> {
    let d = f.validate()?;
    if probe.len() != d {
        return Err(Error::arg("probe dimension does not match payoff"));
    }
    if !(radius >= 0.0 && radius.is_finite()) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::arg("need radius ≥ 0 and alpha in (0, 1]"));
    }
    for g in probe {
        g.validate()?;
    }
    let mut violations = Vec::new();
    if f.declared_unbounded() {
        violations.push(Violation { location: None, kind: ViolationKind::UnboundedUndeclared });
    }
    if probe.iter().any(|g| g.lo > -2.0 * radius || g.hi < 2.0 * radius) {
        violations.push(Violation { location: None, kind: ViolationKind::ProbeCoverage });
    }
    let steps: Vec<f64> = probe.iter().map(|g| g.step()).collect();
    let hmax = steps.iter().fold(0.0f64, |a, b| a.max(*b));
    let guard = hmax * (d as f64).sqrt() * (1.0 + 1e-9);
    let mut bound_sup = 0.0f64;
    let mut nodes_checked = 0;
    let neg_barrier = |x: &[f64], violations: &mut Vec<Violation>| {
        let mut node = f;
        while let PayoffSpec::LinearAdjusted { base, .. } = node {
            node = base;
        }
        if let PayoffSpec::Barrier { inner, radius: r } = node {
            if norm(x) <= *r {
                let v = inner.eval(x);
                if v < 0.0 {
                    violations.push(Violation {
                        location: Some(x.to_vec()),
                        kind: ViolationKind::NegativeBarrierInner { value: v },
                    });
                }
            }
        }
    };
    for x in probe_points(probe) {
        let fx = f.eval(&x);
        bound_sup = bound_sup.max(fx.abs());
        neg_barrier(&x, &mut violations);
        let interior = x
            .iter()
            .zip(probe)
            .all(|(v, g)| *v - g.step() >= g.lo - 1e-12 && *v + g.step() <= g.hi + 1e-12);
        if !interior || norm(&x) - guard <= radius || f.kink_distance(&x) <= guard {
            continue;
        }
        nodes_checked += 1;
        let lam = max_hessian_eigenvalue(f, &x, &steps);
        if lam > 1.0 - alpha + HESSIAN_SLACK {
            violations.push(Violation {
                location: Some(x.clone()),
                kind: ViolationKind::HessianBound { max_eigenvalue: lam },
            });
        }
        for k in 0..d {
            let h = steps[k];
            let shifted = |s: f64| {
                let mut y = x.clone();
                y[k] += s;
                f.eval(&y)
            };
            let coarse = (shifted(h) - shifted(-h)).abs() / (2.0 * h);
            let fine = (shifted(0.5 * h) - shifted(-0.5 * h)).abs() / h;
            if fine > 1.5 * coarse + 1e-6 && fine * h > 1e-9 {
                violations.push(Violation {
                    location: Some(x.clone()),
                    kind: ViolationKind::GradientUnbounded { coarse, fine },
                });
            }
        }
    }
    Ok(AssumptionReport {
        passed: violations.is_empty(),
        radius,
        alpha,
        violations,
        bound_sup,
        nodes_checked,
    })
}

/// Tries radii `K + 1`, `2K`, `4K` (with `K` the payoff scale) on probe grids
/// over `[−2M, 2M]^d` and returns the first that passes.
pub fn find_assumption_radius(
    f: &PayoffSpec,
    alpha: f64,
    step: f64,
) -> Result<(Option<f64>, Vec<AssumptionReport>)> {
    let d = f.validate()?;
    let k = f.scale();
    let mut reports = Vec::new();
    let mut tried: Vec<f64> = Vec::new();
    for m in [k + 1.0, 2.0 * k, 4.0 * k] {
        if !(m > 0.0) || tried.contains(&m) {
            continue;
        }
        tried.push(m);
        let g = Grid1D::with_step(-2.0 * m, 2.0 * m, step)?;
        let report = validate_assumption(f, m, alpha, &vec![g; d])?;
        let ok = report.passed;
        reports.push(report);
        if ok {
            return Ok((Some(m), reports));
        }
    }
    Ok((None, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn put1() -> PayoffSpec {
        PayoffSpec::Put { strike: 1.0, weights: vec![1.0] }
    }

    #[test]
    fn catalog_values() {
        assert_eq!(put1().eval(&[0.25]), 0.75);
        assert_eq!(put1().eval(&[-3.0]), 0.0);
        let tc = PayoffSpec::TruncatedCall { cap: 1.0, strike: 0.5, weights: vec![1.0, 1.0] };
        assert_eq!(tc.eval(&[1.0, 1.0]), 1.0);
        assert_eq!(tc.eval(&[0.5, 0.25]), 0.25);
        let bar = PayoffSpec::Barrier { inner: Box::new(PayoffSpec::constant(2.0, 1)), radius: 1.0 };
        assert_eq!(bar.eval(&[1.0]), 2.0);
        assert_eq!(bar.eval(&[1.0 + 1e-12]), 0.0);
    }

    #[test]
    fn zero_and_constant() {
        assert_eq!(PayoffSpec::zero(2).eval(&[3.0, -4.0]), 0.0);
        assert_eq!(PayoffSpec::constant(1.5, 1).eval(&[7.0]), 1.5);
    }

    #[test]
    fn split_nested_linear() {
        let f = PayoffSpec::LinearAdjusted {
            c0: 1.0,
            slope: vec![2.0],
            base: Box::new(PayoffSpec::LinearAdjusted { c0: 0.5, slope: vec![-1.0], base: Box::new(put1()) }),
        };
        let (c0, c, base) = f.split_linear();
        assert_eq!(c0, 1.5);
        assert_eq!(c, vec![1.0]);
        assert_eq!(base, &put1());
    }

    #[test]
    fn put_passes_at_k_plus_one() {
        let (m, reports) = find_assumption_radius(&put1(), 0.5, 1.0 / 16.0).unwrap();
        assert_eq!(m, Some(2.0));
        assert!(reports[0].nodes_checked > 0);
    }

    #[test]
    fn convex_quadratic_violates() {
        let g = Grid1D::with_step(-6.0, 6.0, 0.05).unwrap();
        let values: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        let f = PayoffSpec::Sampled(SampledPayoff { axes: vec![g], values, declared_bounded: true });
        let r = validate_assumption(&f, 1.0, 0.5, &[Grid1D::with_step(-3.0, 3.0, 0.05).unwrap()]).unwrap();
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| matches!(v.kind, ViolationKind::HessianBound { .. })));
    }

    #[test]
    fn undeclared_sampled_is_flagged() {
        let g = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let f = PayoffSpec::Sampled(SampledPayoff { axes: vec![g], values: vec![0.0; 3], declared_bounded: false });
        let r = validate_assumption(&f, 0.5, 0.5, &[Grid1D::new(-1.0, 1.0, 21).unwrap()]).unwrap();
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::UnboundedUndeclared));
    }
}
