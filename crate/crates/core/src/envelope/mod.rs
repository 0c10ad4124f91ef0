//! Concave envelopes and smooth terminal conditions.
//!
//! The terminal condition of the limiting problem is built from
//! `ĥ = ½|x|² + (f − ½|x|²)^cav`, mollified by a Gaussian of width `δ`.
//! Mollification is an exact convolution of the piecewise-(multi)linear
//! interpolant of `ĥ`, extended beyond the grid by its boundary tangent.

mod hull;
mod io;

pub use io::{read_terminal, write_terminal};

use crate::error::{Error, Module, Result};
use crate::numerics::{norm_cdf, norm_pdf, Grid1D};
use crate::payoffs::{PayoffSpec, SampledPayoff};

/// Values on a 1D or 2D tensor grid (row-major, last axis fastest).
///
/// `padding` is the width of the band on each side of the grid that lies
/// outside the region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub axes: Vec<Grid1D>,
    pub values: Vec<f64>,
    pub padding: f64,
}

impl SampledFunction {
    pub fn new(axes: Vec<Grid1D>, values: Vec<f64>, padding: f64) -> Result<Self> {
        if !(1..=2).contains(&axes.len()) {
            return Err(Error::arg("sampled function must be 1D or 2D"));
        }
        for a in &axes {
            a.validate()?;
        }
        let n: usize = axes.iter().map(|a| a.count).product();
        if n != values.len() {
            return Err(Error::arg(format!("{} values for {} nodes", values.len(), n)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("sampled function has non-finite values"));
        }
        if !(padding >= 0.0) {
            return Err(Error::arg("padding must be non-negative"));
        }
        Ok(SampledFunction { axes, values, padding })
    }

    /// Samples `f` on the given axes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(axes: Vec<Grid1D>, padding: f64, f: F) -> Result<Self> {
        let values = node_points(&axes).iter().map(|x| f(x)).collect();
        Self::new(axes, values, padding)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of node `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].node(k)],
            _ => {
                let ny = self.axes[1].count;
                vec![self.axes[0].node(k / ny), self.axes[1].node(k % ny)]
            }
        }
    }

    /// Whether node `k` lies in the region of interest (outside the padding band).
    pub fn in_region(&self, k: usize) -> bool {
        let p = self.point(k);
        p.iter()
            .zip(&self.axes)
            .all(|(x, a)| *x >= a.lo + self.padding - 1e-12 && *x <= a.hi - self.padding + 1e-12)
    }

    /// Multilinear interpolation with constant extrapolation.
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

    /// Extremes of the discrete Hessian eigenvalues over interior nodes.
    pub fn hessian_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self.axes.len() {
            1 => {
                let s = self.axes[0].step();
                for w in self.values.windows(3) {
                    let d2 = (w[2] - 2.0 * w[1] + w[0]) / (s * s);
                    lo = lo.min(d2);
                    hi = hi.max(d2);
                }
            }
            _ => {
                let (nx, ny) = (self.axes[0].count, self.axes[1].count);
                let (sx, sy) = (self.axes[0].step(), self.axes[1].step());
                let v = &self.values;
                for i in 1..nx - 1 {
                    for j in 1..ny - 1 {
                        let (l, u) = hessian_eig_2d(v, ny, i, j, sx, sy);
                        lo = lo.min(l);
                        hi = hi.max(u);
                    }
                }
            }
        }
        (lo, hi)
    }
}

pub(crate) fn node_points(axes: &[Grid1D]) -> Vec<Vec<f64>> {
    match axes.len() {
        1 => axes[0].nodes().into_iter().map(|x| vec![x]).collect(),
        _ => {
            let ys = axes[1].nodes();
            axes[0]
                .nodes()
                .into_iter()
                .flat_map(|x| ys.iter().map(move |y| vec![x, *y]))
                .collect()
        }
    }
}

/// Eigenvalues `(min, max)` of the central-difference Hessian at `(i, j)`.
pub(crate) fn hessian_eig_2d(v: &[f64], ny: usize, i: usize, j: usize, sx: f64, sy: f64) -> (f64, f64) {
    let at = |a: usize, b: usize| v[a * ny + b];
    let fxx = (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / (sx * sx);
    let fyy = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (sy * sy);
    let fxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * sx * sy);
    let m = 0.5 * (fxx + fyy);
    let r = (0.25 * (fxx - fyy) * (fxx - fyy) + fxy * fxy).sqrt();
    (m - r, m + r)
}

/// Smallest concave function on the grid dominating `g` (exact on nodes).
pub fn concave_envelope(g: &SampledFunction) -> Result<SampledFunction> {
    let values = match g.axes.len() {
        1 => hull::upper_hull_1d(&g.axes[0].nodes(), &g.values),
        _ => match hull::upper_hull_2d(&g.axes[0].nodes(), &g.axes[1].nodes(), &g.values) {
            Some(v) => v,
            None => g.values.clone(),
        },
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(Module::Envelope, "envelope produced non-finite values"));
    }
    Ok(SampledFunction { axes: g.axes.clone(), values, padding: g.padding })
}

/// `ĥ = ½|x|² + (f − ½|x|²)^cav` on the grid of `f`.
pub fn shifted_envelope(f: &SampledFunction) -> Result<SampledFunction> {
    let half_sq: Vec<f64> = (0..f.len())
        .map(|k| 0.5 * f.point(k).iter().map(|x| x * x).sum::<f64>())
        .collect();
    let g: Vec<f64> = f.values.iter().zip(&half_sq).map(|(v, q)| v - q).collect();
    let env = concave_envelope(&SampledFunction { axes: f.axes.clone(), values: g, padding: f.padding })?;
    let values = env.values.iter().zip(&half_sq).map(|(e, q)| e + q).collect();
    Ok(SampledFunction { axes: f.axes.clone(), values, padding: f.padding })
}

/// `E[(δZ − a)⁺]`.
fn ramp_mean(a: f64, delta: f64) -> f64 {
    delta * norm_pdf(a / delta) - a * norm_cdf(-a / delta)
}

/// Weights `κ_m = E[hat((δZ)/s − m)]`, `m = 0..=M`, for convolving a
/// piecewise-linear interpolant with the `N(0, δ²)` density.
fn hat_kernel(delta: f64, s: f64) -> Vec<f64> {
    let m_max = (10.0 * delta / s).ceil() as usize + 1;
    let mut k = vec![0.0; m_max + 1];
    let mut tail = 0.0;
    for m in (1..=m_max).rev() {
        let a = m as f64 * s;
        k[m] = (ramp_mean(a - s, delta) - 2.0 * ramp_mean(a, delta) + ramp_mean(a + s, delta)) / s;
        tail += k[m];
    }
    k[0] = 1.0 - 2.0 * tail;
    k
}

/// Convolves one line of nodal values, extending linearly beyond both ends.
fn convolve_line(vals: &[f64], kernel: &[f64], out: &mut [f64]) {
    let n = vals.len() as isize;
    let left = vals[1] - vals[0];
    let right = vals[vals.len() - 1] - vals[vals.len() - 2];
    let ext = |j: isize| -> f64 {
        if j < 0 {
            vals[0] + j as f64 * left
        } else if j >= n {
            vals[(n - 1) as usize] + (j - n + 1) as f64 * right
        } else {
            vals[j as usize]
        }
    };
    for i in 0..n {
        let mut acc = 0.0;
        for m in (1..kernel.len()).rev() {
            let m = m as isize;
            acc += kernel[m as usize] * (ext(i - m) + ext(i + m));
        }
        out[i as usize] = acc + kernel[0] * vals[i as usize];
    }
}

/// Gaussian mollification `x ↦ E ĥ(x + δZ)` of the interpolant of `hhat`.
///
/// Requires `hhat.padding ≥ 6δ` so that the boundary extension does not
/// reach the region of interest.
pub fn mollify(hhat: &SampledFunction, delta: f64) -> Result<SampledFunction> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::arg(format!("mollifier width {delta} must be positive")));
    }
    if hhat.padding < 6.0 * delta {
        return Err(Error::Padding { required: 6.0 * delta, available: hhat.padding });
    }
    let mut values = hhat.values.clone();
    match hhat.axes.len() {
        1 => {
            let k = hat_kernel(delta, hhat.axes[0].step());
            convolve_line(&hhat.values, &k, &mut values);
        }
        _ => {
            let (nx, ny) = (hhat.axes[0].count, hhat.axes[1].count);
            let ky = hat_kernel(delta, hhat.axes[1].step());
            let kx = hat_kernel(delta, hhat.axes[0].step());
            let mut rows = vec![0.0; nx * ny];
            for i in 0..nx {
                convolve_line(&hhat.values[i * ny..(i + 1) * ny], &ky, &mut rows[i * ny..(i + 1) * ny]);
            }
            let mut col = vec![0.0; nx];
            let mut out = vec![0.0; nx];
            for j in 0..ny {
                for i in 0..nx {
                    col[i] = rows[i * ny + j];
                }
                convolve_line(&col, &kx, &mut out);
                for i in 0..nx {
                    values[i * ny + j] = out[i];
                }
            }
        }
    }
    Ok(SampledFunction { axes: hhat.axes.clone(), values, padding: hhat.padding })
}

/// Smooth terminal condition together with its certified constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTerminal {
    /// The terminal values `h`.
    pub h: SampledFunction,
    /// The shifted envelope `ĥ` on the same grid.
    pub envelope: Vec<f64>,
    pub delta: f64,
    /// Achieved `sup |h − ĥ|` over the grid.
    pub epsilon: f64,
    /// `D²h ≤ 1 − alpha`.
    pub alpha: f64,
    /// `D²h ≥ −2C`.
    pub c_semiconvex: f64,
    /// Weight `η` of the contraction `h = (1 − η)h_δ + σ`.
    pub shrink: f64,
    /// Constant `σ` of the contraction.
    pub shift: f64,
}

impl SmoothTerminal {
    /// The terminal values as a payoff, for use in expectations.
    pub fn as_payoff(&self) -> PayoffSpec {
        PayoffSpec::Sampled(SampledPayoff {
            axes: self.h.axes.clone(),
            values: self.h.values.clone(),
            declared_bounded: true,
        })
    }

    /// Builds from precomputed values, deriving the curvature constants.
    pub fn from_values(h: SampledFunction, envelope: Vec<f64>, delta: f64, shrink: f64, shift: f64) -> Result<Self> {
        if envelope.len() != h.len() {
            return Err(Error::arg("envelope and terminal sizes differ"));
        }
        let (lo, hi) = h.hessian_range();
        let alpha = 1.0 - hi;
        if !(alpha > 0.0) {
            return Err(Error::numerical(
                Module::Envelope,
                format!("terminal is not uniformly below unit curvature (max D² = {hi})"),
            ));
        }
        let epsilon = h.values.iter().zip(&envelope).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok(SmoothTerminal {
            h,
            envelope,
            delta,
            epsilon,
            alpha,
            c_semiconvex: (-0.5 * lo).max(0.0),
            shrink,
            shift,
        })
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Target for the curvature margin; the contraction stops once it is met.
const ALPHA_TARGET: f64 = 0.5;

/// Builds a smooth terminal `h` with `sup |h − ĥ| < epsilon` on `axes`.
///
/// Picks the largest `δ = 2^-k`, `k = 1..=12`, whose mollification error
/// spread is at most `epsilon`, then spends the remaining budget on a
/// contraction `h = (1 − η)h_δ + σ` that raises the curvature margin.
/// Linear parts of `f` are removed before the envelope and added back.
pub fn build_terminal(f: &PayoffSpec, epsilon: f64, axes: &[Grid1D], padding: f64) -> Result<SmoothTerminal> {
    let d = f.validate()?;
    if axes.len() != d {
        return Err(Error::arg("grid dimension does not match payoff"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::arg("epsilon must be positive"));
    }
    let (c0, slope, base) = f.split_linear();
    let sampled = SampledFunction::new(axes.to_vec(), base.sample_on(axes), padding)?;
    let hhat = shifted_envelope(&sampled)?;
    let mut best_spread = f64::INFINITY;
    let mut chosen = None;
    for k in 1..=12 {
        let delta = 0.5f64.powi(k);
        if padding < 6.0 * delta {
            continue;
        }
        let hd = mollify(&hhat, delta)?;
        let (lo, hi) = range(hd.values.iter().zip(&hhat.values).map(|(a, b)| a - b));
        best_spread = best_spread.min(hi - lo);
        if hi - lo <= epsilon {
            chosen = Some((delta, hd));
            break;
        }
    }
    let (delta, hd) = chosen.ok_or_else(|| {
        Error::numerical(
            Module::Envelope,
            format!("no mollifier width reaches epsilon {epsilon}; best distance {}", 0.5 * best_spread),
        )
    })?;
    let (_, hi_d2) = hd.hessian_range();
    let alpha_d = 1.0 - hi_d2;
    let needed = if alpha_d >= ALPHA_TARGET { 0.0 } else { 1.0 - (1.0 - ALPHA_TARGET) / (1.0 - alpha_d) };
    let q_range = |eta: f64| {
        let (lo, hi) = range(hd.values.iter().zip(&hhat.values).map(|(a, b)| eta * a - (a - b)));
        (lo, hi)
    };
    let budget = 2.0 * epsilon * (1.0 - 1e-6);
    let mut eta = needed;
    let (lo, hi) = q_range(eta);
    if hi - lo > budget {
        let (mut a, mut b) = (0.0, needed);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            let (lo, hi) = q_range(m);
            if hi - lo <= budget {
                a = m;
            } else {
                b = m;
            }
        }
        eta = a;
    }
    let (lo, hi) = q_range(eta);
    let shift = if eta > 0.0 { 0.5 * (lo + hi) } else { 0.0 };
    let linear = |k: usize| -> f64 {
        let p = sampled.point(k);
        c0 + slope.iter().zip(&p).map(|(c, x)| c * x).sum::<f64>()
    };
    let values: Vec<f64> = (0..hd.len()).map(|k| (1.0 - eta) * hd.values[k] + shift + linear(k)).collect();
    let envelope: Vec<f64> = (0..hd.len()).map(|k| hhat.values[k] + linear(k)).collect();
    let h = SampledFunction::new(axes.to_vec(), values, padding)?;
    let term = SmoothTerminal::from_values(h, envelope, delta, eta, shift)?;
    if term.epsilon >= epsilon {
        return Err(Error::numerical(
            Module::Envelope,
            format!("achieved distance {} does not beat epsilon {epsilon}", term.epsilon),
        ));
    }
    Ok(term)
}
