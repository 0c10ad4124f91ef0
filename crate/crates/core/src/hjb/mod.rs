//! Backward solver for `∂ₜu = ½ log det(I − ∇²u)`, `u(1,·) = h`, and the
//! quantities derived from its solution: the feedback covariance
//! `Σ* = (I − ∇²u)⁻¹` and the hedge ratio `∇u`.

mod io;

pub use io::{read_surface, write_surface};

use crate::envelope::{hessian_eig_2d, SmoothTerminal};
use crate::error::{Error, Module, Result};
use crate::numerics::{Grid1D, SpdMatrix};

/// Safety factor in the explicit time-step restriction.
pub const CFL_SAFETY: f64 = 0.9;

/// Fraction of clamped node updates above which a warning is recorded.
const CLAMP_WARN_FRACTION: f64 = 1e-3;

/// Solution of the Cauchy problem on a time × space grid.
///
/// `values` holds `n_slices + 1` stored time slices `t_j = j / n_slices`,
/// each row-major over the space axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub times: Grid1D,
    pub axes: Vec<Grid1D>,
    pub values: Vec<f64>,
    /// Curvature margin inherited from the terminal.
    pub alpha: f64,
    /// Semiconvexity constant inherited from the terminal.
    pub c_semiconvex: f64,
    /// Margin observed on the solution: `D²u ≤ 1 − alpha_observed`.
    pub alpha_observed: f64,
    /// Largest one-sided residual `|Δu/Δτ − ½ log(1 − D²u)|` over the
    /// explicit steps (solver output) or the stored slices (other builders).
    pub residual_max: f64,
    /// Number of explicit steps in the march.
    pub n_t: usize,
    pub clamp_fraction: f64,
    pub warnings: Vec<String>,
}

/// Boundary treatment for the explicit march.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Second difference at a boundary node copied from its interior neighbour.
    #[default]
    CopyCurvature,
}

impl ValueSurface {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn n_slices(&self) -> usize {
        self.times.count - 1
    }

    pub fn nodes_per_slice(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let n = self.nodes_per_slice();
        &self.values[j * n..(j + 1) * n]
    }

    /// Stored slice index and weight for time `t` (clamped to `[0, 1]`).
    fn time_weights(&self, t: f64) -> (usize, f64) {
        self.times.locate(t.clamp(0.0, 1.0))
    }

    /// `u(t, x)` by linear interpolation in time and space (d = 1) or
    /// bilinear in space (d = 2).
    pub fn value_at(&self, t: f64, x: &[f64]) -> f64 {
        let (j, w) = self.time_weights(t);
        let a = self.space_interp(self.slice(j), x);
        if w == 0.0 {
            return a;
        }
        let b = self.space_interp(self.slice(j + 1), x);
        a + w * (b - a)
    }

    fn space_interp(&self, v: &[f64], x: &[f64]) -> f64 {
        match self.axes.len() {
            1 => self.axes[0].interp(v, x[0]),
            _ => {
                let (gx, gy) = (&self.axes[0], &self.axes[1]);
                let (i, s) = gx.locate(x[0]);
                let (j, t) = gy.locate(x[1]);
                let ny = gy.count;
                let at = |a: usize, b: usize| v[a * ny + b];
                let lo = at(i, j) + t * (at(i, j + 1) - at(i, j));
                let hi = at(i + 1, j) + t * (at(i + 1, j + 1) - at(i + 1, j));
                lo + s * (hi - lo)
            }
        }
    }

    /// Largest discrete Hessian eigenvalue over interior nodes and stored slices.
    pub fn max_curvature(&self) -> f64 {
        (0..=self.n_slices()).map(|j| self.slice_curvature(j).1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(min, max)` discrete Hessian eigenvalue on slice `j`.
    pub fn slice_curvature(&self, j: usize) -> (f64, f64) {
        let v = self.slice(j);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match self.axes.len() {
            1 => {
                let s = self.axes[0].step();
                for w in v.windows(3) {
                    let d2 = (w[2] - 2.0 * w[1] + w[0]) / (s * s);
                    lo = lo.min(d2);
                    hi = hi.max(d2);
                }
            }
            _ => {
                let (nx, ny) = (self.axes[0].count, self.axes[1].count);
                let (sx, sy) = (self.axes[0].step(), self.axes[1].step());
                for i in 1..nx - 1 {
                    for k in 1..ny - 1 {
                        let (l, u) = hessian_eig_2d(v, ny, i, k, sx, sy);
                        lo = lo.min(l);
                        hi = hi.max(u);
                    }
                }
            }
        }
        (lo, hi)
    }
}

/// Smallest multiple of `n_slices` satisfying the explicit step restriction.
pub fn required_steps(alpha: f64, dx: f64, n_slices: usize) -> usize {
    let min = (1.0 / (CFL_SAFETY * alpha * dx * dx)).ceil() as usize;
    min.div_ceil(n_slices).max(1) * n_slices
}

fn second_differences(u: &[f64], inv_dx2: f64, out: &mut [f64]) {
    let n = u.len();
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
}

/// `−½ log(1 − q)`.
fn rate(q: f64) -> f64 {
    -0.5 * (-q).ln_1p()
}

/// Explicit monotone march in time to maturity from the terminal `h`.
///
/// `n_t` must be a multiple of `n_slices` and satisfy
/// `1/n_t ≤ 0.9·alpha·Δx²`; the second difference is clamped at
/// `1 − alpha/2` and every clamp is counted.
pub fn solve_cauchy_1d(h: &SmoothTerminal, n_t: usize, n_slices: usize, _bc: BoundaryMode) -> Result<ValueSurface> {
    if h.h.dim() != 1 {
        return Err(Error::arg("solve_cauchy_1d needs a one-dimensional terminal"));
    }
    if !(h.alpha > 0.0) {
        return Err(Error::domain("terminal curvature margin must be positive"));
    }
    if n_slices == 0 || n_t % n_slices != 0 {
        return Err(Error::arg(format!("n_t = {n_t} is not a multiple of n_slices = {n_slices}")));
    }
    let grid = h.h.axes[0];
    if grid.count < 3 {
        return Err(Error::arg("grid needs at least three nodes"));
    }
    let dx = grid.step();
    let dtau = 1.0 / n_t as f64;
    if dtau > CFL_SAFETY * h.alpha * dx * dx {
        return Err(Error::Cfl { required: required_steps(h.alpha, dx, n_slices), given: n_t });
    }
    let n = grid.count;
    let cap = 1.0 - 0.5 * h.alpha;
    let inv_dx2 = 1.0 / (dx * dx);
    let per_slice = n_t / n_slices;
    let mut values = vec![0.0; (n_slices + 1) * n];
    values[n_slices * n..].copy_from_slice(&h.h.values);
    let mut u = h.h.values.clone();
    let mut d2 = vec![0.0; n];
    let mut clamps = 0usize;
    let mut max_d2 = f64::NEG_INFINITY;
    let mut prev_rate = vec![f64::NAN; n];
    let mut residual_max = 0.0f64;
    for step in 0..n_t {
        second_differences(&u, inv_dx2, &mut d2);
        for i in 0..n {
            let q = d2[i];
            let interior = i > 0 && i < n - 1;
            if interior {
                max_d2 = max_d2.max(q);
                if step > 0 {
                    residual_max = residual_max.max((prev_rate[i] - rate(q.min(1.0 - f64::EPSILON))).abs());
                }
            }
            let q = if q > cap {
                clamps += 1;
                cap
            } else {
                q
            };
            prev_rate[i] = rate(q);
            u[i] += dtau * prev_rate[i];
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(Module::Hjb, format!("non-finite values after step {}", step + 1)));
        }
        if (step + 1) % per_slice == 0 {
            let j = n_slices - (step + 1) / per_slice;
            values[j * n..(j + 1) * n].copy_from_slice(&u);
        }
    }
    second_differences(&u, inv_dx2, &mut d2);
    for i in 1..n - 1 {
        max_d2 = max_d2.max(d2[i]);
        residual_max = residual_max.max((prev_rate[i] - rate(d2[i].min(1.0 - f64::EPSILON))).abs());
    }
    let alpha_observed = 1.0 - max_d2;
    if alpha_observed < 0.5 * h.alpha {
        return Err(Error::numerical(
            Module::Hjb,
            format!("curvature margin degraded to {alpha_observed} (terminal {})", h.alpha),
        ));
    }
    let clamp_fraction = clamps as f64 / (n_t as f64 * n as f64);
    let mut warnings = Vec::new();
    if clamp_fraction > CLAMP_WARN_FRACTION {
        warnings.push(format!("curvature clamp active on {:.3}% of node updates", 100.0 * clamp_fraction));
    }
    let surface = ValueSurface {
        times: Grid1D::new(0.0, 1.0, n_slices + 1)?,
        axes: vec![grid],
        values,
        alpha: h.alpha,
        c_semiconvex: h.c_semiconvex,
        alpha_observed,
        residual_max,
        n_t,
        clamp_fraction,
        warnings,
    };
    Ok(surface)
}

/// Closed-form solution `½a x² + b x + c − ((1−t)/2) ln(1−a)` for a
/// quadratic terminal.
pub fn solve_quadratic_oracle(a: f64, b: f64, c: f64, t: f64, x: f64) -> Result<f64> {
    if !(a < 1.0) {
        return Err(Error::domain(format!("quadratic coefficient {a} ≥ 1 loses ellipticity")));
    }
    Ok(0.5 * a * x * x + b * x + c - 0.5 * (1.0 - t) * (-a).ln_1p())
}

/// Surface built from the closed form on the given grids.
pub fn quadratic_oracle_surface(a: f64, b: f64, c: f64, axis: Grid1D, n_slices: usize) -> Result<ValueSurface> {
    let times = Grid1D::new(0.0, 1.0, n_slices + 1)?;
    let xs = axis.nodes();
    let mut values = Vec::with_capacity((n_slices + 1) * xs.len());
    for j in 0..=n_slices {
        let t = times.node(j);
        for x in &xs {
            values.push(solve_quadratic_oracle(a, b, c, t, *x)?);
        }
    }
    let alpha = 1.0 - a;
    let mut s = ValueSurface {
        times,
        axes: vec![axis],
        values,
        alpha,
        c_semiconvex: (-0.5 * a).max(0.0),
        alpha_observed: alpha,
        residual_max: 0.0,
        n_t: n_slices,
        clamp_fraction: 0.0,
        warnings: Vec::new(),
    };
    s.residual_max = pde_residual(&s);
    Ok(s)
}

/// Signed residual `(u_j − u_{j−1})/Δt − ½ log det(I − D²u_j)` at every
/// interior node of every stored slice `j ≥ 1`, slice-major.
pub fn pde_residual_field(u: &ValueSurface) -> Vec<f64> {
    let dt = u.times.step();
    let ns = u.n_slices();
    let mut out = Vec::new();
    match u.axes.len() {
        1 => {
            let n = u.axes[0].count;
            let s = u.axes[0].step();
            for j in 1..=ns {
                let (cur, prev) = (u.slice(j), u.slice(j - 1));
                for i in 1..n - 1 {
                    let d2 = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / (s * s);
                    out.push((cur[i] - prev[i]) / dt - 0.5 * (-d2).ln_1p());
                }
            }
        }
        _ => {
            let (nx, ny) = (u.axes[0].count, u.axes[1].count);
            let (sx, sy) = (u.axes[0].step(), u.axes[1].step());
            for j in 1..=ns {
                let (cur, prev) = (u.slice(j), u.slice(j - 1));
                let at = |a: usize, b: usize| cur[a * ny + b];
                for i in 1..nx - 1 {
                    for k in 1..ny - 1 {
                        let fxx = (at(i + 1, k) - 2.0 * at(i, k) + at(i - 1, k)) / (sx * sx);
                        let fyy = (at(i, k + 1) - 2.0 * at(i, k) + at(i, k - 1)) / (sy * sy);
                        let fxy = (at(i + 1, k + 1) - at(i + 1, k - 1) - at(i - 1, k + 1) + at(i - 1, k - 1))
                            / (4.0 * sx * sy);
                        let det = (1.0 - fxx) * (1.0 - fyy) - fxy * fxy;
                        out.push((at(i, k) - prev[i * ny + k]) / dt - 0.5 * det.ln());
                    }
                }
            }
        }
    }
    out
}

/// Maximum absolute residual of the discrete equation on the stored slices.
pub fn pde_residual(u: &ValueSurface) -> f64 {
    pde_residual_field(u).iter().fold(0.0, |a, r| a.max(r.abs()))
}

/// Feedback covariance `Σ* = (I − D²u)⁻¹` at the nodes of every stored slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub times: Grid1D,
    pub axes: Vec<Grid1D>,
    /// One entry per node in d = 1; `[s11, s12, s22]` per node in d = 2.
    pub values: Vec<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl ControlField {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn stride(&self) -> usize {
        if self.axes.len() == 1 { 1 } else { 3 }
    }

    fn per_slice(&self) -> usize {
        self.axes.iter().map(|a| a.count).product::<usize>() * self.stride()
    }

    /// Scalar `Σ*(t, x)` in d = 1, linear in time and space.
    pub fn sigma_1d(&self, t: f64, x: f64) -> f64 {
        let (j, w) = self.times.locate(t.clamp(0.0, 1.0));
        let n = self.per_slice();
        let g = &self.axes[0];
        let a = g.interp(&self.values[j * n..(j + 1) * n], x);
        if w == 0.0 {
            return a;
        }
        let b = g.interp(&self.values[(j + 1) * n..(j + 2) * n], x);
        a + w * (b - a)
    }

    /// `Σ*(t, x)` at a stored slice and node.
    pub fn at_node(&self, slice: usize, node: usize) -> SpdMatrix {
        let base = slice * self.per_slice() + node * self.stride();
        if self.stride() == 1 {
            SpdMatrix::scalar(self.values[base])
        } else {
            let v = &self.values[base..base + 3];
            SpdMatrix::from_nearly_symmetric(2, vec![v[0], v[1], v[1], v[2]])
        }
    }

    /// `Σ*(t, x)` with bilinear interpolation in space (d = 2), nearest
    /// stored slice at or after `t` blended linearly in time.
    pub fn sigma(&self, t: f64, x: &[f64]) -> SpdMatrix {
        if self.stride() == 1 {
            return SpdMatrix::scalar(self.sigma_1d(t, x[0]));
        }
        let (j, w) = self.times.locate(t.clamp(0.0, 1.0));
        let (gx, gy) = (&self.axes[0], &self.axes[1]);
        let (i, s) = gx.locate(x[0]);
        let (k, r) = gy.locate(x[1]);
        let ny = gy.count;
        let n = self.per_slice();
        let mut e = [0.0; 3];
        for (jj, wt) in [(j, 1.0 - w), (j + 1, w)] {
            if wt == 0.0 {
                continue;
            }
            for c in 0..3 {
                let at = |a: usize, b: usize| self.values[jj * n + (a * ny + b) * 3 + c];
                let lo = at(i, k) + r * (at(i, k + 1) - at(i, k));
                let hi = at(i + 1, k) + r * (at(i + 1, k + 1) - at(i + 1, k));
                e[c] += wt * (lo + s * (hi - lo));
            }
        }
        SpdMatrix::from_nearly_symmetric(2, vec![e[0], e[1], e[1], e[2]])
    }
}

const CONTROL_TOL: f64 = 1e-6;

/// Extracts `Σ* = (I − D²u)⁻¹` nodewise and checks the eigenvalue bounds
/// `[1/(1+2C), max(C, 2/α)/2]`. Boundary nodes reuse the neighbouring
/// interior Hessian.
pub fn extract_control(u: &ValueSurface) -> Result<ControlField> {
    let c = u.c_semiconvex;
    let lower_bound = 1.0 / (1.0 + 2.0 * c);
    let upper_bound = 0.5 * c.max(2.0 / u.alpha);
    let mut values = Vec::new();
    let check = |lam: f64, slice: usize, node: usize| -> Result<()> {
        if !(lam >= lower_bound - CONTROL_TOL && lam <= upper_bound + CONTROL_TOL) {
            return Err(Error::numerical(
                Module::Hjb,
                format!(
                    "control eigenvalue {lam} outside [{lower_bound}, {upper_bound}] at slice {slice}, node {node}"
                ),
            ));
        }
        Ok(())
    };
    match u.axes.len() {
        1 => {
            let n = u.axes[0].count;
            let inv = 1.0 / (u.axes[0].step() * u.axes[0].step());
            let mut d2 = vec![0.0; n];
            for j in 0..=u.n_slices() {
                second_differences(u.slice(j), inv, &mut d2);
                for (i, q) in d2.iter().enumerate() {
                    let sigma = 1.0 / (1.0 - q);
                    check(sigma, j, i)?;
                    values.push(sigma);
                }
            }
        }
        _ => {
            let (nx, ny) = (u.axes[0].count, u.axes[1].count);
            let (sx, sy) = (u.axes[0].step(), u.axes[1].step());
            for j in 0..=u.n_slices() {
                let v = u.slice(j);
                let at = |a: usize, b: usize| v[a * ny + b];
                for i in 0..nx {
                    for k in 0..ny {
                        let (ii, kk) = (i.clamp(1, nx - 2), k.clamp(1, ny - 2));
                        let fxx = (at(ii + 1, kk) - 2.0 * at(ii, kk) + at(ii - 1, kk)) / (sx * sx);
                        let fyy = (at(ii, kk + 1) - 2.0 * at(ii, kk) + at(ii, kk - 1)) / (sy * sy);
                        let fxy = (at(ii + 1, kk + 1) - at(ii + 1, kk - 1) - at(ii - 1, kk + 1)
                            + at(ii - 1, kk - 1))
                            / (4.0 * sx * sy);
                        let (a, b, d) = (1.0 - fxx, -fxy, 1.0 - fyy);
                        let det = a * d - b * b;
                        if !(det > 0.0) {
                            return Err(Error::numerical(Module::Hjb, "I − D²u is singular"));
                        }
                        let inv = [d / det, -b / det, a / det];
                        let m = SpdMatrix::from_nearly_symmetric(2, vec![inv[0], inv[1], inv[1], inv[2]]);
                        for lam in m.eigenvalues() {
                            check(lam, j, i * ny + k)?;
                        }
                        values.extend_from_slice(&inv);
                    }
                }
            }
        }
    }
    Ok(ControlField { times: u.times, axes: u.axes.clone(), values, lower_bound, upper_bound })
}

fn node_gradient_1d(v: &[f64], i: usize, dx: f64) -> f64 {
    let n = v.len();
    if i == 0 {
        (v[1] - v[0]) / dx
    } else if i == n - 1 {
        (v[n - 1] - v[n - 2]) / dx
    } else {
        (v[i + 1] - v[i - 1]) / (2.0 * dx)
    }
}

fn gradient_slice(u: &ValueSurface, j: usize, x: &[f64]) -> Vec<f64> {
    let v = u.slice(j);
    match u.axes.len() {
        1 => {
            let g = &u.axes[0];
            let (i, s) = g.locate(x[0]);
            let a = node_gradient_1d(v, i, g.step());
            let b = node_gradient_1d(v, i + 1, g.step());
            vec![a + s * (b - a)]
        }
        _ => {
            let (gx, gy) = (&u.axes[0], &u.axes[1]);
            let (nx, ny) = (gx.count, gy.count);
            let (i, s) = gx.locate(x[0]);
            let (k, r) = gy.locate(x[1]);
            let grad = |a: usize, b: usize| -> [f64; 2] {
                let col: Vec<f64> = (0..nx).map(|m| v[m * ny + b]).collect();
                let row = &v[a * ny..(a + 1) * ny];
                [node_gradient_1d(&col, a, gx.step()), node_gradient_1d(row, b, gy.step())]
            };
            let (g00, g01, g10, g11) = (grad(i, k), grad(i, k + 1), grad(i + 1, k), grad(i + 1, k + 1));
            (0..2)
                .map(|c| {
                    let lo = g00[c] + r * (g01[c] - g00[c]);
                    let hi = g10[c] + r * (g11[c] - g10[c]);
                    lo + s * (hi - lo)
                })
                .collect()
        }
    }
}

/// `∇u(t, x)` from centred differences, interpolated in time and space.
/// Returns the gradient and whether `x` had to be clamped into the grid.
pub fn gradient_at(u: &ValueSurface, t: f64, x: &[f64]) -> (Vec<f64>, bool) {
    let clamped = x.iter().zip(&u.axes).any(|(v, a)| !a.contains(*v));
    let (j, w) = u.time_weights(t);
    let a = gradient_slice(u, j, x);
    if w == 0.0 {
        return (a, clamped);
    }
    let b = gradient_slice(u, j + 1, x);
    (a.iter().zip(&b).map(|(p, q)| p + w * (q - p)).collect(), clamped)
}

/// `u(t, (x, y)) = u1(t, x) + u2(t, y)` for one-dimensional surfaces on a
/// shared time grid.
pub fn compose_separable(u1: &ValueSurface, u2: &ValueSurface) -> Result<ValueSurface> {
    if u1.dim() != 1 || u2.dim() != 1 {
        return Err(Error::arg("compose_separable needs one-dimensional surfaces"));
    }
    if u1.times != u2.times {
        return Err(Error::arg("surfaces do not share a time grid"));
    }
    let (nx, ny) = (u1.axes[0].count, u2.axes[0].count);
    let mut values = Vec::with_capacity((u1.n_slices() + 1) * nx * ny);
    for j in 0..=u1.n_slices() {
        let (a, b) = (u1.slice(j), u2.slice(j));
        for p in a {
            for q in b {
                values.push(p + q);
            }
        }
    }
    let mut s = ValueSurface {
        times: u1.times,
        axes: vec![u1.axes[0], u2.axes[0]],
        values,
        alpha: u1.alpha.min(u2.alpha),
        c_semiconvex: u1.c_semiconvex.max(u2.c_semiconvex),
        alpha_observed: u1.alpha_observed.min(u2.alpha_observed),
        residual_max: 0.0,
        n_t: u1.n_t.max(u2.n_t),
        clamp_fraction: u1.clamp_fraction.max(u2.clamp_fraction),
        warnings: u1.warnings.iter().chain(&u2.warnings).cloned().collect(),
    };
    s.residual_max = pde_residual(&s);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::SampledFunction;

    fn terminal(grid: Grid1D, f: impl Fn(f64) -> f64) -> SmoothTerminal {
        let h = SampledFunction::from_fn(vec![grid], 0.0, |x| f(x[0])).unwrap();
        let env = h.values.clone();
        SmoothTerminal::from_values(h, env, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn oracle_values() {
        assert!((solve_quadratic_oracle(0.5, 0.0, 0.0, 0.0, 0.0).unwrap() - 0.346_573_590_279_972_6).abs() < 1e-15);
        assert!((solve_quadratic_oracle(-1.0, 0.0, 0.0, 0.0, 0.0).unwrap() + 0.346_573_590_279_972_6).abs() < 1e-15);
        assert_eq!(solve_quadratic_oracle(0.0, 2.0, 1.0, 0.3, 1.5).unwrap(), 4.0);
        assert!(solve_quadratic_oracle(1.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn constant_and_linear_terminals_are_stationary() {
        let g = Grid1D::new(-2.0, 2.0, 33).unwrap();
        let t = terminal(g, |_| 1.5);
        let n_t = required_steps(t.alpha, g.step(), 8);
        let u = solve_cauchy_1d(&t, n_t, 8, BoundaryMode::default()).unwrap();
        assert!(u.values.iter().all(|v| *v == 1.5));
        let t = terminal(g, |x| 0.5 * x + 1.0);
        let u = solve_cauchy_1d(&t, n_t, 8, BoundaryMode::default()).unwrap();
        for (k, x) in g.nodes().iter().enumerate() {
            assert!((u.slice(0)[k] - (0.5 * x + 1.0)).abs() < 1e-13);
        }
        let (grad, clamped) = gradient_at(&u, 0.3, &[0.7]);
        assert!((grad[0] - 0.5).abs() < 1e-12 && !clamped);
    }

    #[test]
    fn quadratic_terminal_matches_closed_form() {
        let g = Grid1D::new(-4.0, 4.0, 129).unwrap();
        let t = terminal(g, |x| 0.25 * x * x);
        let n_t = required_steps(t.alpha, g.step(), 16);
        let u = solve_cauchy_1d(&t, n_t, 16, BoundaryMode::default()).unwrap();
        assert!((u.value_at(0.0, &[0.0]) - 0.346_573_590_279_972_6).abs() < 1e-9);
        let c = extract_control(&u).unwrap();
        assert!((c.sigma_1d(0.5, 1.0) - 2.0).abs() < 1e-8);
        let (grad, _) = gradient_at(&u, 0.5, &[2.0]);
        assert!((grad[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cfl_violation_reports_required_steps() {
        let g = Grid1D::new(-1.0, 1.0, 65).unwrap();
        let t = terminal(g, |_| 0.0);
        match solve_cauchy_1d(&t, 16, 16, BoundaryMode::default()) {
            Err(Error::Cfl { required, given }) => {
                assert_eq!(given, 16);
                assert_eq!(required, required_steps(1.0, g.step(), 16));
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn oracle_surface_residual_is_tiny() {
        let u = quadratic_oracle_surface(0.5, 0.1, 0.0, Grid1D::new(-1.0, 1.0, 17).unwrap(), 16).unwrap();
        assert!(u.residual_max <= 1e-12, "{}", u.residual_max);
    }

    #[test]
    fn separable_constants_add() {
        let g = Grid1D::new(-1.0, 1.0, 9).unwrap();
        let a = quadratic_oracle_surface(0.0, 0.0, 1.0, g, 4).unwrap();
        let b = quadratic_oracle_surface(0.0, 0.0, 2.0, g, 4).unwrap();
        let u = compose_separable(&a, &b).unwrap();
        assert!(u.values.iter().all(|v| *v == 3.0));
        let q = quadratic_oracle_surface(0.5, 0.0, 0.0, g, 4).unwrap();
        let u = compose_separable(&q, &q).unwrap();
        assert!((u.value_at(0.0, &[0.0, 0.0]) - 2.0 * 0.346_573_590_279_972_6).abs() < 1e-15);
    }
}
