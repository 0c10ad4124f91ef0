use super::norm_pdf;
use super::quad::gauss_legendre;

/// Standard-normal mass beyond this many deviations is ignored.
const Z_CUT: f64 = 12.0;
const PANEL: f64 = 0.5;
const ORDER: usize = 10;

/// `E g(Z)` for a function that is smooth between the given breakpoints,
/// by composite Gauss–Legendre panels over `[−12, 12]` split at every
/// breakpoint.
pub fn gaussian_expectation_1d<F: Fn(f64) -> f64>(g: F, breaks: &[f64]) -> f64 {
    let rule = gauss_legendre(ORDER).expect("fixed order");
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|z| z.is_finite() && z.abs() < Z_CUT).collect();
    cuts.push(-Z_CUT);
    cuts.push(Z_CUT);
    let span = 2.0 * Z_CUT;
    let panels = (span / PANEL) as usize;
    cuts.extend((1..panels).map(|k| -Z_CUT + k as f64 * PANEL));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        if half <= 0.0 {
            continue;
        }
        acc += half * rule.expect(|t| {
            let z = mid + half * t;
            g(z) * norm_pdf(z)
        });
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm_cdf, norm_pdf};

    #[test]
    fn kinked_payoff() {
        let exact = 2.0 * ((norm_cdf(1.0) - 0.5) - (norm_pdf(0.0) - norm_pdf(1.0)));
        let v = gaussian_expectation_1d(|z| (1.0 - z.abs()).max(0.0), &[-1.0, 0.0, 1.0]);
        assert!((v - exact).abs() < 1e-14, "{v} {exact}");
    }
}
