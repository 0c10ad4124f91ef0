use crate::error::{Error, Result};

/// Quadrature rule for expectations under the standard normal law:
/// `E g(Z) ≈ Σ w_i g(x_i)`, weights positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(*x)).sum()
    }

    /// Tensor product expectation over two independent standard normals.
    pub fn expect2<F: FnMut(f64, f64) -> f64>(&self, mut g: F) -> f64 {
        let mut acc = 0.0;
        for (x, wx) in self.nodes.iter().zip(&self.weights) {
            for (y, wy) in self.nodes.iter().zip(&self.weights) {
                acc += wx * wy * g(*x, *y);
            }
        }
        acc
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `off` (implicit QL with Wilkinson shifts).
fn tridiagonal_eigenvalues(off: &[f64]) -> Result<Vec<f64>> {
    let n = off.len() + 1;
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::numerical(
                    crate::error::Module::Numerics,
                    "tridiagonal eigenvalue iteration did not converge",
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Orthonormal Hermite values: returns `(p̂_m(x), p̂_{m-1}(x), Σ_{k<m} p̂_k(x)²)`.
fn hermite_orthonormal(m: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sumsq = 0.0;
    for k in 0..m {
        sumsq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sumsq)
}

/// Probabilists' Gauss–Hermite rule with `m` nodes, `2 ≤ m ≤ 256`.
///
/// Nodes come from the Jacobi matrix eigenvalues, polished by Newton steps;
/// weights from the Christoffel function. The rule is made exactly symmetric.
pub fn gauss_hermite(m: usize) -> Result<QuadRule> {
    if !(2..=256).contains(&m) {
        return Err(Error::arg(format!("quadrature order {m} not in 2..=256")));
    }
    let off: Vec<f64> = (1..m).map(|k| (k as f64).sqrt()).collect();
    let mut nodes = tridiagonal_eigenvalues(&off)?;
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (pm, pm1, _) = hermite_orthonormal(m, *x);
            let step = pm / ((m as f64).sqrt() * pm1);
            if !step.is_finite() {
                break;
            }
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let a = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -a;
        nodes[j] = a;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes.iter().map(|x| 1.0 / hermite_orthonormal(m, *x).2).collect();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    if weights.iter().any(|w| !(*w > 0.0)) || nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(
            crate::error::Module::Numerics,
            format!("Gauss–Hermite rule of order {m} degenerate"),
        ));
    }
    Ok(QuadRule { nodes, weights })
}

/// Gauss–Legendre rule with `m` nodes on `[-1, 1]`; weights sum to 2.
pub fn gauss_legendre(m: usize) -> Result<QuadRule> {
    if !(1..=256).contains(&m) {
        return Err(Error::arg(format!("quadrature order {m} not in 1..=256")));
    }
    if m == 1 {
        return Ok(QuadRule { nodes: vec![0.0], weights: vec![2.0] });
    }
    let beta = |k: usize| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    };
    let off: Vec<f64> = (1..m).map(beta).collect();
    let mut nodes = tridiagonal_eigenvalues(&off)?;
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let a = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -a;
        nodes[j] = a;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let christoffel = |x: f64| {
        let (mut prev, mut cur, mut sum) = (0.0, 1.0, 0.0);
        for k in 0..m {
            sum += cur * cur;
            let next = (x * cur - if k == 0 { 0.0 } else { beta(k) * prev }) / beta(k + 1);
            prev = cur;
            cur = next;
        }
        1.0 / sum
    };
    let mut weights: Vec<f64> = nodes.iter().map(|x| christoffel(*x)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w *= 2.0 / total);
    Ok(QuadRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let q = gauss_hermite(2).unwrap();
        assert!((q.nodes[1] - 1.0).abs() < 1e-15);
        assert!((q.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moments() {
        for m in [3, 10, 64, 128, 256] {
            let q = gauss_hermite(m).unwrap();
            assert!((q.expect(|x| x * x) - 1.0).abs() < 1e-12, "m={m}");
            assert!((q.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11, "m={m}");
            assert!(q.expect(|x| x.powi(3)).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian_mgf_of_square() {
        let q = gauss_hermite(8).unwrap();
        assert!((q.expect(|x| (0.25 * x * x).exp()) - 2f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn legendre_is_exact_for_polynomials() {
        let q = gauss_legendre(8).unwrap();
        assert!((q.expect(|x| x.powi(14)) - 2.0 / 15.0).abs() < 1e-14);
        assert!((q.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_orders() {
        assert!(gauss_hermite(1).is_err());
        assert!(gauss_hermite(257).is_err());
    }
}
