use crate::error::{Error, Result};

/// Relative tolerance below which an eigenvalue is treated as zero.
pub const TOL_PD: f64 = 1e-12;

/// Symmetric positive semidefinite matrix of dimension 1..=3, stored densely
/// in row-major order with exactly equal off-diagonal pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SpdMatrix {
    /// Builds a matrix from row-major entries. Rejects asymmetric, non-finite
    /// or indefinite input.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::arg(format!("matrix dimension {dim} not in 1..=3")));
        }
        if entries.len() != dim * dim {
            return Err(Error::arg(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("matrix has non-finite entries"));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::domain("matrix is not symmetric"));
                }
            }
        }
        let m = SpdMatrix { dim, entries };
        let (vals, _) = symmetric_eigen(dim, &m.entries);
        let top = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if let Some(v) = vals.iter().find(|v| **v < -TOL_PD * top) {
            return Err(Error::domain(format!("matrix has negative eigenvalue {v}")));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    /// Diagonal matrix. Panics on negative or non-finite entries.
    pub fn diag(d: &[f64]) -> Self {
        assert!((1..=3).contains(&d.len()));
        assert!(d.iter().all(|v| v.is_finite() && *v >= 0.0));
        let n = d.len();
        let mut entries = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            entries[i * n + i] = *v;
        }
        SpdMatrix { dim: n, entries }
    }

    pub fn scalar(v: f64) -> Self {
        Self::diag(&[v])
    }

    /// Builds from entries that are known to be symmetric up to rounding;
    /// the result is symmetrized by averaging.
    pub(crate) fn from_nearly_symmetric(dim: usize, mut entries: Vec<f64>) -> Self {
        for i in 0..dim {
            for j in 0..i {
                let m = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = m;
                entries[j * dim + i] = m;
            }
        }
        SpdMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigen(self.dim, &self.entries).0
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SpdMatrix, b: f64) -> SpdMatrix {
        assert_eq!(self.dim, other.dim);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SpdMatrix { dim: self.dim, entries }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns of a row-major matrix.
pub fn symmetric_eigen(dim: usize, entries: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = dim;
    let mut a = entries.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|i, j| a[i * n + i].total_cmp(&a[j * n + j]));
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + col] = v[k * n + i];
        }
    }
    (vals, vecs)
}

/// Symmetric square root. Tiny negative eigenvalues from rounding are
/// clamped to zero.
pub fn spd_sqrt(s: &SpdMatrix) -> SpdMatrix {
    let n = s.dim;
    if n == 1 {
        return SpdMatrix::scalar(s.entries[0].max(0.0).sqrt());
    }
    let (vals, vecs) = symmetric_eigen(n, &s.entries);
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (0..n).map(|k| vecs[i * n + k] * roots[k] * vecs[j * n + k]).sum();
        }
    }
    SpdMatrix::from_nearly_symmetric(n, out)
}

/// Entropy rate `½(Tr Σ − d − log det Σ)`; a domain error when Σ is not
/// strictly positive definite.
pub fn entropy_rate(s: &SpdMatrix) -> Result<f64> {
    if s.dim == 1 {
        return entropy_rate_eigen(&s.entries[..1]);
    }
    entropy_rate_eigen(&s.eigenvalues())
}

/// Entropy rate from an eigenvalue list.
pub fn entropy_rate_eigen(vals: &[f64]) -> Result<f64> {
    let top = vals.iter().fold(0.0f64, |a, v| a.max(*v));
    let mut acc = 0.0;
    for &l in vals {
        if !l.is_finite() || l <= TOL_PD * top.max(f64::MIN_POSITIVE) {
            return Err(Error::domain(format!(
                "entropy rate undefined: eigenvalue {l} is not positive"
            )));
        }
        acc += l - 1.0 - l.ln();
    }
    Ok(0.5 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_entropy() {
        for d in 1..=3 {
            assert_eq!(entropy_rate(&SpdMatrix::identity(d)).unwrap(), 0.0);
        }
    }

    #[test]
    fn scalar_entropy_value() {
        let g = entropy_rate(&SpdMatrix::scalar(2.0)).unwrap();
        assert!((g - 0.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_and_singular() {
        assert!(SpdMatrix::new(2, vec![1.0, 0.1, 0.2, 1.0]).is_err());
        assert!(SpdMatrix::new(2, vec![1.0, 0.0, 0.0, -1.0]).is_err());
        let sing = SpdMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(entropy_rate(&sing).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let s = SpdMatrix::new(3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]).unwrap();
        let r = spd_sqrt(&s);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| r.get(i, k) * r.get(k, j)).sum();
                assert!((v - s.get(i, j)).abs() < 1e-13);
            }
        }
    }
}
