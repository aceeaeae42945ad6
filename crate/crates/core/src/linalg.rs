//! Dense helpers on top of nalgebra: sorted Hermitian eigendecomposition and
//! a least-squares line fit.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::sparse::C64;

/// Eigenpairs sorted by ascending eigenvalue; eigenvectors are columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first.
pub fn eigh(m: &DMatrix<C64>) -> Eigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh needs a square matrix");
    if n == 0 {
        return Eigen { values: Vec::new(), vectors: DMatrix::zeros(0, 0) };
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Eigen { values, vectors }
}

/// Eigendecomposition of a real symmetric tridiagonal matrix given by its
/// diagonal and off-diagonal. Returns ascending values and column vectors.
pub fn eigh_tridiagonal(diag: &[f64], off: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = diag.len();
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = diag[i];
        if i + 1 < n {
            t[(i, i + 1)] = off[i];
            t[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| {
        let r = b - (slope * a + intercept);
        r * r
    }).sum();
    Some(LineFit { slope, intercept, rms_residual: libm::sqrt(ss / nf) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_and_diagonalizes() {
        let m = DMatrix::from_row_slice(2, 2, &[
            C64::new(2.0, 0.0), C64::new(0.0, 1.0),
            C64::new(0.0, -1.0), C64::new(2.0, 0.0),
        ]);
        let e = eigh(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v = e.vectors.column(0);
        let r = &m * v - v * C64::new(e.values[0], 0.0);
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[5.0, 7.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
        assert!(f.rms_residual < 1e-14);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }
}
