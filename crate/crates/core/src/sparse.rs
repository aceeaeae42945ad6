//! Compressed-row sparse operators on a sector basis.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_word, Letter, SectorBasis};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Maximum Hermiticity defect allowed on an operator carrying the flag.
pub const HERMITIAN_TOL: f64 = 1e-14;

/// `coeff * word`, the unit every builder assembles from.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub word: Vec<Letter>,
}

impl Term {
    pub fn new(coeff: C64, word: Vec<Letter>) -> Self {
        Self { coeff, word }
    }
}

/// One row-major `(row, col, value)` entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new(), hermitian: true }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![ONE; dim])
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut t = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            t.push((i, i, v));
        }
        let mut op = Self::from_triplets(values.len(), t);
        op.hermitian = values.iter().all(|v| v.im == 0.0);
        op
    }

    /// Real diagonal operator.
    pub fn real_diagonal(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(&v)
    }

    /// Sum duplicates, drop exact zeros. The result is not flagged Hermitian.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c as u32 {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c as u32);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut k = 0;
        for i in 0..rows.len() {
            if vals[i] != ZERO {
                cols[k] = cols[i];
                vals[k] = vals[i];
                keep_rows.push(rows[i]);
                k += 1;
            }
        }
        cols.truncate(k);
        vals.truncate(k);
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { dim, row_ptr, cols, vals, hermitian: false }
    }

    /// Matrix of `sum_t coeff_t * word_t` on `basis`. Entries whose image
    /// leaves the basis are dropped.
    pub fn from_terms(basis: &SectorBasis, terms: &[Term]) -> Self {
        let dim = basis.dim();
        let registry = basis.registry();
        let mut triplets = Vec::new();
        let mut scratch = Vec::with_capacity(registry.len());
        for col in 0..dim {
            for term in terms {
                scratch.clear();
                scratch.extend_from_slice(basis.state(col));
                if let Some(amp) = apply_word(registry, &mut scratch, &term.word) {
                    if let Some(row) = basis.index_of(&scratch) {
                        triplets.push((row, col, term.coeff * amp));
                    }
                }
            }
        }
        Self::from_triplets(dim, triplets)
    }

    /// `A + A^†` for a forward-hopping part `A`; exactly Hermitian.
    pub fn plus_adjoint(&self) -> Self {
        let mut op = self.add(&self.adjoint());
        op.hermitian = true;
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Set the Hermitian flag after checking the defect; small asymmetries
    /// from rounding are removed by averaging with the adjoint.
    pub fn into_hermitian(self) -> Result<Self> {
        let scale = self.max_abs().max(1.0);
        let defect = self.hermitian_defect();
        if defect > 1e-12 * scale {
            return Err(Error::NotHermitian);
        }
        if defect == 0.0 {
            let mut op = self;
            op.hermitian = true;
            return Ok(op);
        }
        let mut op = self.add(&self.adjoint()).scale(C64::new(0.5, 0.0));
        op.hermitian = true;
        Ok(op)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].iter().zip(&self.vals[s..e]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&(j as u32)) {
            Ok(k) => self.vals[s + k],
            Err(_) => ZERO,
        }
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out.push(Triplet { row: i, col: j, value: v });
            }
        }
        out
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, _)| j == i))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                t.push((j, i, v.conj()));
            }
        }
        let mut op = Self::from_triplets(self.dim, t);
        op.hermitian = self.hermitian;
        op
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut op = self.clone();
        for v in op.vals.iter_mut() {
            *v *= c;
        }
        op.hermitian = self.hermitian && c.im == 0.0;
        if c == ZERO {
            return Self::zeros(self.dim);
        }
        op
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
            for (j, v) in other.row(i) {
                t.push((i, j, v * sign));
            }
        }
        let mut op = Self::from_triplets(self.dim, t);
        op.hermitian = self.hermitian && other.hermitian;
        op
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    /// Sum of several operators of equal dimension.
    pub fn sum<'a>(dim: usize, ops: impl IntoIterator<Item = &'a SparseOperator>) -> Self {
        ops.into_iter().fold(Self::zeros(dim), |acc, op| acc.add(op))
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimensions differ");
        let mut acc = vec![ZERO; self.dim];
        let mut mark = vec![false; self.dim];
        let mut touched: Vec<usize> = Vec::new();
        let mut t = Vec::new();
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                t.push((i, j, acc[j]));
                acc[j] = ZERO;
                mark[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.dim, t)
    }

    /// `[A, B]`, assembled.
    pub fn commutator(a: &Self, b: &Self) -> Self {
        a.mul(b).sub(&b.mul(a))
    }

    /// `max_ij |[A, B]_ij|`, computed row by row without storing the product.
    pub fn commutator_max_norm(a: &Self, b: &Self) -> f64 {
        assert_eq!(a.dim, b.dim, "operator dimensions differ");
        let n = a.dim;
        let mut acc = vec![ZERO; n];
        let mut mark = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for (k, x) in a.row(i) {
                for (j, y) in b.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += x * y;
                }
            }
            for (k, x) in b.row(i) {
                for (j, y) in a.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] -= x * y;
                }
            }
            for &j in &touched {
                worst = worst.max(acc[j].norm());
                acc[j] = ZERO;
                mark[j] = false;
            }
            touched.clear();
        }
        worst
    }

    /// Conjugate by a diagonal unitary: `A'_rs = conj(t_r) A_rs t_s`.
    pub fn conjugate_diagonal(&self, phases: &[C64]) -> Self {
        assert_eq!(phases.len(), self.dim);
        let mut op = self.clone();
        for i in 0..self.dim {
            for k in op.row_ptr[i]..op.row_ptr[i + 1] {
                let j = op.cols[k] as usize;
                op.vals[k] = phases[i].conj() * op.vals[k] * phases[j];
            }
        }
        op
    }

    /// Submatrix on the given rows and columns (positions into the lists).
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        assert_eq!(rows.len(), cols.len(), "restriction must be square");
        let mut col_pos = vec![usize::MAX; self.dim];
        for (p, &c) in cols.iter().enumerate() {
            col_pos[c] = p;
        }
        let mut t = Vec::new();
        for (p, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_pos[j] != usize::MAX {
                    t.push((p, col_pos[j], v));
                }
            }
        }
        let mut op = Self::from_triplets(rows.len(), t);
        op.hermitian = self.hermitian && rows == cols;
        op
    }

    /// Rectangular block as triplets `(row position, col position, value)`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize, C64)> {
        let mut col_pos = vec![usize::MAX; self.dim];
        for (p, &c) in cols.iter().enumerate() {
            col_pos[c] = p;
        }
        let mut t = Vec::new();
        for (p, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_pos[j] != usize::MAX {
                    t.push((p, col_pos[j], v));
                }
            }
        }
        t
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `V^† A V` for orthonormal columns `V`.
    pub fn compress(&self, columns: &[Vec<C64>]) -> DMatrix<C64> {
        let k = columns.len();
        let images: Vec<Vec<C64>> = columns.iter().map(|c| self.apply(c)).collect();
        let mut m = DMatrix::from_element(k, k, ZERO);
        for a in 0..k {
            for b in 0..k {
                m[(a, b)] = inner(&columns[a], &images[b]);
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }
}

/// `<x, y>`, conjugate-linear in `x`.
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

pub fn norm(x: &[C64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v.norm_sqr()).sum::<f64>())
}

/// `y += a * x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(dim: usize, t: &[(usize, usize, f64, f64)]) -> SparseOperator {
        SparseOperator::from_triplets(dim, t.iter().map(|&(r, c, re, im)| (r, c, C64::new(re, im))).collect())
    }

    #[test]
    fn triplets_merge_duplicates_and_drop_zeros() {
        let a = op(3, &[(0, 1, 1.0, 0.0), (0, 1, 2.0, 0.0), (2, 2, 1.0, 0.0), (2, 2, -1.0, 0.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 1), C64::new(3.0, 0.0));
    }

    #[test]
    fn product_matches_dense() {
        let a = op(3, &[(0, 1, 1.0, 2.0), (1, 2, -1.0, 0.5), (2, 0, 0.25, 0.0), (1, 1, 3.0, 0.0)]);
        let b = op(3, &[(1, 0, 2.0, 0.0), (2, 1, 0.0, 1.0), (0, 2, 1.0, -1.0)]);
        let dense = a.to_dense() * b.to_dense();
        let sparse = a.mul(&b).to_dense();
        assert!((dense - sparse).norm() < 1e-14);
    }

    #[test]
    fn commutator_norm_matches_assembled() {
        let a = op(4, &[(0, 1, 1.0, 0.0), (1, 0, 1.0, 0.0), (2, 3, 0.0, 1.0), (3, 2, 0.0, -1.0)]);
        let b = op(4, &[(0, 0, 1.0, 0.0), (1, 1, -1.0, 0.0), (2, 2, 0.5, 0.0), (3, 3, 0.5, 0.0)]);
        let direct = SparseOperator::commutator(&a, &b).max_abs();
        assert!((SparseOperator::commutator_max_norm(&a, &b) - direct).abs() < 1e-15);
        assert!(direct > 1.0);
    }

    #[test]
    fn plus_adjoint_is_hermitian() {
        let a = op(3, &[(0, 1, 1.0, 2.0), (2, 1, 0.0, 1.0)]);
        let h = a.plus_adjoint();
        assert!(h.is_hermitian());
        assert_eq!(h.hermitian_defect(), 0.0);
    }

    #[test]
    fn into_hermitian_rejects_asymmetric() {
        let a = op(2, &[(0, 1, 1.0, 0.0)]);
        assert_eq!(a.into_hermitian(), Err(Error::NotHermitian));
    }
}
