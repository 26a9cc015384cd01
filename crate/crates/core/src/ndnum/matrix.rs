//! Dense row-major `f64` matrices with a pinned reduction order.
//!
//! Every entry is finite — constructors reject NaN and infinities so numeric
//! trouble surfaces where it starts instead of three modules later. All
//! reductions accumulate **left to right in index order** (for a product
//! element, ascending inner index `k`), which makes results bit-reproducible
//! across runs and across refactors of the loop nest.

use crate::error::{Error, Result};
use crate::ndnum::RngStream;

/// Dense row-major matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of side `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a row-major buffer; every entry must be finite and the
    /// buffer length must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite entry {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("rows of unequal length".to_string()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    /// Fill with Gaussian draws from `stream` (row-major order, two counter
    /// ticks per entry).
    pub fn gaussian(rows: usize, cols: usize, stream: &mut RngStream, mean: f64, std: f64) -> Self {
        let data = (0..rows * cols)
            .map(|_| stream.next_gaussian(mean, std))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major backing buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable row-major backing buffer. Callers must keep entries finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i * self.cols + j] = value;
    }

    /// Borrow row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row {i} out of range");
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix product `self * other`.
    ///
    /// Each output element is the dot product of a row of `self` with a
    /// column of `other`, accumulated over ascending `k`. The output is
    /// checked finite so overflow cannot propagate silently.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "inner dimensions disagree: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.cols {
                let mut acc = 0.0;
                for (k, &a) in a_row.iter().enumerate() {
                    acc += a * other.data[k * other.cols + j];
                }
                out[i * other.cols + j] = acc;
            }
        }
        Self::finite_product(self.rows, other.cols, out)
    }

    /// Matrix product `self * other^T` without materializing the transpose.
    ///
    /// Equivalent to `self.matmul(&other.transpose())` bit for bit: each
    /// output element dots a row of `self` with a row of `other` over
    /// ascending `k`, the same accumulation order as [`Matrix::matmul`].
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "inner dimensions disagree: {}x{} times transposed {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.rows];
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let b_row = &other.data[j * other.cols..(j + 1) * other.cols];
                out[i * other.rows + j] = dot(a_row, b_row);
            }
        }
        Self::finite_product(self.rows, other.rows, out)
    }

    fn finite_product(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "matrix product overflowed to {} at row {}, column {}",
                data[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    /// New matrix whose rows are `self`'s rows at `indices`, in order.
    /// Indices may repeat (sampling with replacement).
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::Parameter(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }
}

/// Euclidean norm of `v`: square root of the left-to-right sum of squares.
pub fn l2_norm(v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in v {
        acc += x * x;
    }
    acc.sqrt()
}

/// Dot product accumulated left to right. Lengths must match.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot of unequal lengths");
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_product_matches_hand_computation() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    // Independent oracle: the classic i-j-k triple loop, accumulated in the
    // same ascending-k order the contract pins down. The product must agree
    // exactly — not approximately — because the summation order is fixed.
    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn random_product_equals_naive_triple_loop_exactly() {
        let mut rng = RngStream::new(2024, 1);
        let a = Matrix::gaussian(5, 7, &mut rng, 0.0, 1.0);
        let b = Matrix::gaussian(7, 3, &mut rng, 0.0, 1.0);
        let fast = a.matmul(&b).unwrap();
        let oracle = naive_matmul(&a, &b);
        assert_eq!(fast.data(), oracle.data(), "products must be bitwise equal");
    }

    #[test]
    fn transposed_product_is_bitwise_equal_to_explicit_transpose() {
        let mut rng = RngStream::new(55, 2);
        let a = Matrix::gaussian(4, 6, &mut rng, 0.0, 1.0);
        let b = Matrix::gaussian(9, 6, &mut rng, 0.0, 1.0);
        let fused = a.matmul_nt(&b).unwrap();
        let explicit = a.matmul(&b.transpose()).unwrap();
        assert_eq!(fused.data(), explicit.data());
    }

    #[test]
    fn inner_dimension_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x2"), "got: {msg}");
    }

    #[test]
    fn constructors_reject_non_finite_entries() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn l2_norm_of_three_four_is_five() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
    }

    #[test]
    fn l2_norm_of_empty_and_zero_vectors_is_zero() {
        assert_eq!(l2_norm(&[]), 0.0);
        assert_eq!(l2_norm(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn select_rows_repeats_and_bounds_checks() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let picked = m.select_rows(&[1, 1, 0]).unwrap();
        assert_eq!(picked.data(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
        assert!(m.select_rows(&[2]).is_err());
    }

    #[test]
    fn identity_product_is_identity_map() {
        let mut rng = RngStream::new(7, 7);
        let a = Matrix::gaussian(3, 3, &mut rng, 0.0, 1.0);
        let eye = Matrix::identity(3);
        assert_eq!(a.matmul(&eye).unwrap().data(), a.data());
        assert_eq!(eye.matmul(&a).unwrap().data(), a.data());
    }
}
