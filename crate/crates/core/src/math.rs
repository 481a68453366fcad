//! Dense row-major `f64` matrices and the handful of kernels the encoder needs.
//!
//! Accumulation order inside each kernel is fixed, so every product is
//! bit-reproducible run to run.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let c_row = &mut out[i * n..(i + 1) * n];
            for (p, &a_ip) in a_row.iter().enumerate() {
                let b_row = &other.data[p * n..(p + 1) * n];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c += a_ip * b;
                }
            }
        }
        Matrix::from_vec(m, n, out)
    }

    /// `self^T * other`; `self` is `k x m`, `other` is `k x n`.
    pub fn matmul_at_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_at_b shape mismatch");
        let (k, m, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for t in 0..k {
            let a_row = &self.data[t * m..(t + 1) * m];
            let b_row = &other.data[t * n..(t + 1) * n];
            for (i, &a_ti) in a_row.iter().enumerate() {
                let c_row = &mut out[i * n..(i + 1) * n];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c += a_ti * b;
                }
            }
        }
        Matrix::from_vec(m, n, out)
    }

    /// `self * other^T`; `self` is `m x k`, `other` is `n x k`.
    pub fn matmul_a_bt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_a_bt shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &other.data[j * k..(j + 1) * k];
                out.push(dot(a_row, b_row));
            }
        }
        Matrix::from_vec(m, n, out)
    }

    /// Adds `bias` (length `cols`) to every row.
    pub fn add_row_broadcast(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias length mismatch");
        for i in 0..self.rows {
            for (x, &b) in self.data[i * self.cols..(i + 1) * self.cols]
                .iter_mut()
                .zip(bias)
            {
                *x += b;
            }
        }
    }

    /// `self += alpha * other`, elementwise.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for x in &mut self.data {
            *x *= alpha;
        }
    }

    /// Sum of each column, as a `1 x cols` matrix.
    pub fn col_sums(&self) -> Matrix {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        Matrix::from_vec(1, self.cols, out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dot product with fixed four-way accumulation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in (&mut ca).zip(&mut cb) {
        s0 += x[0] * y[0];
        s1 += x[1] * y[1];
        s2 += x[2] * y[2];
        s3 += x[3] * y[3];
    }
    let mut s = (s0 + s2) + (s1 + s3);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

/// In-place softmax over `row[..active]`; entries past `active` are set to 0.
pub fn softmax_masked(row: &mut [f64], active: usize) {
    debug_assert!(active > 0 && active <= row.len());
    let mut max = f64::NEG_INFINITY;
    for &x in &row[..active] {
        if x > max {
            max = x;
        }
    }
    let mut sum = 0.0;
    for x in &mut row[..active] {
        *x = crate::num::exp(*x - max);
        sum += *x;
    }
    for x in &mut row[..active] {
        *x /= sum;
    }
    for x in &mut row[active..] {
        *x = 0.0;
    }
}

/// Softmax over a full slice, returning a new vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    let n = out.len();
    softmax_masked(&mut out, n);
    out
}

/// Layer normalization of one position vector, without scale/shift.
///
/// Returns the normalized vector and `1 / sqrt(var + eps)`; variance is the
/// biased (population) estimate.
pub fn layer_norm_core(x: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / crate::num::sqrt(var + eps);
    (x.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.shape() == b.shape()
            && a.as_slice()
                .iter()
                .zip(b.as_slice())
                .all(|(x, y)| (x - y).abs() <= tol)
    }

    fn test_matrix(rows: usize, cols: usize, salt: u64) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| {
            let h = (i as u64)
                .wrapping_mul(6364136223846793005)
                .wrapping_add(j as u64)
                .wrapping_add(salt);
            ((h % 1000) as f64 - 500.0) / 250.0
        })
    }

    #[test]
    fn matmul_agrees_with_naive() {
        let a = test_matrix(7, 13, 1);
        let b = test_matrix(13, 5, 2);
        assert!(close(&a.matmul(&b), &naive_matmul(&a, &b), 1e-12));
    }

    #[test]
    fn transposed_products_agree_with_naive() {
        let a = test_matrix(9, 6, 3);
        let b = test_matrix(9, 4, 4);
        let at = Matrix::from_fn(6, 9, |i, j| a.get(j, i));
        assert!(close(&a.matmul_at_b(&b), &naive_matmul(&at, &b), 1e-12));

        let c = test_matrix(5, 8, 5);
        let d = test_matrix(3, 8, 6);
        let dt = Matrix::from_fn(8, 3, |i, j| d.get(j, i));
        assert!(close(&c.matmul_a_bt(&d), &naive_matmul(&c, &dt), 1e-12));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_mask_zeroes_tail() {
        let mut row = [2.0, -1.0, 0.5, 9.0, 9.0];
        softmax_masked(&mut row, 3);
        let sum: f64 = row[..3].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(&row[3..], &[0.0, 0.0]);
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let x = [3.0, -1.5, 0.25, 7.0, 2.0, -4.0];
        let (y, _) = layer_norm_core(&x, 1e-12);
        let mean: f64 = y.iter().sum::<f64>() / y.len() as f64;
        let var: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
        assert!(mean.abs() <= 1e-9);
        assert!((var - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn dot_handles_remainders() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(dot(&a, &b), 35.0);
    }
}
