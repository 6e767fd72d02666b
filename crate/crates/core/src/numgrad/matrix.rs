use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_finite, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure(data.len() == rows * cols, || {
            format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )
        })?;
        ensure_finite(&data, "matrix")?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        ensure(rows.iter().all(|r| r.len() == cols), || {
            "ragged rows".to_string()
        })?;
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::from_rows(cols)?.transpose())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn remove_column(&self, col: usize) -> Result<Self> {
        ensure(col < self.cols, || {
            format!("column {col} out of range for {} columns", self.cols)
        })?;
        let keep: Vec<usize> = (0..self.cols).filter(|&j| j != col).collect();
        self.select_columns(&keep)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        ensure(cols.iter().all(|&j| j < self.cols), || {
            format!("column index out of range for {} columns", self.cols)
        })?;
        Ok(Self::from_fn(self.rows, cols.len(), |i, k| {
            self.get(i, cols[k])
        }))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        ensure(self.cols == other.rows, || {
            format!("matmul shape mismatch {:?} x {:?}", self.shape(), other.shape())
        })?;
        Ok(gemm(self, false, other, false))
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        ensure(self.rows == other.rows, || {
            format!("t_matmul shape mismatch {:?} x {:?}", self.shape(), other.shape())
        })?;
        Ok(gemm(self, true, other, false))
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        ensure(self.cols == other.cols, || {
            format!("matmul_t shape mismatch {:?} x {:?}", self.shape(), other.shape())
        })?;
        Ok(gemm(self, false, other, true))
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure(self.cols == v.len(), || {
            format!("matvec shape mismatch {:?} x {}", self.shape(), v.len())
        })?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        ensure(self.shape() == other.shape(), || {
            format!("sub shape mismatch {:?} vs {:?}", self.shape(), other.shape())
        })?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        ensure(self.shape() == other.shape(), || {
            format!("add shape mismatch {:?} vs {:?}", self.shape(), other.shape())
        })?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..*self
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// General matrix product backed by `matrixmultiply`, with optional transposition of
/// either operand expressed through strides.
pub(crate) fn gemm(a: &Matrix, trans_a: bool, b: &Matrix, trans_b: bool) -> Matrix {
    let (m, k, rsa, csa) = if trans_a {
        (a.cols, a.rows, 1, a.cols as isize)
    } else {
        (a.rows, a.cols, a.cols as isize, 1)
    };
    let (kb, n, rsb, csb) = if trans_b {
        (b.cols, b.rows, 1, b.cols as isize)
    } else {
        (b.rows, b.cols, b.cols as isize, 1)
    };
    assert_eq!(k, kb, "gemm inner dimension mismatch");
    let mut out = Matrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    // SAFETY: the pointers cover m*k, k*n and m*n elements with the strides given above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
