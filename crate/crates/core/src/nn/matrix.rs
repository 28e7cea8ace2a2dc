use crate::error::{ensure_dim, Result};

/// Dense row-major matrix; rows are samples, columns are features.
#[derive(Clone, Debug, PartialEq)]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_dim("matrix data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    /// Stacks equally sized rows. An empty iterator yields a `0 x cols` matrix.
    pub fn from_rows<'a, I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            ensure_dim("matrix row", cols, row.len())?;
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Self {
            rows: n,
            cols,
            data,
        })
    }

    /// Concatenates two matrices with the same row count along the feature axis.
    pub fn hstack(left: &Matrix, right: &Matrix) -> Result<Self> {
        ensure_dim("hstack rows", left.rows, right.rows)?;
        let cols = left.cols + right.cols;
        let mut data = Vec::with_capacity(left.rows * cols);
        for r in 0..left.rows {
            data.extend_from_slice(left.row(r));
            data.extend_from_slice(right.row(r));
        }
        Ok(Self {
            rows: left.rows,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Copies columns `start..start + width` into a new matrix.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, width);
        for r in 0..self.rows {
            out.row_mut(r)
                .copy_from_slice(&self.row(r)[start..start + width]);
        }
        out
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// `out = x · w` where `w` is a row-major `k x n` slice.
pub(crate) fn matmul(x: &Matrix, w: &[f64], n: usize, out: &mut Matrix) {
    let (m, k) = (x.rows, x.cols);
    debug_assert_eq!(w.len(), k * n);
    debug_assert_eq!((out.rows, out.cols), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.data.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // SAFETY: all slices are sized to the stated row-major shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            x.data.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            n as isize,
            1,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `acc += xᵀ · d` where `x` is `m x k`, `d` is `m x n`, `acc` is row-major `k x n`.
pub(crate) fn matmul_tn_acc(x: &Matrix, d: &Matrix, acc: &mut [f64]) {
    let (m, k, n) = (x.rows, x.cols, d.cols);
    debug_assert_eq!(d.rows, m);
    debug_assert_eq!(acc.len(), k * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    // SAFETY: transposition is expressed through strides over valid buffers.
    unsafe {
        matrixmultiply::dgemm(
            k,
            m,
            n,
            1.0,
            x.data.as_ptr(),
            1,
            k as isize,
            d.data.as_ptr(),
            n as isize,
            1,
            1.0,
            acc.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out = d · wᵀ` where `d` is `m x n` and `w` is row-major `k x n`.
pub(crate) fn matmul_nt(d: &Matrix, w: &[f64], k: usize, out: &mut Matrix) {
    let (m, n) = (d.rows, d.cols);
    debug_assert_eq!(w.len(), k * n);
    debug_assert_eq!((out.rows, out.cols), (m, k));
    if m == 0 || k == 0 {
        return;
    }
    if n == 0 {
        out.data.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            n,
            k,
            1.0,
            d.data.as_ptr(),
            n as isize,
            1,
            w.as_ptr(),
            1,
            n as isize,
            0.0,
            out.data.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        out
    }

    #[test]
    fn products_agree_with_triple_loop() {
        let x = Matrix::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0]).unwrap();
        let w = [0.5, -1.0, 2.0, 1.5, 0.0, -0.5];
        let mut out = Matrix::zeros(3, 3);
        matmul(&x, &w, 3, &mut out);
        assert_eq!(out.as_slice(), naive(x.as_slice(), &w, 3, 2, 3).as_slice());

        let mut xt = vec![0.0; 6];
        for i in 0..3 {
            for j in 0..2 {
                xt[j * 3 + i] = x.get(i, j);
            }
        }
        let mut acc = vec![0.0; 6];
        matmul_tn_acc(&x, &out, &mut acc);
        let expect = naive(&xt, out.as_slice(), 2, 3, 3);
        for (a, b) in acc.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut wt = vec![0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                wt[j * 2 + i] = w[i * 3 + j];
            }
        }
        let mut back = Matrix::zeros(3, 2);
        matmul_nt(&out, &w, 2, &mut back);
        let expect = naive(out.as_slice(), &wt, 3, 3, 2);
        for (a, b) in back.as_slice().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hstack_and_columns_are_inverse() {
        let a = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = Matrix::hstack(&a, &b).unwrap();
        assert_eq!(c.row(1), &[2.0, 5.0, 6.0]);
        assert_eq!(c.columns(1, 2), b);
    }
}
