//! Row-major matrices and a bounds-checked wrapper around `matrixmultiply`.
//!
//! `matrixmultiply` is built without its threading feature, so each product
//! accumulates in a fixed order and results are reproducible run to run.

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn view(&self) -> MatRef<'_> {
        MatRef::row_major(&self.data, self.rows, self.cols)
    }

    pub fn view_mut(&mut self) -> MatMut<'_> {
        let (rows, cols) = (self.rows, self.cols);
        MatMut {
            data: &mut self.data,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for (dst, &src) in rows.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// Copies `src` into columns `col0..col0 + src.cols`.
    pub fn set_columns(&mut self, col0: usize, src: &Matrix) {
        assert_eq!(self.rows, src.rows, "row count");
        assert!(col0 + src.cols <= self.cols, "column range");
        for r in 0..self.rows {
            self.row_mut(r)[col0..col0 + src.cols].copy_from_slice(src.row(r));
        }
    }
}

/// Borrowed strided view.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> MatRef<'a> {
    pub fn row_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols, 1)
    }

    pub fn strided(data: &'a [f64], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        assert!(fits(data.len(), rows, cols, rs, cs), "view out of bounds");
        Self {
            data,
            rows,
            cols,
            rs,
            cs,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    /// Columns `c0..c1` of this view.
    pub fn columns(self, c0: usize, c1: usize) -> Self {
        assert!(c0 <= c1 && c1 <= self.cols, "column range");
        let offset = if c0 < c1 && self.rows > 0 { c0 * self.cs } else { 0 };
        Self::strided(&self.data[offset..], self.rows, c1 - c0, self.rs, self.cs)
    }
}

/// Mutable strided view.
#[derive(Debug)]
pub struct MatMut<'a> {
    data: &'a mut [f64],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a> MatMut<'a> {
    pub fn strided(data: &'a mut [f64], rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        assert!(fits(data.len(), rows, cols, rs, cs), "view out of bounds");
        Self {
            data,
            rows,
            cols,
            rs,
            cs,
        }
    }

    /// Columns `c0..c1` of this view.
    pub fn columns(self, c0: usize, c1: usize) -> MatMut<'a> {
        assert!(c0 <= c1 && c1 <= self.cols, "column range");
        let offset = if c0 < c1 && self.rows > 0 { c0 * self.cs } else { 0 };
        let (rows, rs, cs) = (self.rows, self.rs, self.cs);
        MatMut::strided(&mut self.data[offset..], rows, c1 - c0, rs, cs)
    }
}

fn fits(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> bool {
    rows == 0 || cols == 0 || (rows - 1) * rs + (cols - 1) * cs < len
}

/// `c <- alpha * a * b + beta * c`
pub fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "inner dimension");
    assert_eq!(a.rows, c.rows, "output rows");
    assert_eq!(b.cols, c.cols, "output cols");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let v = &mut c.data[i * c.rs + j * c.cs];
                *v = if beta == 0.0 { 0.0 } else { *v * beta };
            }
        }
        return;
    }
    // SAFETY: every view was bounds-checked at construction, so all
    // addresses touched by an m x k, k x n, m x n product are in range.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                c.data[i * b.cols + j] = (0..a.cols).map(|k| a.row(i)[k] * b.row(k)[j]).sum();
            }
        }
        c
    }

    #[test]
    fn matches_naive_product() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let mut c = Matrix::zeros(2, 2);
        gemm(1.0, a.view(), b.view(), 0.0, c.view_mut());
        assert_eq!(c, naive(&a, &b));
    }

    #[test]
    fn transposed_and_column_views() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // a^T a restricted to the last two columns of a.
        let sub = a.view().columns(1, 3);
        let mut c = Matrix::zeros(2, 2);
        gemm(1.0, sub.t(), sub, 0.0, c.view_mut());
        assert_eq!(
            c.data,
            vec![
                2.0 * 2.0 + 5.0 * 5.0,
                2.0 * 3.0 + 5.0 * 6.0,
                3.0 * 2.0 + 6.0 * 5.0,
                3.0 * 3.0 + 6.0 * 6.0
            ]
        );
    }

    #[test]
    fn accumulates_into_column_block() {
        let a = Matrix::from_vec(1, 1, vec![2.0]);
        let b = Matrix::from_vec(1, 2, vec![1.0, 3.0]);
        let mut c = Matrix::from_vec(1, 3, vec![1.0, 1.0, 1.0]);
        gemm(1.0, a.view(), b.view(), 1.0, c.view_mut().columns(1, 3));
        assert_eq!(c.data, vec![1.0, 3.0, 7.0]);
    }

    #[test]
    fn empty_inner_dimension_scales_output() {
        let a = Matrix::zeros(2, 0);
        let b = Matrix::zeros(0, 2);
        let mut c = Matrix::from_vec(2, 2, vec![1.0; 4]);
        gemm(1.0, a.view(), b.view(), 0.0, c.view_mut());
        assert_eq!(c.data, vec![0.0; 4]);
    }
}
