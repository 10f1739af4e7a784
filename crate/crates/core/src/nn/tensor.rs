//! Dense row-major f64 matrices. Vectors are `[1, n]` (row) or `[n, 1]`
//! (column); scalars are `[1, 1]`.

/// A dense 2-D tensor. Shape checks are hard asserts: a shape mismatch in
/// this crate is always a programming error, never a data error.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_vec(1, 1, vec![value])
    }

    /// Row vector `[1, n]`.
    pub fn row_vec(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::from_vec(1, n, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combine; shapes must match exactly (no broadcasting here —
    /// the tape owns broadcasting semantics).
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Tensor) {
        assert_eq!(self.shape(), x.shape(), "axpy shape mismatch");
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.data {
            *s *= a;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Squared Frobenius norm.
    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self · b`, via a BLAS-grade kernel. This is the only place the crate
    /// leans on an external numeric routine; everything else is plain loops.
    pub fn matmul(&self, b: &Tensor) -> Tensor {
        assert_eq!(self.cols, b.rows, "matmul inner dimension mismatch");
        let mut out = Tensor::zeros(self.rows, b.cols);
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                b.cols,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                b.data.as_ptr(),
                b.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out
    }

    /// `selfᵀ · b` without materializing the transpose.
    pub fn matmul_tn(&self, b: &Tensor) -> Tensor {
        assert_eq!(self.rows, b.rows, "matmul_tn inner dimension mismatch");
        let mut out = Tensor::zeros(self.cols, b.cols);
        unsafe {
            matrixmultiply::dgemm(
                self.cols,
                self.rows,
                b.cols,
                1.0,
                self.data.as_ptr(),
                1,
                self.cols as isize,
                b.data.as_ptr(),
                b.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out
    }

    /// `self · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, b: &Tensor) -> Tensor {
        assert_eq!(self.cols, b.cols, "matmul_nt inner dimension mismatch");
        let mut out = Tensor::zeros(self.rows, b.rows);
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                b.rows,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                b.data.as_ptr(),
                1,
                b.cols as isize,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out
    }
}
