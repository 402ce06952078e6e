use serde::{Deserialize, Serialize};

/// Small dense row-major matrix. Kernels and coefficient functions are
/// evaluated into these; all norms are Frobenius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn scalar(v: f64) -> Matrix {
        Matrix::new(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The single entry of a 1x1 matrix.
    pub fn to_scalar(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }

    pub fn frobenius_sq(&self) -> f64 {
        frobenius_sq(&self.data)
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shapes");
        let mut out = vec![0.0; self.rows * rhs.cols];
        matmul_into(&self.data, &rhs.data, self.rows, self.cols, rhs.cols, &mut out);
        Matrix::new(self.rows, rhs.cols, out)
    }
}

pub(crate) fn frobenius_sq(data: &[f64]) -> f64 {
    data.iter().map(|x| x * x).sum()
}

/// `out = a (m x k) * b (k x n)`.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    if m == 1 && k == 1 && n == 1 {
        out[0] = a[0] * b[0];
        return;
    }
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[i * k + l] * b[l * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_is_consistent() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::new(2, 1, vec![-1.0, 0.5]);
        let ab = a.matmul(&b);
        assert_eq!(ab.as_slice(), &[0.0, -1.0]);
        assert!(ab.frobenius() <= a.frobenius() * b.frobenius());
        assert_eq!(a.frobenius_sq(), 30.0);
        assert_eq!(Matrix::scalar(3.0).to_scalar(), Some(3.0));
        assert_eq!(a.to_scalar(), None);
    }
}
