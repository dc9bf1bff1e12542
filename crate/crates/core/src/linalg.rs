//! Small dense row-major matrices: just enough for ensemble covariances and
//! SPD solves.

use crate::error::{arg, Error, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return arg("matrix rows must be nonempty and equally long");
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return arg("matrix data has the wrong length");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// Largest absolute asymmetry `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    /// Spectral norm of a symmetric matrix (largest |eigenvalue|), by power
    /// iteration on `A^2`.
    pub fn symmetric_norm(&self) -> T {
        let n = self.rows;
        if n == 0 || self.max_abs() == T::zero() {
            return T::zero();
        }
        let a2 = self.matmul(self);
        let mut v: Vec<T> = (0..n).map(|i| T::one() + T::lit(i as f64) * T::lit(1e-3)).collect();
        let mut lambda = T::zero();
        for _ in 0..500 {
            let w = a2.matvec(&v);
            let nw = dot(&w, &w).sqrt();
            if nw == T::zero() {
                return T::zero();
            }
            let next = nw / dot(&v, &v).sqrt();
            v = w.into_iter().map(|x| x / nw).collect();
            if (next - lambda).abs() <= T::epsilon() * next * T::lit(16.0) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() || n == 0 {
            return arg("cholesky needs a nonempty square matrix");
        }
        let scale = a.max_abs().max(T::min_positive_value());
        if a.asymmetry() > T::lit(1e-10) * scale {
            return Err(Error::Numeric("matrix is not symmetric".into()));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Numeric(format!(
                    "matrix is not positive definite (pivot {j} = {d})"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let z = self.solve_lower(b);
        self.solve_upper(&z)
    }

    /// Solves `L z = b`; `|z|^2 = b^T A^{-1} b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        z
    }

    fn solve_upper(&self, z: &[T]) -> Vec<T> {
        let n = self.l.rows();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.l.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Orthonormal basis (modified Gram-Schmidt, two passes) of the span of
/// `vectors`; directions with relative norm below `tol` are dropped.
pub fn orthonormal_basis<T: Real>(vectors: &[Vec<T>], tol: T) -> Vec<Vec<T>> {
    let scale = vectors
        .iter()
        .map(|v| dot(v, v).sqrt())
        .fold(T::zero(), T::max);
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - c * b);
            }
        }
        let nw = dot(&w, &w).sqrt();
        if nw > tol * scale {
            basis.push(w.into_iter().map(|x| x / nw).collect());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves() {
        let a = Matrix::from_rows(&[vec![4.0f64, 2.0, 0.4], vec![2.0, 5.0, 1.0], vec![0.4, 1.0, 3.0]]).unwrap();
        let ch = Cholesky::factor(&a).unwrap();
        let b = [1.0f64, -2.0, 0.5];
        let x = ch.solve(&b);
        let back = a.matvec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-13);
        }
        let id = a.matmul(&ch.inverse());
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::factor(&a), Err(Error::Numeric(_))));
        let b = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(Cholesky::factor(&b).is_err());
    }

    #[test]
    fn symmetric_norm_of_diagonal() {
        let a = Matrix::diagonal(&[1.0f64, -3.0, 2.0]);
        assert!((a.symmetric_norm() - 3.0).abs() < 1e-10);
        assert_eq!(Matrix::<f64>::zeros(2, 2).symmetric_norm(), 0.0);
    }

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let b = orthonormal_basis(&[vec![1.0f64, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]], 1e-12);
        assert_eq!(b.len(), 2);
        assert!(dot(&b[0], &b[1]).abs() < 1e-14);
    }
}
