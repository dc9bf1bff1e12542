use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::rng::{normal, RngStream};
use crate::scalar::Real;

/// `N` particles in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Real> Ensemble<T> {
    pub fn from_flat(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 {
            return arg("ensemble needs N >= 1 and d >= 1");
        }
        if data.len() != n * d {
            return arg(format!("expected {} coordinates, got {}", n * d, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("ensemble coordinates must be finite".into()));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_points(points: &[Vec<T>]) -> Result<Self> {
        let d = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != d) {
            return arg("points have mixed dimensions");
        }
        Self::from_flat(points.len(), d, points.concat())
    }

    /// Every particle placed at `p`.
    pub fn consensus(n: usize, p: &[T]) -> Result<Self> {
        Self::from_flat(n, p.len(), p.repeat(n))
    }

    /// i.i.d. Gaussian particles `mean + std * xi`, drawn from `rng`'s stream
    /// family `tag`.
    pub fn gaussian(n: usize, mean: &[T], std: T, rng: &RngStream, tag: u64) -> Result<Self> {
        let d = mean.len();
        if n == 0 || d == 0 {
            return arg("ensemble needs N >= 1 and d >= 1");
        }
        let mut data = vec![T::zero(); n * d];
        data.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            let mut r = rng.substream(tag, i as u64);
            for (v, &m) in row.iter_mut().zip(mean) {
                *v = m + std * normal::<T, _>(&mut r);
            }
        });
        Self::from_flat(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.d];
        for p in self.points() {
            for (a, &b) in m.iter_mut().zip(p) {
                *a = *a + b;
            }
        }
        let n = T::lit(self.n as f64);
        m.iter_mut().for_each(|a| *a = *a / n);
        m
    }

    /// Per-coordinate (1/N-normalized) variance.
    pub fn variance(&self) -> Vec<T> {
        let m = self.mean();
        let mut v = vec![T::zero(); self.d];
        for p in self.points() {
            for ((a, &x), &mu) in v.iter_mut().zip(p).zip(&m) {
                *a = *a + (x - mu) * (x - mu);
            }
        }
        let n = T::lit(self.n as f64);
        v.iter_mut().for_each(|a| *a = *a / n);
        v
    }

    /// Trace of the ensemble covariance.
    pub fn variance_trace(&self) -> T {
        self.variance().into_iter().sum()
    }

    /// Coordinate `k` of every particle.
    pub fn coordinate(&self, k: usize) -> Vec<T> {
        self.points().map(|p| p[k]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Ensemble::<f64>::from_flat(0, 1, vec![]).is_err());
        assert!(Ensemble::<f64>::from_flat(2, 2, vec![0.0; 3]).is_err());
        assert!(Ensemble::<f64>::from_flat(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn moments() {
        let e = Ensemble::from_points(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(e.mean(), vec![1.0, 2.0]);
        assert_eq!(e.variance(), vec![1.0, 1.0]);
        assert_eq!(e.coordinate(1), vec![1.0, 3.0]);
    }

    #[test]
    fn gaussian_is_reproducible() {
        let rng = RngStream::new(3);
        let a = Ensemble::gaussian(100, &[1.0f64, -1.0], 0.5, &rng, 0).unwrap();
        let b = Ensemble::gaussian(100, &[1.0f64, -1.0], 0.5, &rng, 0).unwrap();
        assert_eq!(a, b);
    }
}
