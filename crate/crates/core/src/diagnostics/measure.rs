use crate::ensemble::Ensemble;
use crate::error::{arg, Result};
use crate::scalar::Real;

/// Weighted point cloud in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    support: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> EmpiricalMeasure<T> {
    /// Normalizes `weights`; they must be nonnegative with positive sum.
    pub fn new(dim: usize, support: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 || weights.is_empty() || support.len() != dim * weights.len() {
            return arg("measure support and weights have inconsistent lengths");
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return arg("measure weights must be finite and nonnegative");
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return arg("measure weights sum to zero");
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, support, weights })
    }

    /// Uniform weights `1/N` on the particles.
    pub fn uniform(ensemble: &Ensemble<T>) -> Self {
        let n = ensemble.n();
        let w = T::one() / T::lit(n as f64);
        Self {
            dim: ensemble.dim(),
            support: ensemble.as_flat().to_vec(),
            weights: vec![w; n],
        }
    }

    pub fn dirac(p: &[T]) -> Result<Self> {
        Self::new(p.len(), p.to_vec(), vec![T::one()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.support.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn support_flat(&self) -> &[T] {
        &self.support
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for (p, &w) in self.points().zip(&self.weights) {
            for (a, &x) in m.iter_mut().zip(p) {
                *a = *a + w * x;
            }
        }
        m
    }
}

/// Uniform 1D grid `a = x_0 < ... < x_{n-1} = b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 || !(b > a) || !a.is_finite() || !b.is_finite() {
            return arg("grid needs n >= 2 and a < b");
        }
        Ok(Self { a, b, n })
    }

    /// Default 256-node grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width, 256)
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Trapezoid quadrature weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.n];
        w[0] = 0.5 * h;
        w[self.n - 1] = 0.5 * h;
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.trapezoid_weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Density samples on a uniform grid, normalized to unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridDensity1D {
    pub fn normalized(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return arg("density values do not match the grid");
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return arg("density values must be finite and nonnegative");
        }
        let mass = grid.integrate(&values);
        if !(mass > 0.0) {
            return Err(crate::Error::Numeric("density has zero mass on the grid".into()));
        }
        Ok(Self {
            grid,
            values: values.into_iter().map(|v| v / mass).collect(),
        })
    }

    /// Histogram density of 1D samples with `bins` equal bins on `[a, b]`,
    /// sampled at the bin centres. Samples outside `[a, b]` are dropped.
    pub fn histogram<T: Real>(samples: &[T], a: f64, b: f64, bins: usize) -> Result<Self> {
        if bins < 2 || !(b > a) {
            return arg("histogram needs at least two bins on a < b");
        }
        let width = (b - a) / bins as f64;
        let mut counts = vec![0.0; bins];
        for s in samples {
            let x = s.as_f64();
            if x >= a && x <= b {
                let k = (((x - a) / width) as usize).min(bins - 1);
                counts[k] += 1.0;
            }
        }
        let grid = Grid1D::new(a + 0.5 * width, b - 0.5 * width, bins)?;
        Self::normalized(grid, counts)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_normalizes() {
        let m = EmpiricalMeasure::new(1, vec![0.0, 2.0], vec![3.0, 1.0]).unwrap();
        assert_eq!(m.weights(), &[0.75, 0.25]);
        assert_eq!(m.mean(), vec![0.5]);
        assert!(EmpiricalMeasure::new(1, vec![0.0], vec![0.0]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![0.0], vec![-1.0]).is_err());
        assert!(EmpiricalMeasure::<f64>::new(2, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn grid_density_has_unit_mass() {
        let g = Grid1D::new(-1.0, 3.0, 101).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp() + 0.1).collect();
        let d = GridDensity1D::normalized(g, vals).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert_eq!(g.node(100), 3.0);
    }

    #[test]
    fn histogram_bins() {
        let h = GridDensity1D::histogram(&[0.1f64, 0.2, 0.9, 5.0], 0.0, 1.0, 2).unwrap();
        assert_eq!(h.grid().nodes(), vec![0.25, 0.75]);
        // two nodes, trapezoid weight 0.25 each
        assert!((h.values()[0] / h.values()[1] - 2.0).abs() < 1e-12);
    }
}
