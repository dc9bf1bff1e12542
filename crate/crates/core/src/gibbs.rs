//! Boltzmann-Gibbs weighted averages (the consensus point `m^alpha`).

use crate::error::{arg, Error, Result};
use crate::scalar::Real;

/// Normalized weights `exp(-alpha (E_i - min E))`.
pub fn gibbs_weights<T: Real>(energies: &[T], alpha: T) -> Result<Vec<T>> {
    if energies.is_empty() {
        return arg("gibbs weights of an empty set");
    }
    if alpha < T::zero() || !alpha.is_finite() {
        return arg("alpha must be finite and >= 0");
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("non-finite energy in gibbs weights".into()));
    }
    let e_min = energies.iter().copied().fold(T::infinity(), T::min);
    let mut w: Vec<T> = energies.iter().map(|&e| (-alpha * (e - e_min)).exp()).collect();
    // the minimizing entry has weight exactly 1, so the sum is >= 1
    let total: T = w.iter().copied().sum();
    w.iter_mut().for_each(|v| *v = *v / total);
    Ok(w)
}

/// Gibbs-weighted mean of a flat row-major point set with dimension `dim`.
pub fn gibbs_mean_flat<T: Real>(points: &[T], dim: usize, energies: &[T], alpha: T) -> Result<Vec<T>> {
    if dim == 0 || points.len() != dim * energies.len() {
        return arg("points and energies have inconsistent lengths");
    }
    let w = gibbs_weights(energies, alpha)?;
    // accumulate offsets from the minimizer so that coincident points
    // reproduce their common value exactly
    let best = (0..energies.len()).fold(0, |b, i| if energies[i] < energies[b] { i } else { b });
    let anchor = &points[best * dim..(best + 1) * dim];
    let mut m = vec![T::zero(); dim];
    for (p, &wi) in points.chunks_exact(dim).zip(&w) {
        for ((a, &x), &x0) in m.iter_mut().zip(p).zip(anchor) {
            *a = *a + wi * (x - x0);
        }
    }
    for (a, &x0) in m.iter_mut().zip(anchor) {
        *a = x0 + *a;
    }
    Ok(m)
}

/// Consensus point `sum_i x_i exp(-alpha E_i) / sum_i exp(-alpha E_i)`.
pub fn gibbs_mean<T: Real>(points: &[Vec<T>], energies: &[T], alpha: T) -> Result<Vec<T>> {
    if points.len() != energies.len() {
        return arg("points and energies differ in length");
    }
    let dim = points.first().map(Vec::len).unwrap_or(0);
    if points.iter().any(|p| p.len() != dim) {
        return arg("points have mixed dimensions");
    }
    gibbs_mean_flat(&points.concat(), dim, energies, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point() {
        assert_eq!(gibbs_mean(&[vec![3.0, -2.0]], &[7.0], 5.0).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn equal_energies_average() {
        let m = gibbs_mean(&[vec![0.0, 2.0], vec![4.0, 0.0]], &[1.0, 1.0], 10.0).unwrap();
        assert_eq!(m, vec![2.0, 1.0]);
    }

    #[test]
    fn large_alpha_picks_minimum() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = gibbs_mean(&pts, &[0.3, 0.1, 0.2], 1e6).unwrap();
        assert_eq!(m, vec![1.0]);
        // no overflow even for astronomically large alpha
        let m = gibbs_mean(&pts, &[0.3, 0.1, 0.2], 1e300).unwrap();
        assert_eq!(m, vec![1.0]);
    }

    #[test]
    fn errors() {
        assert!(gibbs_mean::<f64>(&[], &[], 1.0).is_err());
        assert!(matches!(
            gibbs_mean(&[vec![0.0]], &[f64::NAN], 1.0),
            Err(Error::Numeric(_))
        ));
        assert!(gibbs_mean(&[vec![0.0]], &[0.0], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance(
            es in prop::collection::vec(-5.0f64..5.0, 1..20),
            shift in -100.0f64..100.0,
            alpha in 0.0f64..30.0,
        ) {
            let pts: Vec<Vec<f64>> = (0..es.len()).map(|i| vec![i as f64, (i * i) as f64]).collect();
            let shifted: Vec<f64> = es.iter().map(|e| e + shift).collect();
            let a = gibbs_mean(&pts, &es, alpha).unwrap();
            let b = gibbs_mean(&pts, &shifted, alpha).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn zero_alpha_is_plain_mean(es in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let pts: Vec<Vec<f64>> = (0..es.len()).map(|i| vec![i as f64]).collect();
            let m = gibbs_mean(&pts, &es, 0.0).unwrap();
            let plain = (es.len() - 1) as f64 / 2.0;
            prop_assert!((m[0] - plain).abs() < 1e-12);
        }
    }
}
