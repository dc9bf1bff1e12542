//! Probability-level diagnostics: Gibbs densities, relative entropy, the
//! entropy dissipation functional, the Laplace functional and Wasserstein-2
//! distances.

mod measure;

pub use measure::{EmpiricalMeasure, Grid1D, GridDensity1D};

use crate::error::{arg, Error, Result};
use crate::objective::Objective;
use crate::rng::{normal, RngStream};
use crate::scalar::Real;

/// Floor applied to densities before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Boltzmann-Gibbs density `exp(-E/T) / Z_T` on `grid`, with `Z_T` by
/// trapezoid quadrature. Energies are shifted by their grid minimum before
/// exponentiation.
pub fn gibbs_density<T: Real>(obj: &Objective<T>, temperature: f64, grid: Grid1D) -> Result<GridDensity1D> {
    let (values, _) = gibbs_profile(obj, temperature, grid)?;
    GridDensity1D::normalized(grid, values)
}

/// Unnormalized shifted Gibbs factor on the grid together with the
/// normalizing constant `Z_T = int exp(-E/T)`.
pub fn gibbs_normalizer<T: Real>(obj: &Objective<T>, temperature: f64, grid: Grid1D) -> Result<f64> {
    gibbs_profile(obj, temperature, grid).map(|(_, z)| z)
}

fn grid_energies<T: Real>(obj: &Objective<T>, grid: &Grid1D) -> Result<Vec<f64>> {
    if obj.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "grid densities need a 1D objective, `{}` has d = {}",
            obj.name(),
            obj.dim()
        )));
    }
    let e: Vec<f64> = grid
        .nodes()
        .into_iter()
        .map(|x| obj.eval(&[T::lit(x)]).as_f64())
        .collect();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite energy on the grid".into()));
    }
    Ok(e)
}

fn gibbs_profile<T: Real>(obj: &Objective<T>, temperature: f64, grid: Grid1D) -> Result<(Vec<f64>, f64)> {
    if !(temperature > 0.0) {
        return arg("temperature must be positive");
    }
    let e = grid_energies(obj, &grid)?;
    let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
    let vals: Vec<f64> = e.iter().map(|v| (-(v - e_min) / temperature).exp()).collect();
    let shifted_mass = grid.integrate(&vals);
    if !(shifted_mass > 0.0) {
        return Err(Error::Numeric("gibbs density underflows on every node".into()));
    }
    let z = shifted_mass * (-e_min / temperature).exp();
    Ok((vals, z))
}

/// Which integrand the relative entropy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlOrientation {
    /// `int g log(g / f)`, the Kullback-Leibler divergence of `g` from `f`.
    #[default]
    Standard,
    /// `int f log(g / f)`, integrating against the reference density.
    ReferenceWeighted,
}

/// Relative entropy of `g` with respect to `f` on a common grid.
pub fn kl_divergence(g: &GridDensity1D, f: &GridDensity1D) -> Result<f64> {
    kl_divergence_with(g, f, KlOrientation::Standard)
}

pub fn kl_divergence_with(g: &GridDensity1D, f: &GridDensity1D, orientation: KlOrientation) -> Result<f64> {
    if g.grid() != f.grid() {
        return arg("relative entropy needs a common grid");
    }
    let integrand: Vec<f64> = g
        .values()
        .iter()
        .zip(f.values())
        .map(|(&gv, &fv)| {
            let gv_f = gv.max(DENSITY_FLOOR);
            let fv_f = fv.max(DENSITY_FLOOR);
            let ln = (gv_f / fv_f).ln();
            match orientation {
                KlOrientation::Standard => gv * ln,
                KlOrientation::ReferenceWeighted => fv * ln,
            }
        })
        .collect();
    let kl = g.grid().integrate(&integrand);
    Ok(match orientation {
        // quadrature of a nonnegative functional may round to -1e-17
        KlOrientation::Standard => kl.max(0.0),
        KlOrientation::ReferenceWeighted => kl,
    })
}

/// Kernel used for the outer expectation of the dissipation functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DissipationWeighting {
    /// Pairs `(x, y = x + sigma xi)` weighted by the Gaussian proposal density.
    Proposal { sigma: f64 },
    /// Plain double integral over the grid.
    Uniform,
}

/// Entropy dissipation functional
/// `1/2 E[ iint exp(-max(E(x), E(y))/T) / Z_T h(g(y)/f(y), g(x)/f(x)) dx dy ]`
/// with `h(u, v) = (u - v)(ln u - ln v)` and `f` the Gibbs density at `T`.
pub fn dissipation_functional<T: Real>(
    g: &GridDensity1D,
    obj: &Objective<T>,
    temperature: f64,
    weighting: DissipationWeighting,
) -> Result<f64> {
    let grid = *g.grid();
    let f = gibbs_density(obj, temperature, grid)?;
    let e = grid_energies(obj, &grid)?;
    let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
    // exp(-max/T)/Z_T == exp(-(max - e_min)/T) / Z_shifted
    let z_shifted = grid.integrate(
        &e.iter()
            .map(|v| (-(v - e_min) / temperature).exp())
            .collect::<Vec<_>>(),
    );
    let ratio: Vec<f64> = g
        .values()
        .iter()
        .zip(f.values())
        .map(|(&gv, &fv)| gv.max(DENSITY_FLOOR) / fv.max(DENSITY_FLOOR))
        .collect();
    let w = grid.trapezoid_weights();
    let x = grid.nodes();
    let kernel = |dx: f64| match weighting {
        DissipationWeighting::Proposal { sigma } => {
            (-(dx * dx) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        }
        DissipationWeighting::Uniform => 1.0,
    };
    if let DissipationWeighting::Proposal { sigma } = weighting {
        if !(sigma > 0.0) {
            return arg("proposal scale must be positive");
        }
    }
    let mut total = 0.0;
    for i in 0..grid.n {
        for j in 0..grid.n {
            if i == j {
                continue;
            }
            let (u, v) = (ratio[j], ratio[i]);
            let h = (u - v) * (u.ln() - v.ln());
            let boltz = (-(e[i].max(e[j]) - e_min) / temperature).exp() / z_shifted;
            total += w[i] * w[j] * kernel(x[j] - x[i]) * boltz * h;
        }
    }
    Ok(0.5 * total)
}

/// Anything that can be viewed as weighted points for the Laplace functional.
pub trait WeightedPoints<T> {
    /// `(point, weight)` pairs with positive weight.
    fn weighted_points(&self) -> Vec<(Vec<T>, f64)>;
}

impl<T: Real> WeightedPoints<T> for EmpiricalMeasure<T> {
    fn weighted_points(&self) -> Vec<(Vec<T>, f64)> {
        self.points()
            .zip(self.weights())
            .filter(|(_, w)| **w > T::zero())
            .map(|(p, w)| (p.to_vec(), w.as_f64()))
            .collect()
    }
}

impl<T: Real> WeightedPoints<T> for GridDensity1D {
    fn weighted_points(&self) -> Vec<(Vec<T>, f64)> {
        let g = self.grid();
        g.trapezoid_weights()
            .iter()
            .zip(self.values())
            .enumerate()
            .filter(|(_, (_, v))| **v > 0.0)
            .map(|(i, (w, v))| (vec![T::lit(g.node(i))], w * v))
            .collect()
    }
}

/// `-T ln int exp(-E/T) f`, evaluated with the minimum energy over the
/// support factored out.
pub fn laplace_functional<T: Real, M: WeightedPoints<T> + ?Sized>(
    measure: &M,
    obj: &Objective<T>,
    temperature: f64,
) -> Result<f64> {
    if !(temperature > 0.0) {
        return arg("temperature must be positive");
    }
    let pts = measure.weighted_points();
    if pts.is_empty() {
        return arg("measure has empty support");
    }
    let e: Vec<f64> = pts.iter().map(|(p, _)| obj.eval(p).as_f64()).collect();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite energy on the support".into()));
    }
    let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
    let total_w: f64 = pts.iter().map(|(_, w)| w).sum();
    let s: f64 = pts
        .iter()
        .zip(&e)
        .map(|((_, w), ei)| w / total_w * (-(ei - e_min) / temperature).exp())
        .sum();
    Ok(e_min - temperature * s.ln())
}

/// Smallest energy over the support of `measure`.
pub fn support_min<T: Real, M: WeightedPoints<T> + ?Sized>(measure: &M, obj: &Objective<T>) -> f64 {
    measure
        .weighted_points()
        .iter()
        .map(|(p, _)| obj.eval(p).as_f64())
        .fold(f64::INFINITY, f64::min)
}

/// Exact 1D Wasserstein-2 distance between two empirical samples with
/// uniform weights. For equal sizes this is the root mean square of the
/// sorted differences; otherwise the two quantile functions are integrated
/// exactly over the merged breakpoints.
pub fn wasserstein2_1d<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return arg("wasserstein distance of an empty sample");
    }
    let mut x: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
    let mut y: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample".into()));
    }
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let sq = if n == m {
        x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / n as f64
    } else {
        let (mut i, mut j) = (0usize, 0usize);
        let mut u = 0.0;
        let mut acc = 0.0;
        while i < n && j < m {
            // next breakpoint of either quantile function, compared exactly
            // as (i+1)/n vs (j+1)/m
            let lhs = (i as u128 + 1) * m as u128;
            let rhs = (j as u128 + 1) * n as u128;
            let next = if lhs <= rhs { (i + 1) as f64 / n as f64 } else { (j + 1) as f64 / m as f64 };
            let diff = x[i] - y[j];
            acc += (next - u) * diff * diff;
            u = next;
            if lhs <= rhs {
                i += 1;
            }
            if rhs <= lhs {
                j += 1;
            }
        }
        acc
    };
    Ok(sq.max(0.0).sqrt())
}

/// Sliced Wasserstein-2 distance scaled by `sqrt(d)`:
/// `sqrt(d * mean_theta W2(<a, theta>, <b, theta>)^2)` over random unit
/// directions. The `sqrt(d)` factor makes a pure translation by `v` report
/// `|v|` as the exact metric does.
pub fn sliced_w2<T: Real>(
    a: &[T],
    b: &[T],
    dim: usize,
    n_projections: usize,
    rng: &RngStream,
) -> Result<f64> {
    if dim < 2 {
        return arg("sliced distance needs d >= 2; use wasserstein2_1d");
    }
    if a.len() % dim != 0 || b.len() % dim != 0 || a.is_empty() || b.is_empty() {
        return arg("sample arrays are not multiples of the dimension");
    }
    if n_projections == 0 {
        return arg("need at least one projection");
    }
    let mut acc = 0.0;
    for k in 0..n_projections {
        let mut r = rng.substream(0x736c_6963, k as u64);
        let mut theta: Vec<f64> = (0..dim).map(|_| normal::<f64, _>(&mut r)).collect();
        let nrm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        theta.iter_mut().for_each(|t| *t /= nrm);
        let proj = |s: &[T]| -> Vec<f64> {
            s.chunks_exact(dim)
                .map(|p| p.iter().zip(&theta).map(|(x, t)| x.as_f64() * t).sum())
                .collect()
        };
        let w = wasserstein2_1d(&proj(a), &proj(b))?;
        acc += w * w;
    }
    Ok((dim as f64 * acc / n_projections as f64).sqrt())
}
