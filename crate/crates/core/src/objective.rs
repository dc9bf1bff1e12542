//! Objective functions and the benchmark corpus.

use std::fmt;
use std::sync::Arc;

use crate::error::{arg, Error, Result};
use crate::rng::{normal, RngStream};
use crate::scalar::{dist, norm, Real};

type EvalFn<T> = dyn Fn(&[T]) -> T + Send + Sync;
type GradFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

/// Energy `E: R^d -> R` with optional analytic gradient and known minimizer.
#[derive(Clone)]
pub struct Objective<T> {
    name: String,
    dim: usize,
    eval: Arc<EvalFn<T>>,
    grad: Option<Arc<GradFn<T>>>,
    known_min: Option<(Vec<T>, T)>,
}

impl<T> fmt::Debug for Objective<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_grad", &self.grad.is_some())
            .field("has_known_min", &self.known_min.is_some())
            .finish()
    }
}

impl<T: Real> Objective<T> {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            grad: None,
            known_min: None,
        }
    }

    pub fn with_grad(mut self, grad: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_known_min(mut self, x: Vec<T>, e: T) -> Self {
        self.known_min = Some((x, e));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        (self.eval)(x)
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn known_min(&self) -> Option<(&[T], T)> {
        self.known_min.as_ref().map(|(x, e)| (x.as_slice(), *e))
    }

    /// Gradient, analytic when available, otherwise central differences
    /// with step `1e-5 * (1 + |x_k|)`.
    pub fn gradient(&self, x: &[T], out: &mut [T]) -> Result<()> {
        match &self.grad {
            Some(g) => g(x, out),
            None => central_difference(|p| self.eval(p), x, out),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient of `{}`", self.name)));
        }
        Ok(())
    }
}

pub(crate) fn central_difference<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], out: &mut [T]) {
    let mut p = x.to_vec();
    for k in 0..x.len() {
        let h = T::lit(1e-5) * (T::one() + x[k].abs());
        p[k] = x[k] + h;
        let fp = f(&p);
        p[k] = x[k] - h;
        let fm = f(&p);
        p[k] = x[k];
        out[k] = (fp - fm) / (h + h);
    }
}

pub const BENCHMARKS: [&str; 4] = ["quadratic", "doublewell1d", "rastrigin", "ackley"];

/// Builds a corpus objective. Every entry carries its analytic gradient and
/// global minimizer.
///
/// * `quadratic`: `|x|^2 / 2`, minimum at the origin.
/// * `doublewell1d`: `sum (x_k^2 - 1)^2`, minima at `(+-1, ..., +-1)`; the
///   recorded minimizer is `(1, ..., 1)`.
/// * `rastrigin`: `10 d + sum (x_k^2 - 10 cos(2 pi x_k))`, minimum at the origin.
/// * `ackley`: the standard `a = 20, b = 0.2, c = 2 pi` form, minimum at the origin.
pub fn make_benchmark<T: Real>(name: &str, dim: usize) -> Result<Objective<T>> {
    if dim == 0 {
        return arg("benchmark dimension must be >= 1");
    }
    let zero = vec![T::zero(); dim];
    let two_pi = T::PI() + T::PI();
    let obj = match name {
        "quadratic" => Objective::new(name, dim, |x: &[T]| {
            x.iter().fold(T::zero(), |a, &v| a + v * v) * T::lit(0.5)
        })
        .with_grad(|x, g| g.copy_from_slice(x))
        .with_known_min(zero, T::zero()),
        "doublewell1d" => Objective::new(name, dim, |x: &[T]| {
            x.iter().fold(T::zero(), |a, &v| {
                let w = v * v - T::one();
                a + w * w
            })
        })
        .with_grad(|x, g| {
            for (gk, &v) in g.iter_mut().zip(x) {
                *gk = T::lit(4.0) * v * (v * v - T::one());
            }
        })
        .with_known_min(vec![T::one(); dim], T::zero()),
        "rastrigin" => {
            let ten = T::lit(10.0);
            Objective::new(name, dim, move |x: &[T]| {
                x.iter().fold(ten * T::lit(x.len() as f64), |a, &v| {
                    a + v * v - ten * (two_pi * v).cos()
                })
            })
            .with_grad(move |x, g| {
                for (gk, &v) in g.iter_mut().zip(x) {
                    *gk = v + v + ten * two_pi * (two_pi * v).sin();
                }
            })
            .with_known_min(zero, T::zero())
        }
        "ackley" => {
            let a = T::lit(20.0);
            let b = T::lit(0.2);
            Objective::new(name, dim, move |x: &[T]| {
                let n = T::lit(x.len() as f64);
                let s2 = x.iter().fold(T::zero(), |s, &v| s + v * v) / n;
                let sc = x.iter().fold(T::zero(), |s, &v| s + (two_pi * v).cos()) / n;
                // grouped so that both brackets vanish exactly at the origin
                let radial = a * (T::one() - (-b * s2.sqrt()).exp());
                let cosine = T::E() * (T::one() - (sc - T::one()).exp());
                (radial + cosine).max(T::zero())
            })
            .with_grad(move |x, g| {
                let n = T::lit(x.len() as f64);
                let s2 = x.iter().fold(T::zero(), |s, &v| s + v * v) / n;
                let sc = x.iter().fold(T::zero(), |s, &v| s + (two_pi * v).cos()) / n;
                let r = s2.sqrt();
                let e1 = (-b * r).exp();
                let e2 = sc.exp();
                for (gk, &v) in g.iter_mut().zip(x) {
                    let radial = if r > T::zero() { a * b * e1 * v / (n * r) } else { T::zero() };
                    *gk = radial + e2 * two_pi * (two_pi * v).sin() / n;
                }
            })
            .with_known_min(zero, T::zero())
        }
        other => return Err(Error::Corpus(other.to_string())),
    };
    Ok(obj)
}

/// Constants of the growth / inverse-continuity assumptions on `E`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GrowthConstants {
    pub l_e: f64,
    pub c_u: f64,
    pub c_l: f64,
    pub r_l: f64,
    pub c_p: f64,
    pub p: f64,
    pub r_p: f64,
    pub e_inf: f64,
}

impl GrowthConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.l_e, self.c_u, self.c_l, self.r_l, self.c_p, self.p, self.r_p, self.e_inf,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            arg("growth constants must be strictly positive")
        }
    }
}

/// Fraction of sampled points (or pairs) satisfying one inequality.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    /// Points for which the inequality applies (domain restriction).
    pub applicable: usize,
    pub satisfied: usize,
    /// `satisfied / applicable`, 1 when nothing applies.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GrowthReport {
    pub lipschitz: InequalityCheck,
    pub upper_growth: InequalityCheck,
    pub lower_growth: InequalityCheck,
    pub inverse_continuity: InequalityCheck,
    pub far_gap: InequalityCheck,
}

impl GrowthReport {
    pub fn checks(&self) -> [&InequalityCheck; 5] {
        [
            &self.lipschitz,
            &self.upper_growth,
            &self.lower_growth,
            &self.inverse_continuity,
            &self.far_gap,
        ]
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks().iter().all(|c| c.satisfied == c.applicable)
    }
}

fn check(name: &'static str, applicable: usize, satisfied: usize) -> InequalityCheck {
    let fraction = if applicable == 0 { 1.0 } else { satisfied as f64 / applicable as f64 };
    InequalityCheck { name, applicable, satisfied, fraction }
}

/// Samples `n_samples` points `x* + spread * xi` (and consecutive pairs for
/// the Lipschitz-type bound) and counts how often each inequality holds.
pub fn verify_growth_conditions<T: Real>(
    obj: &Objective<T>,
    constants: &GrowthConstants,
    n_samples: usize,
    spread: f64,
    rng: &RngStream,
) -> Result<GrowthReport> {
    constants.validate()?;
    let (x_star, e_star) = obj
        .known_min()
        .ok_or_else(|| Error::Precondition(format!("`{}` has no known minimizer", obj.name())))?;
    let x_star = x_star.to_vec();
    let e_star = e_star.as_f64();
    let d = obj.dim();
    let mut r = rng.substream(0x6772_6f77, 0);
    let pts: Vec<Vec<T>> = (0..n_samples)
        .map(|_| {
            x_star
                .iter()
                .map(|&c| c + T::lit(spread) * normal::<T, _>(&mut r))
                .collect()
        })
        .collect();
    let energies: Vec<f64> = pts.iter().map(|p| obj.eval(p).as_f64()).collect();
    let c = constants;

    let mut lip = 0;
    for (w, e) in pts.windows(2).zip(energies.windows(2)) {
        let lhs = (e[0] - e[1]).abs();
        let rhs = c.l_e
            * (1.0 + norm(&w[0]).as_f64() + norm(&w[1]).as_f64())
            * dist(&w[0], &w[1]).as_f64();
        if lhs <= rhs {
            lip += 1;
        }
    }
    let (mut up, mut low_n, mut low, mut inv_n, mut inv, mut far_n, mut far) = (0, 0, 0, 0, 0, 0, 0);
    for (p, &e) in pts.iter().zip(&energies) {
        let gap = e - e_star;
        let r_abs = norm(p).as_f64();
        let r_star = dist(p, &x_star).as_f64();
        if gap <= c.c_u * (1.0 + r_abs * r_abs) {
            up += 1;
        }
        if r_abs > c.r_l {
            low_n += 1;
            if gap >= c.c_l * r_abs * r_abs {
                low += 1;
            }
        }
        if r_star <= c.r_p {
            inv_n += 1;
            if c.c_p * r_star.powf(c.p) <= gap {
                inv += 1;
            }
        } else {
            far_n += 1;
            if c.e_inf < gap {
                far += 1;
            }
        }
    }
    debug_assert_eq!(d, x_star.len());
    Ok(GrowthReport {
        lipschitz: check("lipschitz", n_samples.saturating_sub(1), lip),
        upper_growth: check("upper_growth", n_samples, up),
        lower_growth: check("lower_growth", low_n, low),
        inverse_continuity: check("inverse_continuity", inv_n, inv),
        far_gap: check("far_gap", far_n, far),
    })
}
