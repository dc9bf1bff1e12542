//! Particle swarm optimization: the classic update, the regularized
//! stochastic system with inertia and personal-best memory, its Lyapunov
//! and well-preparedness diagnostics, and the first-order consensus dynamics
//! with memory obtained as the inertia vanishes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::wasserstein2_1d;
use crate::ensemble::Ensemble;
use crate::error::{arg, Error, Result};
use crate::gibbs::gibbs_mean_flat;
use crate::objective::Objective;
use crate::report::{Cell, CsvTable, DistanceReport, DistanceRow};
use crate::rng::{fill_normal, uniform, RngStream};
use crate::scalar::{dist, dot, norm2, Real};

/// Positions, velocities and personal bests of `n` particles in `R^d`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState<T> {
    n: usize,
    d: usize,
    pub x: Vec<T>,
    pub v: Vec<T>,
    pub y: Vec<T>,
    /// `E(y_i)`.
    pub e_y: Vec<T>,
}

impl<T: Real> SwarmState<T> {
    /// Personal bests start at the positions. `v = None` means zero velocity.
    pub fn new(x: &Ensemble<T>, v: Option<&Ensemble<T>>, obj: &Objective<T>) -> Result<Self> {
        if x.dim() != obj.dim() {
            return arg("swarm and objective dimensions differ");
        }
        let v = match v {
            Some(v) if v.n() != x.n() || v.dim() != x.dim() => return arg("velocity ensemble has the wrong shape"),
            Some(v) => v.as_flat().to_vec(),
            None => vec![T::zero(); x.as_flat().len()],
        };
        let e_y: Vec<T> = x.as_flat().par_chunks_exact(x.dim()).map(|p| obj.eval(p)).collect();
        if e_y.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numeric("non-finite energy in the initial swarm".into()));
        }
        Ok(Self { n: x.n(), d: x.dim(), x: x.as_flat().to_vec(), v, y: x.as_flat().to_vec(), e_y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn position(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn velocity(&self, i: usize) -> &[T] {
        &self.v[i * self.d..(i + 1) * self.d]
    }

    pub fn personal_best(&self, i: usize) -> &[T] {
        &self.y[i * self.d..(i + 1) * self.d]
    }

    /// Index of the best personal best; ties go to the lowest index.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.e_y.iter().enumerate() {
            if *e < self.e_y[best] {
                best = i;
            }
        }
        best
    }

    pub fn global_best(&self) -> &[T] {
        self.personal_best(self.best_index())
    }

    pub fn global_best_energy(&self) -> T {
        self.e_y[self.best_index()]
    }

    pub fn positions(&self) -> Result<Ensemble<T>> {
        Ensemble::from_flat(self.n, self.d, self.x.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).chain(&self.y).all(|v| v.is_finite())
    }

    /// Coordinatewise mean of the positions.
    pub fn mean_position(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.d];
        for p in self.x.chunks_exact(self.d) {
            for (a, &v) in m.iter_mut().zip(p) {
                *a = *a + v;
            }
        }
        let nf = T::lit(self.n as f64);
        m.iter_mut().for_each(|a| *a = *a / nf);
        m
    }

    /// Consensus point of the personal bests.
    pub fn consensus(&self, alpha: T) -> Result<Vec<T>> {
        gibbs_mean_flat(&self.y, self.d, &self.e_y, alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoClassicParams {
    pub c1: f64,
    pub c2: f64,
}

impl Default for PsoClassicParams {
    fn default() -> Self {
        Self { c1: 2.0, c2: 2.0 }
    }
}

/// `v' = v + c1 r1 (y - x) + c2 r2 (y_best - x)`, `x' = x + v'`, with
/// `r ~ U[0,1]^d`; personal bests replaced on strict improvement.
pub fn pso_classic_step<T: Real>(
    swarm: &SwarmState<T>,
    params: &PsoClassicParams,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<SwarmState<T>> {
    let d = swarm.d;
    let g = swarm.global_best().to_vec();
    let (c1, c2) = (T::lit(params.c1), T::lit(params.c2));
    let mut next = swarm.clone();
    next.x
        .par_chunks_mut(d)
        .zip(next.v.par_chunks_mut(d))
        .zip(next.y.par_chunks_mut(d))
        .zip(next.e_y.par_iter_mut())
        .enumerate()
        .for_each(|(i, (((x, v), y), ey))| {
            let mut r = rng.substream(step, i as u64);
            for k in 0..d {
                let r1: T = uniform(&mut r);
                let r2: T = uniform(&mut r);
                v[k] = v[k] + c1 * r1 * (y[k] - x[k]) + c2 * r2 * (g[k] - x[k]);
                x[k] = x[k] + v[k];
            }
            let e = obj.eval(x);
            if e < *ey {
                y.copy_from_slice(x);
                *ey = e;
            }
        });
    Ok(next)
}

/// Which smoothed step function gates the personal-best update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeavisideForm {
    /// `(1 + tanh(beta z)) / 2`, converging to the Heaviside function.
    #[default]
    Smooth,
    /// `1 + tanh(beta z) / 2`.
    Printed,
}

pub fn smooth_heaviside<T: Real>(z: T, beta: T) -> T {
    let half = T::lit(0.5);
    half + half * (beta * z).tanh()
}

pub fn heaviside<T: Real>(form: HeavisideForm, z: T, beta: T) -> T {
    match form {
        HeavisideForm::Smooth => smooth_heaviside(z, beta),
        HeavisideForm::Printed => T::one() + T::lit(0.5) * (beta * z).tanh(),
    }
}

/// Coefficients of the stochastic swarm system
///
/// ```text
/// dX = V dt
/// m dV = -gamma V dt + l1 (Y - X) dt + s1 (Y - X) . dB1 + l2 (m_a - X) dt + s2 (m_a - X) . dB2
/// dY = nu H(E(Y) - E(X)) (X - Y) dt
/// ```
/// with friction `gamma = 1 - m` and `m_a` the consensus point of the
/// personal bests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub inertia: f64,
    pub nu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub dt: f64,
    #[serde(default)]
    pub heaviside: HeavisideForm,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            sigma1: 0.7,
            sigma2: 0.7,
            inertia: 0.5,
            nu: 1.0,
            beta: 30.0,
            alpha: 50.0,
            dt: 0.01,
            heaviside: HeavisideForm::Smooth,
        }
    }
}

impl PsoParams {
    /// The system obtained from the classic update with `r ~ 1 + xi/sqrt(3)`:
    /// unit inertia, no friction, drift `c` and noise `c / sqrt(3)`.
    pub fn classic_sde(c1: f64, c2: f64, nu: f64, beta: f64, alpha: f64, dt: f64) -> Self {
        let s3 = 3f64.sqrt();
        Self {
            lambda1: c1,
            lambda2: c2,
            sigma1: c1 / s3,
            sigma2: c2 / s3,
            inertia: 1.0,
            nu,
            beta,
            alpha,
            dt,
            heaviside: HeavisideForm::Smooth,
        }
    }

    pub fn friction(&self) -> f64 {
        1.0 - self.inertia
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return arg("inertia m must lie in (0, 1]");
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return arg("time step must lie in (0, 1]");
        }
        let nonneg = [self.lambda1, self.lambda2, self.sigma1, self.sigma2, self.nu, self.alpha];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return arg("drift, noise, memory and alpha coefficients must be finite and >= 0");
        }
        if !(self.beta > 0.0) {
            return arg("smoothness beta must be positive");
        }
        Ok(())
    }
}

fn personal_best_update<T: Real>(
    x: &[T],
    y: &mut [T],
    ey: &mut T,
    params: &PsoParams,
    obj: &Objective<T>,
) {
    if params.nu == 0.0 {
        return;
    }
    let ex = obj.eval(x);
    let h = heaviside(params.heaviside, *ey - ex, T::lit(params.beta));
    let rate = T::lit(params.nu * params.dt) * h;
    if !ex.is_finite() || rate == T::zero() {
        return;
    }
    let mut moved = false;
    for (yk, &xk) in y.iter_mut().zip(x) {
        let step = rate * (xk - *yk);
        if step != T::zero() {
            moved = true;
        }
        *yk = *yk + step;
    }
    if moved {
        *ey = obj.eval(y);
    }
}

/// Semi-implicit Euler-Maruyama step: velocity first, then `X' = X + dt V'`,
/// then the personal bests against the new positions. The consensus point
/// comes from the pre-step personal bests. Particle `i` draws `d` normals
/// for `B1` then `d` for `B2` from substream `(step, i)`.
pub fn pso_sde_step<T: Real>(
    swarm: &SwarmState<T>,
    params: &PsoParams,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<SwarmState<T>> {
    params.validate()?;
    let d = swarm.d;
    let ma = swarm.consensus(T::lit(params.alpha))?;
    let m = T::lit(params.inertia);
    let gamma = T::lit(params.friction());
    let dt = T::lit(params.dt);
    let sdt = dt.sqrt();
    let (l1, l2, s1, s2) = (T::lit(params.lambda1), T::lit(params.lambda2), T::lit(params.sigma1), T::lit(params.sigma2));
    let mut next = swarm.clone();
    next.x
        .par_chunks_mut(d)
        .zip(next.v.par_chunks_mut(d))
        .zip(next.y.par_chunks_mut(d))
        .zip(next.e_y.par_iter_mut())
        .enumerate()
        .for_each(|(i, (((x, v), y), ey))| {
            let mut r = rng.substream(step, i as u64);
            let mut xi = vec![T::zero(); 2 * d];
            fill_normal(&mut r, &mut xi);
            for k in 0..d {
                let (dy, dm) = (y[k] - x[k], ma[k] - x[k]);
                let drift = -gamma * v[k] + l1 * dy + l2 * dm;
                let noise = s1 * dy * xi[k] + s2 * dm * xi[d + k];
                v[k] = v[k] + (dt * drift + sdt * noise) / m;
                x[k] = x[k] + dt * v[k];
            }
            personal_best_update(x, y, ey, params, obj);
        });
    if !next.is_finite() {
        return Err(Error::Divergence {
            last_valid_time: step as f64 * params.dt,
            reason: "swarm left the finite range".into(),
        });
    }
    Ok(next)
}

/// Euler-Maruyama step of the first-order consensus dynamics with memory
///
/// ```text
/// dX = [l1 (Y - X) + l2 (m_a - X)] dt + s1 (Y - X) . dB1 + s2 (m_a - X) . dB2
/// dY = nu H(E(Y) - E(X)) (X - Y) dt
/// ```
///
/// The `B1` term is written with `Y - X`, equal in law to `X - Y`, so that
/// with the same substreams its noise coincides with [`pso_sde_step`].
/// Velocities are left at zero.
pub fn cbo_memory_step<T: Real>(
    swarm: &SwarmState<T>,
    params: &PsoParams,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<SwarmState<T>> {
    params.validate()?;
    let d = swarm.d;
    let ma = swarm.consensus(T::lit(params.alpha))?;
    let dt = T::lit(params.dt);
    let sdt = dt.sqrt();
    let (l1, l2, s1, s2) = (T::lit(params.lambda1), T::lit(params.lambda2), T::lit(params.sigma1), T::lit(params.sigma2));
    let mut next = swarm.clone();
    next.v.iter_mut().for_each(|v| *v = T::zero());
    next.x
        .par_chunks_mut(d)
        .zip(next.y.par_chunks_mut(d))
        .zip(next.e_y.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((x, y), ey))| {
            let mut r = rng.substream(step, i as u64);
            let mut xi = vec![T::zero(); 2 * d];
            fill_normal(&mut r, &mut xi);
            for k in 0..d {
                let (dy, dm) = (y[k] - x[k], ma[k] - x[k]);
                x[k] = x[k] + dt * (l1 * dy + l2 * dm) + sdt * (s1 * dy * xi[k] + s2 * dm * xi[d + k]);
            }
            personal_best_update(x, y, ey, params, obj);
        });
    if !next.is_finite() {
        return Err(Error::Divergence {
            last_valid_time: step as f64 * params.dt,
            reason: "consensus swarm left the finite range".into(),
        });
    }
    Ok(next)
}

/// Ensemble average of
///
/// ```text
/// (g/2m)^2 |X - EX|^2 + 3/2 |V|^2 + 1/2 (3 l1/m - g^2/m^2) |X - Y|^2
///   + (g/2m) <X - EX, V> + (g/m) <X - Y, V>
/// ```
/// with `g = 1 - m` and `EX` the ensemble mean.
pub fn lyapunov_functional<T: Real>(swarm: &SwarmState<T>, params: &PsoParams) -> T {
    let m = params.inertia;
    let g = params.friction();
    let a = T::lit((g / (2.0 * m)).powi(2));
    let b = T::lit(1.5);
    let c = T::lit(0.5 * (3.0 * params.lambda1 / m - g * g / (m * m)));
    let e = T::lit(g / (2.0 * m));
    let f = T::lit(g / m);
    let mean = swarm.mean_position();
    let d = swarm.d;
    let mut dx = vec![T::zero(); d];
    let mut xy = vec![T::zero(); d];
    let mut total = T::zero();
    for i in 0..swarm.n {
        let (x, v, y) = (swarm.position(i), swarm.velocity(i), swarm.personal_best(i));
        for k in 0..d {
            dx[k] = x[k] - mean[k];
            xy[k] = x[k] - y[k];
        }
        total = total + a * norm2(&dx) + b * norm2(v) + c * norm2(&xy) + e * dot(&dx, v) + f * dot(&xy, v);
    }
    total / T::lit(swarm.n as f64)
}

/// Constants of the well-preparedness condition, with the expectations
/// estimated from the given swarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellPreparedness {
    pub mu1: f64,
    pub mu2: f64,
    pub chi: f64,
    /// Left side of the smallness condition (to compare against 3/32).
    pub lhs: f64,
    /// `E[exp(-alpha (E(Y0) - min E))]` over the swarm.
    pub gibbs_mass: f64,
    pub satisfied: bool,
}

/// `num / den` with `0/0 = 0` and `x/0 = +inf` for `x > 0`.
fn ratio(num: f64, den: f64) -> f64 {
    if den != 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates the well-preparedness constants for `params` and the initial
/// swarm. `c_e` bounds the Hessian norm of `E`; `min_e` defaults to the
/// known minimum of `obj`, else to the smallest personal-best energy.
pub fn well_preparedness<T: Real>(
    params: &PsoParams,
    swarm: &SwarmState<T>,
    obj: &Objective<T>,
    c_e: f64,
    min_e: Option<f64>,
) -> Result<WellPreparedness> {
    params.validate()?;
    if !(c_e > 0.0) {
        return arg("hessian bound must be positive");
    }
    let PsoParams { lambda1: l1, lambda2: l2, sigma2: s2, inertia: m, nu, beta, alpha, .. } = *params;
    let g = params.friction();
    let min_e = min_e
        .or_else(|| obj.known_min().map(|(_, e)| e.as_f64()))
        .unwrap_or_else(|| swarm.e_y.iter().fold(f64::INFINITY, |a, e| a.min(e.as_f64())));
    let n = swarm.n as f64;
    let gibbs_mass = swarm.e_y.iter().map(|e| (-alpha * (e.as_f64() - min_e)).exp()).sum::<f64>() / n;
    if !(gibbs_mass > 0.0) || !gibbs_mass.is_finite() {
        return Err(Error::Numeric("gibbs normalization of the initial personal bests vanishes".into()));
    }
    let h0 = lyapunov_functional(swarm, params).as_f64();
    let mut grad = vec![T::zero(); swarm.d];
    let mut grad_sq = 0.0;
    for i in 0..swarm.n {
        obj.gradient(swarm.position(i), &mut grad)?;
        grad_sq += norm2(&grad).as_f64();
    }
    grad_sq /= n;

    let inv_g = 1.0 / gibbs_mass;
    let k_a = ratio(9.0 * l2 * l2, g * m) + 3.0 * s2 * s2 / (m * m);
    let mu1 = (l1 + 2.0 * l2) * g / (2.0 * m).powi(2) - (k_a + 3.0 * l1 * g / (4.0 * m * m)) * 12.0 * inv_g;
    let mu2 = (l1 + l2) * g / (m * m) + nu * beta * (3.0 * l1 / m + g * g / (m * m))
        - 8.0 * nu * nu * g / m
        - ratio(l2 * l2 * g, 2.0 * m * m * l1)
        - 3.0 * s2 * s2 / (2.0 * m * m)
        - k_a
        - (k_a + 3.0 * l1 * g / (2.0 * m).powi(2)) * 24.0 * inv_g;
    let lead = (g / (2.0 * m)).min(mu1).min(mu2);
    let chi = 0.4 * lead / ((g / (2.0 * m)).powi(2) + 1.0 + 3.0 * l1 / m + 2.0 * (g / m).powi(2));
    let lhs = if chi > 0.0 {
        (ratio(alpha * nu * m, l1 * chi) * (c_e + 2.0 * alpha * alpha) + 24.0 * c_e * c_e * nu / (alpha * chi.powi(3))) * h0 * inv_g
            + 6.0 * nu / (alpha * chi) * grad_sq * inv_g
    } else {
        f64::INFINITY
    };
    let satisfied = mu1 > 0.0 && mu2 > 0.0 && lhs < 3.0 / 32.0;
    Ok(WellPreparedness { mu1, mu2, chi, lhs, gibbs_mass, satisfied })
}

/// Per-step record for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoStepStats {
    pub step: u64,
    pub best_energy: f64,
    pub lyapunov: f64,
    pub consensus_distance: Option<f64>,
    pub variance: f64,
}

pub fn pso_step_stats<T: Real>(step: u64, swarm: &SwarmState<T>, params: &PsoParams, obj: &Objective<T>) -> Result<PsoStepStats> {
    let ma = swarm.consensus(T::lit(params.alpha))?;
    let mean = swarm.mean_position();
    let mut var = T::zero();
    for p in swarm.x.chunks_exact(swarm.d) {
        var = var + p.iter().zip(&mean).fold(T::zero(), |a, (&x, &m)| a + (x - m) * (x - m));
    }
    Ok(PsoStepStats {
        step,
        best_energy: swarm.global_best_energy().as_f64(),
        lyapunov: lyapunov_functional(swarm, params).as_f64(),
        consensus_distance: obj.known_min().map(|(xs, _)| dist(&ma, xs).as_f64()),
        variance: (var / T::lit(swarm.n as f64)).as_f64(),
    })
}

pub fn pso_stats_table(rows: &[PsoStepStats]) -> CsvTable {
    let with_dist = rows.first().is_some_and(|r| r.consensus_distance.is_some());
    let mut cols = vec!["step", "best_energy", "lyapunov"];
    if with_dist {
        cols.push("consensus_distance_to_min");
    }
    cols.push("variance");
    let mut t = CsvTable::new(cols);
    for r in rows {
        let mut row = vec![Cell::from(r.step), Cell::from(r.best_energy), Cell::from(r.lyapunov)];
        if with_dist {
            row.push(Cell::from(r.consensus_distance.unwrap_or(f64::NAN)));
        }
        row.push(Cell::from(r.variance));
        t.push(row);
    }
    t
}

/// Settings of the zero-inertia comparison. `params.inertia` and
/// `params.dt` are overridden per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroInertiaConfig {
    pub params: PsoParams,
    pub horizon: f64,
    pub n: usize,
    pub init_mean: f64,
    pub init_std: f64,
    /// Base time step; the run with inertia `m` uses `min(dt, m / 10)`.
    pub dt: f64,
}

impl Default for ZeroInertiaConfig {
    fn default() -> Self {
        Self { params: PsoParams::default(), horizon: 1.0, n: 10_000, init_mean: 1.0, init_std: 1.0, dt: 1e-3 }
    }
}

fn run_swarm<T: Real>(
    init: &SwarmState<T>,
    params: &PsoParams,
    horizon: f64,
    obj: &Objective<T>,
    rng: &RngStream,
    memory: bool,
) -> Result<SwarmState<T>> {
    let steps = (horizon / params.dt).round().max(1.0) as u64;
    let p = PsoParams { dt: horizon / steps as f64, ..*params };
    let mut s = init.clone();
    for k in 0..steps {
        s = if memory { cbo_memory_step(&s, &p, obj, rng, k)? } else { pso_sde_step(&s, &p, obj, rng, k)? };
    }
    Ok(s)
}

/// For each inertia `m`, the W2 distance at `horizon` between the position
/// marginal of the swarm system and that of the consensus dynamics with
/// memory, from the same initial draw (zero velocity, personal bests at the
/// positions) and the same noise substreams. The noise floor compares two
/// consensus runs with independent noise.
pub fn zero_inertia_experiment<T: Real>(
    m_list: &[f64],
    obj: &Objective<T>,
    cfg: &ZeroInertiaConfig,
    rng: &RngStream,
) -> Result<DistanceReport> {
    if obj.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "zero-inertia comparison needs a 1D objective, got d = {}",
            obj.dim()
        )));
    }
    if m_list.is_empty() || m_list.iter().any(|m| !(*m > 0.0 && *m <= 1.0)) {
        return arg("inertia values must lie in (0, 1]");
    }
    if !(cfg.horizon > 0.0) || !(cfg.dt > 0.0) || cfg.n == 0 {
        return arg("invalid zero-inertia settings");
    }
    let x0 = Ensemble::gaussian(cfg.n, &[T::lit(cfg.init_mean)], T::lit(cfg.init_std), &rng.derive(0), 0)?;
    let init = SwarmState::new(&x0, None, obj)?;
    let base = PsoParams { dt: cfg.dt, ..cfg.params };
    base.validate()?;
    let reference = run_swarm(&init, &base, cfg.horizon, obj, &rng.derive(1), true)?;
    let twin = run_swarm(&init, &base, cfg.horizon, obj, &rng.derive(2), true)?;
    let noise_floor = wasserstein2_1d(&reference.x, &twin.x)?;
    let mut rows = Vec::new();
    for &m in m_list {
        let p = PsoParams { inertia: m, dt: cfg.dt.min(m / 10.0), ..cfg.params };
        let out = run_swarm(&init, &p, cfg.horizon, obj, &rng.derive(1), false)?;
        rows.push(DistanceRow { scale: m, distance: wasserstein2_1d(&out.x, &reference.x)? });
    }
    Ok(DistanceReport { rows, noise_floor, seed: rng.seed(), n: cfg.n, horizon: cfg.horizon })
}

/// Draws `c r` with `r ~ U[0, 1]`; exposed for checking the moments of the
/// random acceleration coefficient.
pub fn acceleration_sample<T: Real, R: Rng + ?Sized>(c: T, rng: &mut R) -> T {
    c * uniform::<T, R>(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_benchmark;
    use crate::rng::normal;
    use proptest::prelude::*;

    fn swarm_from(points: &[Vec<f64>], obj: &Objective<f64>) -> SwarmState<f64> {
        SwarmState::new(&Ensemble::from_points(points).unwrap(), None, obj).unwrap()
    }

    #[test]
    fn heaviside_examples() {
        assert_eq!(smooth_heaviside(0.0, 3.0), 0.5);
        assert_eq!(smooth_heaviside(0.1, 1e4), 1.0);
        assert_eq!(smooth_heaviside(-0.1, 1e4), 0.0);
        // the printed form does not approach a step function
        assert_eq!(heaviside(HeavisideForm::Printed, -0.1, 1e4), 0.5);
        assert_eq!(heaviside(HeavisideForm::Printed, 0.1, 1e4), 1.5);
    }

    proptest! {
        #[test]
        fn heaviside_monotone_and_odd(z1 in -5.0f64..5.0, z2 in -5.0f64..5.0, beta in 0.01f64..100.0) {
            let (a, b) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
            prop_assert!(smooth_heaviside(a, beta) <= smooth_heaviside(b, beta));
            prop_assert!((smooth_heaviside(-z1, beta) - (1.0 - smooth_heaviside(z1, beta))).abs() < 1e-12);
            let h = smooth_heaviside(z1, beta);
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn consensus_is_fixed_point(seed in 0u64..100, p in -3.0f64..3.0, q in -3.0f64..3.0) {
            let obj = make_benchmark::<f64>("rastrigin", 2).unwrap();
            let s = swarm_from(&vec![vec![p, q]; 7], &obj);
            let params = PsoParams::default();
            prop_assert_eq!(&pso_sde_step(&s, &params, &obj, &RngStream::new(seed), 3).unwrap(), &s);
            prop_assert_eq!(&cbo_memory_step(&s, &params, &obj, &RngStream::new(seed), 3).unwrap(), &s);
        }
    }

    #[test]
    fn classic_free_transport_and_rest() {
        let obj = make_benchmark::<f64>("ackley", 2).unwrap();
        let x = Ensemble::from_points(&[vec![0.5, 1.0], vec![-1.0, 2.0]]).unwrap();
        let v = Ensemble::from_points(&[vec![0.25, -0.5], vec![1.0, 0.0]]).unwrap();
        let s = SwarmState::new(&x, Some(&v), &obj).unwrap();
        let out = pso_classic_step(&s, &PsoClassicParams { c1: 0.0, c2: 0.0 }, &obj, &RngStream::new(0), 0).unwrap();
        assert_eq!(out.position(0), &[0.75, 0.5]);
        assert_eq!(out.position(1), &[0.0, 2.0]);
        assert_eq!(out.v, s.v);
        // x = y = y_best: velocities unchanged
        let s = SwarmState::new(&Ensemble::consensus(3, &[0.2, 0.2]).unwrap(), Some(&Ensemble::consensus(3, &[0.1, 0.0]).unwrap()), &obj).unwrap();
        let out = pso_classic_step(&s, &PsoClassicParams::default(), &obj, &RngStream::new(0), 0).unwrap();
        assert_eq!(out.v, s.v);
    }

    #[test]
    fn acceleration_coefficient_has_unit_mean() {
        let mut r = RngStream::new(7).substream(0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| acceleration_sample(2.0, &mut r)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * sd / (n as f64).sqrt(), "{m}");
    }

    #[test]
    fn classic_bests_never_worsen() {
        let obj = make_benchmark::<f64>("rastrigin", 2).unwrap();
        let x0 = Ensemble::gaussian(50, &[2.0, 2.0], 2.0, &RngStream::new(1), 0).unwrap();
        let mut s = SwarmState::new(&x0, None, &obj).unwrap();
        let params = PsoClassicParams { c1: 1.0, c2: 1.0 };
        for k in 0..500 {
            let next = pso_classic_step(&s, &params, &obj, &RngStream::new(2), k).unwrap();
            assert!(next.global_best_energy() <= s.global_best_energy());
            for (a, b) in next.e_y.iter().zip(&s.e_y) {
                assert!(a <= b);
            }
            for i in 0..s.n() {
                assert_eq!(next.e_y[i], obj.eval(next.personal_best(i)));
            }
            s = next;
        }
    }

    #[test]
    fn global_best_ties_go_to_lowest_index() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let s = swarm_from(&[vec![2.0], vec![-1.0], vec![1.0]], &obj);
        assert_eq!(s.best_index(), 1);
    }

    #[test]
    fn sde_pure_inertia_transports_exactly() {
        let obj = make_benchmark::<f64>("quadratic", 2).unwrap();
        let x = Ensemble::from_points(&[vec![0.5, 1.0], vec![-1.0, 2.0]]).unwrap();
        let v = Ensemble::from_points(&[vec![0.25, -0.5], vec![1.0, 0.0]]).unwrap();
        let s = SwarmState::new(&x, Some(&v), &obj).unwrap();
        let p = PsoParams { lambda1: 0.0, lambda2: 0.0, sigma1: 0.0, sigma2: 0.0, inertia: 1.0, nu: 0.0, dt: 0.125, ..Default::default() };
        let out = pso_sde_step(&s, &p, &obj, &RngStream::new(0), 0).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert_eq!(out.position(i)[k], s.position(i)[k] + 0.125 * s.velocity(i)[k]);
            }
        }
        assert!(pso_sde_step(&s, &PsoParams { inertia: 0.0, ..p }, &obj, &RngStream::new(0), 0).is_err());
    }

    #[test]
    fn sde_noise_moments() {
        // one particle with Y - X = 1 and m_a = X: the velocity increment of
        // the classic system is c dt + (c/sqrt 3) sqrt(dt) xi
        let obj = Objective::new("flat", 1, |_: &[f64]| 0.0);
        let x = Ensemble::from_points(&[vec![0.0]]).unwrap();
        let mut s = SwarmState::new(&x, None, &obj).unwrap();
        s.y = vec![1.0];
        let (c, dt) = (2.0, 0.04);
        let p = PsoParams { nu: 0.0, ..PsoParams::classic_sde(c, 0.0, 0.0, 1.0, 1.0, dt) };
        let n = 100_000u64;
        let incr: Vec<f64> = (0..n).map(|k| pso_sde_step(&s, &p, &obj, &RngStream::new(5), k).unwrap().v[0] - c * dt).collect();
        let m = incr.iter().sum::<f64>() / n as f64;
        let var = incr.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = dt / 3.0 * c * c;
        assert!(m.abs() < 3.0 * (target / n as f64).sqrt());
        // variance of a sample variance of normals: 2 s^4 / (n - 1)
        assert!((var - target).abs() < 3.0 * target * (2.0 / (n - 1) as f64).sqrt(), "{var} vs {target}");
    }

    #[test]
    fn deterministic_sde_converges_to_reference() {
        // sigma = 0, one particle, quadratic 1D, no memory: compare with RK4
        // on dX = V, m dV = -g V + (l1 + l2)(y - X) with y fixed
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let p0 = PsoParams { sigma1: 0.0, sigma2: 0.0, nu: 0.0, inertia: 0.5, ..Default::default() };
        let (m, g, l) = (0.5, 0.5, 2.0);
        let (x0, v0, y) = (1.0, 0.3, -0.5);
        let rhs = |s: [f64; 2]| [s[1], (-g * s[1] + l * (y - s[0])) / m];
        let mut s = [x0, v0];
        let h = 1e-4;
        for _ in 0..10_000 {
            let k1 = rhs(s);
            let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for j in 0..2 {
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let mut errs = Vec::new();
        for dt in [0.01, 0.005] {
            let p = PsoParams { dt, ..p0 };
            let mut sw = swarm_from(&[vec![x0]], &obj);
            sw.v = vec![v0];
            sw.y = vec![y];
            sw.e_y = vec![obj.eval(&[y])];
            for k in 0..(1.0 / dt).round() as u64 {
                sw = pso_sde_step(&sw, &p, &obj, &RngStream::new(0), k).unwrap();
            }
            errs.push((sw.x[0] - s[0]).abs());
        }
        assert!(errs[0] < 0.05);
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 1.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn lyapunov_examples() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let p = PsoParams { inertia: 0.5, lambda1: 1.0, ..Default::default() };
        let s = swarm_from(&vec![vec![0.7]; 4], &obj);
        assert_eq!(lyapunov_functional(&s, &p), 0.0);
        let mut s = swarm_from(&[vec![1.0]], &obj);
        s.v = vec![1.0];
        assert_eq!(lyapunov_functional(&s, &p), 1.5);
    }

    /// Second transcription of the constants, term by term.
    fn mu_reference(l1: f64, l2: f64, s2: f64, m: f64, nu: f64, beta: f64, gm: f64) -> (f64, f64) {
        let g = 1.0 - m;
        let t1 = (l1 + 2.0 * l2) * g / (4.0 * m * m);
        let br1 = 9.0 * l2.powi(2) / (g * m) + 3.0 * s2.powi(2) / m.powi(2) + 3.0 * l1 * g / (4.0 * m.powi(2));
        let mu1 = t1 - br1 * 12.0 / gm;
        let a = (l1 + l2) * g / m.powi(2);
        let b = nu * beta * (3.0 * l1 / m + g.powi(2) / m.powi(2));
        let c = 8.0 * nu.powi(2) * g / m;
        let d = l2.powi(2) * g / (2.0 * m.powi(2) * l1);
        let e = 3.0 * s2.powi(2) / (2.0 * m.powi(2));
        let f = 9.0 * l2.powi(2) / (g * m) + 3.0 * s2.powi(2) / m.powi(2);
        let h = (9.0 * l2.powi(2) / (g * m) + 3.0 * s2.powi(2) / m.powi(2) + 3.0 * l1 * g / (2.0 * m).powi(2)) * 24.0 / gm;
        (mu1, a + b - c - d - e - f - h)
    }

    #[test]
    fn well_preparedness_matches_reference_transcription() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let x0 = Ensemble::gaussian(200, &[0.3], 0.2, &RngStream::new(3), 0).unwrap();
        let s = SwarmState::new(&x0, None, &obj).unwrap();
        for p in [
            PsoParams::default(),
            PsoParams { lambda1: 0.3, lambda2: 2.0, sigma2: 0.1, inertia: 0.2, nu: 3.0, beta: 7.0, alpha: 2.0, ..Default::default() },
        ] {
            let w = well_preparedness(&p, &s, &obj, 1.0, None).unwrap();
            let gm = s.e_y.iter().map(|e| (-p.alpha * e).exp()).sum::<f64>() / 200.0;
            let (mu1, mu2) = mu_reference(p.lambda1, p.lambda2, p.sigma2, p.inertia, p.nu, p.beta, gm);
            assert!((w.mu1 - mu1).abs() <= 1e-12 * mu1.abs().max(1.0));
            assert!((w.mu2 - mu2).abs() <= 1e-12 * mu2.abs().max(1.0));
            assert_eq!(w.chi > 0.0, w.mu1 > 0.0 && w.mu2 > 0.0);
        }
    }

    #[test]
    fn well_preparedness_first_fraction_decides_mu1() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let s = swarm_from(&vec![vec![0.0]; 3], &obj);
        // sigma2 = 0, lambda2 -> 0: mu1 -> (l1 g / 4m^2)(1 - 9/G) < 0 at G = 1
        let p = PsoParams { lambda2: 1e-9, sigma2: 0.0, ..Default::default() };
        let w = well_preparedness(&p, &s, &obj, 1.0, None).unwrap();
        assert!(w.mu1 < 0.0 && !w.satisfied && w.chi < 0.0);
    }

    #[test]
    fn well_preparedness_handles_zero_friction_and_degenerate_mass() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let s = swarm_from(&vec![vec![0.0]; 3], &obj);
        let w = well_preparedness(&PsoParams { inertia: 1.0, ..Default::default() }, &s, &obj, 1.0, None).unwrap();
        assert_eq!(w.mu1, f64::NEG_INFINITY);
        assert!(!w.satisfied);
        let far = swarm_from(&vec![vec![100.0]; 3], &obj);
        let p = PsoParams { alpha: 50.0, ..Default::default() };
        assert!(matches!(well_preparedness(&p, &far, &obj, 1.0, Some(0.0)), Err(Error::Numeric(_))));
    }

    #[test]
    fn memory_dynamics_reduces_to_cbo() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let x0 = Ensemble::gaussian(50, &[1.0], 1.0, &RngStream::new(0), 0).unwrap();
        let s = SwarmState::new(&x0, None, &obj).unwrap();
        let p = PsoParams { lambda1: 0.0, sigma1: 0.0, nu: 0.0, lambda2: 1.0, sigma2: 0.5, alpha: 2.0, dt: 0.1, ..Default::default() };
        let out = cbo_memory_step(&s, &p, &obj, &RngStream::new(1), 0).unwrap();
        let ma = s.consensus(2.0).unwrap()[0];
        for i in 0..50 {
            let mut r = RngStream::new(1).substream(0, i as u64);
            let _xi1: f64 = normal(&mut r);
            let xi2: f64 = normal(&mut r);
            let x = s.x[i];
            let expect = x + 0.1 * (ma - x) + 0.1f64.sqrt() * 0.5 * (ma - x) * xi2;
            assert!((out.x[i] - expect).abs() < 1e-14);
        }
        assert_eq!(out.y, s.y);
    }

    #[test]
    fn zero_inertia_experiment_determinism_and_dimension() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let cfg = ZeroInertiaConfig { n: 200, dt: 0.01, ..Default::default() };
        let a = zero_inertia_experiment(&[1.0, 0.1], &obj, &cfg, &RngStream::new(4)).unwrap();
        assert_eq!(a, zero_inertia_experiment(&[1.0, 0.1], &obj, &cfg, &RngStream::new(4)).unwrap());
        let obj2 = make_benchmark::<f64>("quadratic", 2).unwrap();
        assert!(matches!(zero_inertia_experiment(&[1.0], &obj2, &cfg, &RngStream::new(4)), Err(Error::Unsupported(_))));
        // consensus start: both dynamics stay put, every distance is 0
        let fixed = ZeroInertiaConfig { init_std: 0.0, init_mean: 0.0, ..cfg };
        let r = zero_inertia_experiment(&[1.0, 0.1], &obj, &fixed, &RngStream::new(4)).unwrap();
        assert!(r.rows.iter().all(|row| row.distance == 0.0));
    }

    #[test]
    fn stats_table_columns() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let s = swarm_from(&[vec![1.0], vec![3.0]], &obj);
        let st = pso_step_stats(0, &s, &PsoParams::default(), &obj).unwrap();
        assert_eq!(st.best_energy, 0.5);
        assert_eq!(st.variance, 1.0);
        let csv = pso_stats_table(&[st]).render(None);
        assert!(csv.starts_with("step,best_energy,lyapunov,consensus_distance_to_min,variance\n"));
    }
}
