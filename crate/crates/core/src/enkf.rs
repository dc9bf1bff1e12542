//! Ensemble Kalman inversion for `y = F(x) + eta`, `eta ~ N(0, Gamma)`:
//! the discrete Kalman update, the continuous-time flow and its
//! preconditioned-gradient form, a modified flow with a `(kappa, beta)`
//! correction, and spread / moment diagnostics.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::EmpiricalMeasure;
use crate::ensemble::Ensemble;
use crate::error::{arg, Error, Result};
use crate::linalg::{orthonormal_basis, Cholesky, Matrix};
use crate::objective::Objective;
use crate::report::{Cell, CsvTable};
use crate::scalar::{dot, norm, norm2, Real};

// EKI ensembles are small; below this many members rayon costs more than it saves.
const PAR_MIN: usize = 64;

type ForwardFn<T> = dyn Fn(&[T]) -> Vec<T> + Send + Sync;

#[derive(Clone)]
pub enum ForwardMap<T> {
    /// `F(x) = F x` with an `m x d` matrix.
    Linear(Matrix<T>),
    General { input_dim: usize, output_dim: usize, map: Arc<ForwardFn<T>> },
}

impl<T: fmt::Debug> fmt::Debug for ForwardMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForwardMap::Linear(m) => f.debug_tuple("Linear").field(m).finish(),
            ForwardMap::General { input_dim, output_dim, .. } => f
                .debug_struct("General")
                .field("input_dim", input_dim)
                .field("output_dim", output_dim)
                .finish(),
        }
    }
}

/// Forward map, data and noise covariance. `Gamma` is checked to be
/// symmetric positive definite on construction.
#[derive(Debug, Clone)]
pub struct InverseProblem<T> {
    forward: ForwardMap<T>,
    y: Vec<T>,
    gamma: Matrix<T>,
    gamma_chol: Cholesky<T>,
    truth: Option<Vec<T>>,
}

impl<T: Real> InverseProblem<T> {
    pub fn linear(f: Matrix<T>, y: Vec<T>, gamma: Matrix<T>) -> Result<Self> {
        Self::build(ForwardMap::Linear(f), y, gamma)
    }

    pub fn general(
        input_dim: usize,
        output_dim: usize,
        map: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        y: Vec<T>,
        gamma: Matrix<T>,
    ) -> Result<Self> {
        Self::build(ForwardMap::General { input_dim, output_dim, map: Arc::new(map) }, y, gamma)
    }

    fn build(forward: ForwardMap<T>, y: Vec<T>, gamma: Matrix<T>) -> Result<Self> {
        let (d, m) = match &forward {
            ForwardMap::Linear(f) => (f.cols(), f.rows()),
            ForwardMap::General { input_dim, output_dim, .. } => (*input_dim, *output_dim),
        };
        if d == 0 || m == 0 {
            return arg("forward map needs positive input and output dimensions");
        }
        if y.len() != m {
            return arg(format!("data has length {}, forward map outputs {m}", y.len()));
        }
        if gamma.rows() != m || gamma.cols() != m {
            return arg("noise covariance must be m x m");
        }
        let gamma_chol = Cholesky::factor(&gamma)?;
        Ok(Self { forward, y, gamma, gamma_chol, truth: None })
    }

    /// Records a known solution `x*` (with `y = F x*`) for residual output.
    pub fn with_truth(mut self, x: Vec<T>) -> Result<Self> {
        if x.len() != self.input_dim() {
            return arg("truth has the wrong dimension");
        }
        self.truth = Some(x);
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        match &self.forward {
            ForwardMap::Linear(f) => f.cols(),
            ForwardMap::General { input_dim, .. } => *input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.y.len()
    }

    pub fn data(&self) -> &[T] {
        &self.y
    }

    pub fn gamma(&self) -> &Matrix<T> {
        &self.gamma
    }

    pub fn truth(&self) -> Option<&[T]> {
        self.truth.as_deref()
    }

    pub fn linear_operator(&self) -> Option<&Matrix<T>> {
        match &self.forward {
            ForwardMap::Linear(f) => Some(f),
            ForwardMap::General { .. } => None,
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        match &self.forward {
            ForwardMap::Linear(f) => f.matvec(x),
            ForwardMap::General { map, .. } => map(x),
        }
    }

    /// `Gamma^{-1} v`.
    pub fn gamma_solve(&self, v: &[T]) -> Vec<T> {
        self.gamma_chol.solve(v)
    }

    /// `1/2 |Gamma^{-1/2} (y - F(x))|^2`.
    pub fn misfit(&self, x: &[T]) -> T {
        let r = self.residual(x);
        T::lit(0.5) * norm2(&self.gamma_chol.solve_lower(&r))
    }

    fn residual(&self, x: &[T]) -> Vec<T> {
        self.y.iter().zip(self.forward(x)).map(|(&a, b)| a - b).collect()
    }

    /// Analytic `-F^T Gamma^{-1} (y - F x)` for linear maps, central
    /// differences with step `1e-5 (1 + |x_k|)` otherwise.
    pub fn misfit_gradient(&self, x: &[T]) -> Vec<T> {
        match &self.forward {
            ForwardMap::Linear(f) => {
                let w = self.gamma_solve(&self.residual(x));
                let mut g = vec![T::zero(); x.len()];
                for i in 0..f.rows() {
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk = *gk - f[(i, k)] * w[i];
                    }
                }
                g
            }
            ForwardMap::General { .. } => {
                let mut xp = x.to_vec();
                (0..x.len())
                    .map(|k| {
                        let h = T::lit(1e-5) * (T::one() + x[k].abs());
                        xp[k] = x[k] + h;
                        let up = self.misfit(&xp);
                        xp[k] = x[k] - h;
                        let dn = self.misfit(&xp);
                        xp[k] = x[k];
                        (up - dn) / (h + h)
                    })
                    .collect()
            }
        }
    }

    /// The misfit as an [`Objective`], with its gradient attached.
    pub fn objective(&self) -> Objective<T> {
        let (p, q) = (self.clone(), self.clone());
        let mut obj = Objective::new("misfit", self.input_dim(), move |x| p.misfit(x))
            .with_grad(move |x, out| out.copy_from_slice(&q.misfit_gradient(x)));
        if let Some(t) = &self.truth {
            obj = obj.with_known_min(t.clone(), self.misfit(t));
        }
        obj
    }
}

/// Sample means and the `1/N`-normalized covariances `C` (`d x m`, state
/// against forward image) and `D` (`m x m`, forward images).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<T> {
    pub mean: Vec<T>,
    pub forward_mean: Vec<T>,
    pub c: Matrix<T>,
    pub d: Matrix<T>,
    /// `F(x^j)` for every member.
    pub forward: Vec<Vec<T>>,
}

pub fn ensemble_stats<T: Real>(ensemble: &Ensemble<T>, problem: &InverseProblem<T>) -> Result<EnsembleStats<T>> {
    check_dim(ensemble, problem)?;
    Ok(stats_flat(problem, ensemble.n(), ensemble.dim(), ensemble.as_flat()))
}

fn check_dim<T: Real>(ensemble: &Ensemble<T>, problem: &InverseProblem<T>) -> Result<()> {
    if ensemble.dim() != problem.input_dim() {
        return arg(format!(
            "ensemble dimension {} does not match forward map input {}",
            ensemble.dim(),
            problem.input_dim()
        ));
    }
    Ok(())
}

fn column_mean<T: Real>(rows: &[&[T]], width: usize) -> Vec<T> {
    // offsets from the first row, so identical rows give an exact mean
    let inv = T::one() / T::lit(rows.len() as f64);
    let base = rows[0];
    let mut m = vec![T::zero(); width];
    for r in rows {
        m.iter_mut().zip(r.iter().zip(base)).for_each(|(a, (&b, &c))| *a = *a + (b - c));
    }
    m.into_iter().zip(base).map(|(v, &c)| c + v * inv).collect()
}

/// `(1/N) sum_i a_i (x) b_i` for centered rows.
fn outer_mean<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Matrix<T> {
    let (p, q) = (a[0].len(), b[0].len());
    let inv = T::one() / T::lit(a.len() as f64);
    let mut out = Matrix::zeros(p, q);
    for (u, v) in a.iter().zip(b) {
        for r in 0..p {
            if u[r] == T::zero() {
                continue;
            }
            for s in 0..q {
                out[(r, s)] = out[(r, s)] + u[r] * v[s];
            }
        }
    }
    out.scale(inv)
}

fn centered<T: Real>(rows: &[&[T]], mean: &[T]) -> Vec<Vec<T>> {
    rows.iter().map(|r| r.iter().zip(mean).map(|(&a, &b)| a - b).collect()).collect()
}

fn stats_flat<T: Real>(problem: &InverseProblem<T>, n: usize, d: usize, x: &[T]) -> EnsembleStats<T> {
    let m = problem.output_dim();
    let pts: Vec<&[T]> = x.chunks(d).take(n).collect();
    let forward: Vec<Vec<T>> = pts.par_iter().with_min_len(PAR_MIN).map(|p| problem.forward(p)).collect();
    let frefs: Vec<&[T]> = forward.iter().map(Vec::as_slice).collect();
    let mean = column_mean(&pts, d);
    let forward_mean = column_mean(&frefs, m);
    let e = centered(&pts, &mean);
    let g = centered(&frefs, &forward_mean);
    EnsembleStats { c: outer_mean(&e, &g), d: outer_mean(&g, &g), mean, forward_mean, forward }
}

/// `Cbar(x; kappa) = (1/N) sum (x^i - kappa xbar) (x) (x^i - kappa xbar)`;
/// `kappa = 1` gives the state covariance.
pub fn state_covariance<T: Real>(ensemble: &Ensemble<T>, kappa: T) -> Matrix<T> {
    covariance_flat(ensemble.n(), ensemble.dim(), ensemble.as_flat(), kappa)
}

fn covariance_flat<T: Real>(n: usize, d: usize, x: &[T], kappa: T) -> Matrix<T> {
    let pts: Vec<&[T]> = x.chunks(d).take(n).collect();
    let shift: Vec<T> = column_mean(&pts, d).into_iter().map(|v| kappa * v).collect();
    let e = centered(&pts, &shift);
    outer_mean(&e, &e)
}

/// One Kalman step `x' = x + C (D + Gamma^{-1}/dt)^{-1} (y - F(x))`, with
/// the statistics frozen at the pre-step ensemble.
pub fn enkf_update<T: Real>(ensemble: &Ensemble<T>, problem: &InverseProblem<T>, dt: T) -> Result<Ensemble<T>> {
    if !(dt > T::zero()) {
        return arg("enkf time step must be positive");
    }
    let st = ensemble_stats(ensemble, problem)?;
    let gamma_inv = problem.gamma_chol.inverse();
    let sys = Cholesky::factor(&st.d.add(&gamma_inv.scale(T::one() / dt)))?;
    let d = ensemble.dim();
    let mut out = ensemble.as_flat().to_vec();
    out.par_chunks_mut(d).with_min_len(PAR_MIN).zip(&st.forward).for_each(|(x, fx)| {
        let r: Vec<T> = problem.y.iter().zip(fx).map(|(&a, &b)| a - b).collect();
        let step = st.c.matvec(&sys.solve(&r));
        x.iter_mut().zip(step).for_each(|(a, b)| *a = *a + b);
    });
    finish(ensemble.n(), d, out, T::zero())
}

fn finish<T: Real>(n: usize, d: usize, data: Vec<T>, t: T) -> Result<Ensemble<T>> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { last_valid_time: t.as_f64(), reason: "non-finite ensemble member".into() });
    }
    Ensemble::from_flat(n, d, data)
}

/// Velocities `C(x) Gamma^{-1} (y - F(x^j))`, flattened like the ensemble.
pub fn eki_rhs<T: Real>(ensemble: &Ensemble<T>, problem: &InverseProblem<T>) -> Result<Vec<T>> {
    check_dim(ensemble, problem)?;
    Ok(rhs_flat(problem, ensemble.n(), ensemble.dim(), ensemble.as_flat()))
}

fn rhs_flat<T: Real>(problem: &InverseProblem<T>, n: usize, d: usize, x: &[T]) -> Vec<T> {
    let st = stats_flat(problem, n, d, x);
    let mut v = vec![T::zero(); n * d];
    v.par_chunks_mut(d).with_min_len(PAR_MIN).zip(&st.forward).for_each(|(out, fx)| {
        let r: Vec<T> = problem.y.iter().zip(fx).map(|(&a, &b)| a - b).collect();
        out.copy_from_slice(&st.c.matvec(&problem.gamma_solve(&r)));
    });
    v
}

/// `-Cbar(x) grad E(x^j)`; equal to [`eki_rhs`] when `F` is linear.
pub fn gradient_flow_rhs<T: Real>(ensemble: &Ensemble<T>, problem: &InverseProblem<T>) -> Result<Vec<T>> {
    modified_rhs(ensemble, problem, T::one(), T::zero())
}

fn modified_rhs<T: Real>(ensemble: &Ensemble<T>, problem: &InverseProblem<T>, kappa: T, beta: T) -> Result<Vec<T>> {
    check_dim(ensemble, problem)?;
    let (n, d) = (ensemble.n(), ensemble.dim());
    let cov = state_covariance(ensemble, kappa);
    let mean = ensemble.mean();
    let mut v = vec![T::zero(); n * d];
    v.par_chunks_mut(d).zip(ensemble.as_flat().par_chunks(d)).with_min_len(PAR_MIN).for_each(|(out, x)| {
        let mut g = problem.misfit_gradient(x);
        g.iter_mut().zip(&mean).zip(x).for_each(|((gk, &m), &xk)| *gk = *gk + beta * (m - xk));
        for (o, c) in out.iter_mut().zip(cov.matvec(&g)) {
            *o = -c;
        }
    });
    Ok(v)
}

/// Explicit Euler step of `dx^j/dt = -Cbar(x; kappa)(grad E(x^j) + beta (xbar - x^j))`.
pub fn modified_eki_step<T: Real>(
    ensemble: &Ensemble<T>,
    problem: &InverseProblem<T>,
    kappa: T,
    beta: T,
    h: T,
) -> Result<Ensemble<T>> {
    if !(h > T::zero()) {
        return arg("step size must be positive");
    }
    let v = modified_rhs(ensemble, problem, kappa, beta)?;
    let x: Vec<T> = ensemble.as_flat().iter().zip(v).map(|(&a, b)| a + h * b).collect();
    finish(ensemble.n(), ensemble.dim(), x, T::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeMethod {
    Euler,
    #[default]
    Rk4,
}

/// One recorded point of an EKI run.
#[derive(Debug, Clone, PartialEq)]
pub struct EkiRow {
    pub time: f64,
    pub misfit_at_mean: f64,
    pub spread_norm: f64,
    /// `|xbar - x*|` when the problem carries a truth.
    pub mean_residual: Option<f64>,
    pub variance_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkiTrajectory<T> {
    pub rows: Vec<EkiRow>,
    pub snapshots: Vec<Ensemble<T>>,
}

impl<T: Real> EkiTrajectory<T> {
    pub fn last(&self) -> Option<&Ensemble<T>> {
        self.snapshots.last()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["time", "misfit_at_mean", "spread_norm", "mean_residual", "variance_trace"]);
        for r in &self.rows {
            t.push(vec![
                Cell::from(r.time),
                Cell::from(r.misfit_at_mean),
                Cell::from(r.spread_norm),
                Cell::from(r.mean_residual.unwrap_or(f64::NAN)),
                Cell::from(r.variance_trace),
            ]);
        }
        t
    }
}

pub fn eki_row<T: Real>(time: f64, ensemble: &Ensemble<T>, problem: &InverseProblem<T>) -> Result<EkiRow> {
    let mean = ensemble.mean();
    let spread = spread_matrix(ensemble, problem, SpreadWeighting::Gamma)?;
    Ok(EkiRow {
        time,
        misfit_at_mean: problem.misfit(&mean).as_f64(),
        spread_norm: spread.norm.as_f64(),
        mean_residual: problem.truth().map(|t| {
            mean.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt().as_f64()
        }),
        variance_trace: ensemble.variance_trace().as_f64(),
    })
}

/// Integrates the continuous-time flow up to `horizon`. The step is
/// shrunk to `horizon / ceil(horizon / h)`; each requested time is rounded
/// to the nearest grid point, and the initial and final states are always
/// recorded.
pub fn eki_integrate<T: Real>(
    initial: &Ensemble<T>,
    problem: &InverseProblem<T>,
    horizon: f64,
    h: f64,
    method: OdeMethod,
    record_at: &[f64],
) -> Result<EkiTrajectory<T>> {
    check_dim(initial, problem)?;
    if !(h > 0.0) || !(horizon >= 0.0) || !h.is_finite() || !horizon.is_finite() {
        return arg("eki integration needs h > 0 and a finite horizon >= 0");
    }
    let steps = (horizon / h).ceil().max(0.0) as u64;
    let dt = if steps == 0 { 0.0 } else { horizon / steps as f64 };
    let mut marks: Vec<u64> = record_at
        .iter()
        .filter(|t| t.is_finite() && **t >= 0.0)
        .map(|t| if dt > 0.0 { ((t / dt).round() as u64).min(steps) } else { 0 })
        .chain([0, steps])
        .collect();
    marks.sort_unstable();
    marks.dedup();

    let (n, d) = (initial.n(), initial.dim());
    let hh = T::lit(dt);
    let half = hh * T::lit(0.5);
    let mut x = initial.as_flat().to_vec();
    let mut traj = EkiTrajectory { rows: Vec::new(), snapshots: Vec::new() };
    let mut next = 0;
    for k in 0..=steps {
        if marks.get(next) == Some(&k) {
            let ens = Ensemble::from_flat(n, d, x.clone())?;
            traj.rows.push(eki_row(k as f64 * dt, &ens, problem)?);
            traj.snapshots.push(ens);
            next += 1;
        }
        if k == steps {
            break;
        }
        let k1 = rhs_flat(problem, n, d, &x);
        x = match method {
            OdeMethod::Euler => axpy(&x, hh, &k1),
            OdeMethod::Rk4 => {
                let k2 = rhs_flat(problem, n, d, &axpy(&x, half, &k1));
                let k3 = rhs_flat(problem, n, d, &axpy(&x, half, &k2));
                let k4 = rhs_flat(problem, n, d, &axpy(&x, hh, &k3));
                let sixth = hh / T::lit(6.0);
                let two = T::lit(2.0);
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| v + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                    .collect()
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                last_valid_time: k as f64 * dt,
                reason: "non-finite ensemble member".into(),
            });
        }
    }
    Ok(traj)
}

fn axpy<T: Real>(x: &[T], a: T, v: &[T]) -> Vec<T> {
    x.iter().zip(v).map(|(&p, &q)| p + a * q).collect()
}

/// Runs `steps` discrete Kalman updates, recording every `record_every`.
pub fn run_enkf<T: Real>(
    initial: &Ensemble<T>,
    problem: &InverseProblem<T>,
    dt: T,
    steps: u64,
    record_every: u64,
) -> Result<EkiTrajectory<T>> {
    let every = record_every.max(1);
    let mut ens = initial.clone();
    let mut traj = EkiTrajectory { rows: Vec::new(), snapshots: Vec::new() };
    for k in 0..=steps {
        if k % every == 0 || k == steps {
            traj.rows.push(eki_row(k as f64 * dt.as_f64(), &ens, problem)?);
            traj.snapshots.push(ens.clone());
        }
        if k < steps {
            ens = enkf_update(&ens, problem, dt).map_err(|e| match e {
                Error::Divergence { reason, .. } => {
                    Error::Divergence { last_valid_time: k as f64 * dt.as_f64(), reason }
                }
                other => other,
            })?;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadWeighting {
    #[default]
    Gamma,
    GammaInverse,
}

/// `(E)_{k,l} = e^l . F^T W F e^k` on centered members, `W = Gamma` (or
/// `Gamma^{-1}`). Centered forward images stand in for `F e^k`, which is
/// the same thing for linear maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadMatrix<T> {
    pub matrix: Matrix<T>,
    /// Spectral norm.
    pub norm: T,
}

pub fn spread_matrix<T: Real>(
    ensemble: &Ensemble<T>,
    problem: &InverseProblem<T>,
    weighting: SpreadWeighting,
) -> Result<SpreadMatrix<T>> {
    check_dim(ensemble, problem)?;
    let n = ensemble.n();
    let pts: Vec<&[T]> = ensemble.points().collect();
    let fwd: Vec<Vec<T>> = pts.iter().map(|p| problem.forward(p)).collect();
    let frefs: Vec<&[T]> = fwd.iter().map(Vec::as_slice).collect();
    let g = centered(&frefs, &column_mean(&frefs, problem.output_dim()));
    let wg: Vec<Vec<T>> = match weighting {
        SpreadWeighting::Gamma => g.iter().map(|v| problem.gamma.matvec(v)).collect(),
        SpreadWeighting::GammaInverse => g.iter().map(|v| problem.gamma_solve(v)).collect(),
    };
    let mut e = Matrix::zeros(n, n);
    for k in 0..n {
        for l in 0..=k {
            let v = dot(&g[l], &wg[k]);
            e[(k, l)] = v;
            e[(l, k)] = v;
        }
    }
    let norm = e.symmetric_norm();
    Ok(SpreadMatrix { matrix: e, norm })
}

/// Least-squares slope of `ln y` against `ln t` over points with
/// `t >= t_min` and `y > 0`.
pub fn loglog_slope(points: &[(f64, f64)], t_min: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, y)| *t >= t_min && *t > 0.0 && *y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return arg("slope fit needs at least two positive points");
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return arg("slope fit needs distinct times");
    }
    Ok(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// First moment, forward moment, cross-covariance and second moment of a
/// weighted point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFields<T> {
    pub m: Vec<T>,
    pub m_f: Vec<T>,
    pub cross: Matrix<T>,
    pub second: Matrix<T>,
}

pub fn moment_fields<T: Real>(measure: &EmpiricalMeasure<T>, problem: &InverseProblem<T>) -> Result<MomentFields<T>> {
    let d = measure.dim();
    if d != problem.input_dim() {
        return arg("measure dimension does not match forward map input");
    }
    let p = problem.output_dim();
    let w = measure.weights();
    let fwd: Vec<Vec<T>> = measure.points().map(|x| problem.forward(x)).collect();
    let mut m = vec![T::zero(); d];
    let mut m_f = vec![T::zero(); p];
    for ((x, fx), &wi) in measure.points().zip(&fwd).zip(w) {
        m.iter_mut().zip(x).for_each(|(a, &b)| *a = *a + wi * b);
        m_f.iter_mut().zip(fx).for_each(|(a, &b)| *a = *a + wi * b);
    }
    let mut cross = Matrix::zeros(d, p);
    let mut second = Matrix::zeros(d, d);
    for ((x, fx), &wi) in measure.points().zip(&fwd).zip(w) {
        for r in 0..d {
            let er = x[r] - m[r];
            for s in 0..p {
                cross[(r, s)] = cross[(r, s)] + wi * er * (fx[s] - m_f[s]);
            }
            for s in 0..d {
                second[(r, s)] = second[(r, s)] + wi * x[r] * x[s];
            }
        }
    }
    Ok(MomentFields { m, m_f, cross, second })
}

/// Affine hull of a point set, for membership checks by projection.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineHull<T> {
    origin: Vec<T>,
    basis: Vec<Vec<T>>,
    vertices: Vec<Vec<T>>,
}

impl<T: Real> AffineHull<T> {
    pub fn of(ensemble: &Ensemble<T>) -> Self {
        let origin = ensemble.point(0).to_vec();
        let diffs: Vec<Vec<T>> = ensemble
            .points()
            .skip(1)
            .map(|p| p.iter().zip(&origin).map(|(&a, &b)| a - b).collect())
            .collect();
        let basis = orthonormal_basis(&diffs, T::lit(1e-10));
        Self { origin, basis, vertices: ensemble.points().map(<[T]>::to_vec).collect() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Distance from `x` to the hull.
    pub fn residual(&self, x: &[T]) -> T {
        let mut r: Vec<T> = x.iter().zip(&self.origin).map(|(&a, &b)| a - b).collect();
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(&r, q);
                r.iter_mut().zip(q).for_each(|(a, &b)| *a = *a - c * b);
            }
        }
        norm(&r)
    }

    pub fn max_residual(&self, ensemble: &Ensemble<T>) -> T {
        ensemble.points().map(|p| self.residual(p)).fold(T::zero(), T::max)
    }

    /// Barycentric coordinates of `x` when the vertices are affinely
    /// independent; `None` otherwise.
    pub fn barycentric(&self, x: &[T]) -> Option<Vec<T>> {
        let k = self.vertices.len() - 1;
        if self.basis.len() != k {
            return None;
        }
        if k == 0 {
            return Some(vec![T::one()]);
        }
        // Gram system on the edge vectors.
        let edges: Vec<Vec<T>> = self.vertices[1..]
            .iter()
            .map(|v| v.iter().zip(&self.origin).map(|(&a, &b)| a - b).collect())
            .collect();
        let rhs_vec: Vec<T> = x.iter().zip(&self.origin).map(|(&a, &b)| a - b).collect();
        let mut g = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                g[(i, j)] = dot(&edges[i], &edges[j]);
            }
        }
        let b: Vec<T> = edges.iter().map(|e| dot(e, &rhs_vec)).collect();
        let lam = Cholesky::factor(&g).ok()?.solve(&b);
        let first = T::one() - lam.iter().copied().sum::<T>();
        Some(std::iter::once(first).chain(lam).collect())
    }
}

/// Membership of an ensemble in the hull of an initial ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct HullReport<T> {
    pub max_affine_residual: T,
    /// `None` when the initial members are affinely dependent.
    pub inside_convex_hull: Option<bool>,
    pub min_barycentric: Option<T>,
}

pub fn hull_report<T: Real>(hull: &AffineHull<T>, ensemble: &Ensemble<T>) -> HullReport<T> {
    let max_affine_residual = hull.max_residual(ensemble);
    let mins: Option<Vec<T>> = ensemble
        .points()
        .map(|p| hull.barycentric(p).map(|b| b.into_iter().fold(T::infinity(), T::min)))
        .collect();
    let min_barycentric = mins.map(|v| v.into_iter().fold(T::infinity(), T::min));
    HullReport {
        max_affine_residual,
        inside_convex_hull: min_barycentric.map(|m| m >= -T::lit(1e-10)),
        min_barycentric,
    }
}
