//! Genetic algorithm with fitness-weighted selection, its kinetic (Nanbu)
//! realization, the consensus-based optimization particle scheme, and the
//! quasi-invariant comparison between the two.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{wasserstein2_1d, EmpiricalMeasure};
use crate::ensemble::Ensemble;
use crate::error::{arg, Error, Result};
use crate::gibbs::{gibbs_mean_flat, gibbs_weights};
use crate::objective::Objective;
use crate::report::{Cell, CsvTable, DistanceReport, DistanceRow};
use crate::rng::{fill_normal, normal, uniform, RngStream};
use crate::scalar::{dist, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionKind {
    /// Weights `exp(-alpha E)`.
    BoltzmannGibbs { alpha: f64 },
    /// Weights `max E - E` over the current ensemble.
    RandomWheel,
    /// Weights `#{j : E_i <= E_j}`.
    RankBased,
}

impl SelectionKind {
    pub fn validate(&self) -> Result<()> {
        if let SelectionKind::BoltzmannGibbs { alpha } = *self {
            if !(alpha >= 0.0) || !alpha.is_finite() {
                return arg("selection alpha must be finite and >= 0");
            }
        }
        Ok(())
    }
}

/// Where the retained (non-child) slots are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retention {
    #[default]
    Weighted,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GAParams {
    pub sigma: f64,
    pub nu: f64,
    pub selection: SelectionKind,
    #[serde(default)]
    pub retention: Retention,
}

impl GAParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return arg("mutation strength must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return arg("new-particle fraction must lie in [0, 1]");
        }
        self.selection.validate()
    }
}

fn uniform_vec<T: Real>(n: usize) -> Vec<T> {
    vec![T::one() / T::lit(n as f64); n]
}

fn check_energies<T: Real>(energies: &[T]) -> Result<()> {
    if energies.is_empty() {
        return arg("selection over an empty ensemble");
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("non-finite energy in selection".into()));
    }
    Ok(())
}

/// Normalized selection weights for the given energies.
pub fn selection_weights<T: Real>(energies: &[T], kind: SelectionKind) -> Result<Vec<T>> {
    kind.validate()?;
    check_energies(energies)?;
    let n = energies.len();
    match kind {
        SelectionKind::BoltzmannGibbs { alpha } => gibbs_weights(energies, T::lit(alpha)),
        SelectionKind::RandomWheel => {
            let e_max = energies.iter().copied().fold(T::neg_infinity(), T::max);
            let raw: Vec<T> = energies.iter().map(|&e| e_max - e).collect();
            let total: T = raw.iter().copied().sum();
            if total > T::zero() {
                Ok(raw.into_iter().map(|w| w / total).collect())
            } else {
                Ok(uniform_vec(n))
            }
        }
        SelectionKind::RankBased => {
            let mut sorted = energies.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let raw: Vec<T> = energies
                .iter()
                .map(|e| T::lit((n - sorted.partition_point(|s| s < e)) as f64))
                .collect();
            let total: T = raw.iter().copied().sum();
            Ok(raw.into_iter().map(|w| w / total).collect())
        }
    }
}

/// Selection applied to a weighted measure: every weight is multiplied by the
/// particle's fitness factor. For uniform input weights this reduces to
/// [`selection_weights`].
fn measure_selection<T: Real>(weights: &[T], energies: &[T], kind: SelectionKind) -> Result<Vec<T>> {
    check_energies(energies)?;
    let factors: Vec<T> = match kind {
        SelectionKind::BoltzmannGibbs { .. } | SelectionKind::RandomWheel => selection_weights(energies, kind)?,
        SelectionKind::RankBased => {
            // mass of {E >= E_i}
            let mut order: Vec<usize> = (0..energies.len()).collect();
            order.sort_by(|&a, &b| energies[b].partial_cmp(&energies[a]).unwrap());
            let mut out = vec![T::zero(); energies.len()];
            let mut acc = T::zero();
            let mut k = 0;
            while k < order.len() {
                let mut j = k;
                let e = energies[order[k]];
                while j < order.len() && energies[order[j]] == e {
                    acc = acc + weights[order[j]];
                    j += 1;
                }
                for &i in &order[k..j] {
                    out[i] = acc;
                }
                k = j;
            }
            out
        }
    };
    let raw: Vec<T> = weights.iter().zip(&factors).map(|(&w, &f)| w * f).collect();
    let total: T = raw.iter().copied().sum();
    if total > T::zero() {
        Ok(raw.into_iter().map(|w| w / total).collect())
    } else {
        Ok(weights.to_vec())
    }
}

/// Fitness-weighted law over the current support, with a sampler.
#[derive(Debug, Clone)]
pub struct ParentMeasure<T> {
    dim: usize,
    support: Vec<T>,
    weights: Vec<T>,
    sampler: WeightedIndex<f64>,
}

impl<T: Real> ParentMeasure<T> {
    pub fn new(dim: usize, support: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if dim == 0 || support.len() != dim * weights.len() || weights.is_empty() {
            return arg("parent support and weights are inconsistent");
        }
        let sampler = WeightedIndex::new(weights.iter().map(|w| w.as_f64()))
            .map_err(|e| Error::Numeric(format!("invalid parent weights: {e}")))?;
        Ok(Self { dim, support, weights, sampler })
    }

    /// Parent measure of an equally weighted ensemble.
    pub fn of_ensemble(ensemble: &Ensemble<T>, energies: &[T], kind: SelectionKind) -> Result<Self> {
        let w = selection_weights(energies, kind)?;
        Self::new(ensemble.dim(), ensemble.as_flat().to_vec(), w)
    }

    /// Parent measure of a weighted empirical measure.
    pub fn of_measure(measure: &EmpiricalMeasure<T>, obj: &Objective<T>, kind: SelectionKind) -> Result<Self> {
        let e: Vec<T> = measure.points().map(|p| obj.eval(p)).collect();
        let w = measure_selection(measure.weights(), &e, kind)?;
        Self::new(measure.dim(), measure.support_flat().to_vec(), w)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for (i, &w) in self.weights.iter().enumerate() {
            for (a, &x) in m.iter_mut().zip(self.point(i)) {
                *a = *a + w * x;
            }
        }
        m
    }
}

/// `x + g (x_star - x)`: exact at both ends and when `x == x_star`.
fn lerp<T: Real>(x: T, x_star: T, g: T) -> T {
    if g == T::one() {
        x_star
    } else {
        x + g * (x_star - x)
    }
}

/// `(1 - gamma) x + gamma x_star + sigma xi`, componentwise.
pub fn crossover_mutation<T: Real>(x: &[T], x_star: &[T], gamma: &[T], sigma: T, xi: &[T]) -> Result<Vec<T>> {
    let d = x.len();
    if x_star.len() != d || gamma.len() != d || xi.len() != d {
        return arg("crossover operands differ in dimension");
    }
    if gamma.iter().any(|g| !(*g >= T::zero() && *g <= T::one())) {
        return arg("crossover weights must lie in [0, 1]");
    }
    Ok((0..d)
        .map(|k| lerp(x[k], x_star[k], gamma[k]) + sigma * xi[k])
        .collect())
}

fn child<T: Real, R: Rng + ?Sized>(parents: &ParentMeasure<T>, sigma: T, rng: &mut R, out: &mut [T]) {
    let i = parents.sample_index(rng);
    let j = parents.sample_index(rng);
    let (x, xs) = (parents.point(i), parents.point(j));
    for k in 0..out.len() {
        let g: T = uniform(rng);
        let xi: T = normal(rng);
        out[k] = lerp(x[k], xs[k], g) + sigma * xi;
    }
}

fn energies_of<T: Real>(ensemble: &Ensemble<T>, obj: &Objective<T>) -> Result<Vec<T>> {
    if ensemble.dim() != obj.dim() {
        return arg("ensemble and objective dimensions differ");
    }
    let e: Vec<T> = ensemble.as_flat().par_chunks_exact(ensemble.dim()).map(|p| obj.eval(p)).collect();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite energy in the ensemble".into()));
    }
    Ok(e)
}

/// One generation: slots `0..floor(nu N)` receive children of two
/// fitness-selected parents; the remaining slots resample the previous
/// ensemble (with selection weights, or uniformly under
/// [`Retention::Uniform`]). Slot `i` draws from substream `(step, i)`.
pub fn ga_step<T: Real>(
    ensemble: &Ensemble<T>,
    params: &GAParams,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<Ensemble<T>> {
    params.validate()?;
    let n = ensemble.n();
    if n < 2 {
        return arg("a generation needs N >= 2");
    }
    let d = ensemble.dim();
    let e = energies_of(ensemble, obj)?;
    let parents = ParentMeasure::of_ensemble(ensemble, &e, params.selection)?;
    let children = (params.nu * n as f64).floor() as usize;
    let sigma = T::lit(params.sigma);
    let mut out = vec![T::zero(); n * d];
    out.par_chunks_mut(d).enumerate().for_each(|(i, slot)| {
        let mut r = rng.substream(step, i as u64);
        if i < children {
            child(&parents, sigma, &mut r, slot);
        } else {
            let j = match params.retention {
                Retention::Weighted => parents.sample_index(&mut r),
                Retention::Uniform => r.random_range(0..n),
            };
            slot.copy_from_slice(ensemble.point(j));
        }
    });
    Ensemble::from_flat(n, d, out)
}

/// Nanbu realization of the kinetic update: each of the `N` output
/// particles is independently, with probability `nu`, a child of two parents
/// drawn from the parent measure, and otherwise a draw from it.
pub fn kinetic_ga_step<T: Real>(
    measure: &EmpiricalMeasure<T>,
    params: &GAParams,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<EmpiricalMeasure<T>> {
    params.validate()?;
    let n = measure.len();
    if n < 2 {
        return arg("the kinetic step needs N >= 2 support points");
    }
    if measure.dim() != obj.dim() {
        return arg("measure and objective dimensions differ");
    }
    let d = measure.dim();
    let parents = ParentMeasure::of_measure(measure, obj, params.selection)?;
    let sigma = T::lit(params.sigma);
    let nu = T::lit(params.nu);
    let mut out = vec![T::zero(); n * d];
    out.par_chunks_mut(d).enumerate().for_each(|(i, slot)| {
        let mut r = rng.substream(step, i as u64);
        let u: T = uniform(&mut r);
        if u < nu {
            child(&parents, sigma, &mut r, slot);
        } else {
            slot.copy_from_slice(parents.point(parents.sample_index(&mut r)));
        }
    });
    EmpiricalMeasure::new(d, out, vec![T::one(); n])
}

/// Euler-Maruyama step of `dX = lambda (m_alpha - X) dt + sigma dW`, with the
/// consensus point computed once from the pre-step ensemble. `lambda` is a
/// scalar (length 1) or one rate per coordinate.
#[allow(clippy::too_many_arguments)]
pub fn cbo_step<T: Real>(
    ensemble: &Ensemble<T>,
    lambda: &[T],
    sigma: T,
    alpha: T,
    dt: T,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<Ensemble<T>> {
    let d = ensemble.dim();
    if !(dt > T::zero()) {
        return arg("time step must be positive");
    }
    if lambda.len() != 1 && lambda.len() != d {
        return arg("drift must be a scalar or one rate per coordinate");
    }
    if sigma < T::zero() {
        return arg("diffusion must be >= 0");
    }
    let e = energies_of(ensemble, obj)?;
    let m = gibbs_mean_flat(ensemble.as_flat(), d, &e, alpha)?;
    let amp = sigma * dt.sqrt();
    let mut out = ensemble.as_flat().to_vec();
    out.par_chunks_mut(d).enumerate().for_each(|(i, x)| {
        let mut r = rng.substream(step, i as u64);
        for k in 0..d {
            let lk = if lambda.len() == 1 { lambda[0] } else { lambda[k] };
            let xi: T = normal(&mut r);
            x[k] = x[k] + lk * (m[k] - x[k]) * dt + amp * xi;
        }
    });
    Ensemble::from_flat(ensemble.n(), d, out)
}

/// Per-step summary used for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct GaStepStats {
    pub step: u64,
    pub best_energy: f64,
    pub mean_energy: f64,
    pub distance_to_min: Option<f64>,
    pub variance: f64,
}

pub fn ga_step_stats<T: Real>(step: u64, ensemble: &Ensemble<T>, obj: &Objective<T>) -> Result<GaStepStats> {
    let e = energies_of(ensemble, obj)?;
    let best = e.iter().fold(f64::INFINITY, |a, v| a.min(v.as_f64()));
    let mean_e = e.iter().map(|v| v.as_f64()).sum::<f64>() / e.len() as f64;
    let mean = ensemble.mean();
    Ok(GaStepStats {
        step,
        best_energy: best,
        mean_energy: mean_e,
        distance_to_min: obj.known_min().map(|(xs, _)| dist(&mean, xs).as_f64()),
        variance: ensemble.variance_trace().as_f64(),
    })
}

pub fn ga_stats_table(rows: &[GaStepStats]) -> CsvTable {
    let with_dist = rows.first().is_some_and(|r| r.distance_to_min.is_some());
    let mut cols = vec!["step", "best_energy", "mean_energy"];
    if with_dist {
        cols.push("mean_distance_to_min");
    }
    cols.push("variance");
    let mut t = CsvTable::new(cols);
    for r in rows {
        let mut row = vec![Cell::from(r.step), Cell::from(r.best_energy), Cell::from(r.mean_energy)];
        if with_dist {
            row.push(Cell::from(r.distance_to_min.unwrap_or(f64::NAN)));
        }
        row.push(Cell::from(r.variance));
        t.push(row);
    }
    t
}

/// One step of the paired comparison between the two realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRow {
    pub step: u64,
    /// Largest `|mean_ga - mean_kinetic| / combined SE` over coordinates.
    pub mean_z: f64,
    /// Same for the per-coordinate variances.
    pub variance_z: f64,
}

fn moments(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let v = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

/// Applies `ga_step` and `kinetic_ga_step` to the same input ensemble at
/// every step (with independent noise) and records the standardized
/// differences of their first two moments. The GA output is fed forward.
pub fn paired_equivalence<T: Real>(
    initial: &Ensemble<T>,
    params: &GAParams,
    obj: &Objective<T>,
    steps: u64,
    rng: &RngStream,
) -> Result<Vec<PairedRow>> {
    let (rga, rkin) = (rng.derive(1), rng.derive(2));
    let mut current = initial.clone();
    let mut rows = Vec::new();
    for k in 0..steps {
        let a = ga_step(&current, params, obj, &rga, k)?;
        let b = kinetic_ga_step(&EmpiricalMeasure::uniform(&current), params, obj, &rkin, k)?;
        let b = Ensemble::from_flat(b.len(), b.dim(), b.support_flat().to_vec())?;
        let n = a.n() as f64;
        let (mut mz, mut vz) = (0.0f64, 0.0f64);
        for c in 0..a.dim() {
            let xa: Vec<f64> = a.coordinate(c).iter().map(|v| v.as_f64()).collect();
            let xb: Vec<f64> = b.coordinate(c).iter().map(|v| v.as_f64()).collect();
            let (ma, va, qa) = moments(&xa);
            let (mb, vb, qb) = moments(&xb);
            let se_m = ((va + vb) / n).sqrt();
            let se_v = (((qa - va * va) + (qb - vb * vb)) / n).sqrt();
            mz = mz.max(standardized(ma - mb, se_m));
            vz = vz.max(standardized(va - vb, se_v));
        }
        rows.push(PairedRow { step: k + 1, mean_z: mz, variance_z: vz });
        current = a;
    }
    Ok(rows)
}

fn standardized(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Per-step record of the contraction check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub step: u64,
    /// `|mean_k - x*|`.
    pub distance: f64,
    /// `exp(-k nu) |mean_0 - x*|`.
    pub envelope: f64,
    /// Standard error of the ensemble mean, `sqrt(tr Var / N)`.
    pub std_error: f64,
}

impl ContractionRow {
    pub fn within(&self, n_se: f64) -> bool {
        self.distance <= self.envelope + n_se * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// First step whose distance exceeds the envelope plus three standard
    /// errors, if any.
    pub first_violation: Option<u64>,
    /// First step with `distance < accuracy`, if reached.
    pub accuracy_reached: Option<u64>,
}

impl ContractionReport {
    /// Envelope holds at every step before the accuracy floor is reached.
    pub fn holds_until_accuracy(&self) -> bool {
        match (self.first_violation, self.accuracy_reached) {
            (None, Some(_)) => true,
            (Some(v), Some(a)) => v > a,
            _ => false,
        }
    }
}

/// Runs `ga_step` on an objective with a known minimizer and tracks the
/// distance of the ensemble mean to it against `exp(-k nu)` times the
/// initial distance.
pub fn ga_contraction_check<T: Real>(
    initial: &Ensemble<T>,
    params: &GAParams,
    obj: &Objective<T>,
    max_steps: u64,
    accuracy: f64,
    rng: &RngStream,
) -> Result<ContractionReport> {
    let (x_star, _) = obj
        .known_min()
        .ok_or_else(|| Error::Precondition("contraction check needs a known minimizer".into()))?;
    let x_star = x_star.to_vec();
    let n = initial.n() as f64;
    let row = |k: u64, e: &Ensemble<T>, d0: f64| {
        let dist_k = dist(&e.mean(), &x_star).as_f64();
        ContractionRow {
            step: k,
            distance: dist_k,
            envelope: (-(k as f64) * params.nu).exp() * d0,
            std_error: (e.variance_trace().as_f64() / n).sqrt(),
        }
    };
    let d0 = dist(&initial.mean(), &x_star).as_f64();
    let mut rows = vec![row(0, initial, d0)];
    let mut current = initial.clone();
    for k in 1..=max_steps {
        if rows.last().unwrap().distance < accuracy {
            break;
        }
        current = ga_step(&current, params, obj, rng, k)?;
        rows.push(row(k, &current, d0));
    }
    let first_violation = rows.iter().find(|r| !r.within(3.0)).map(|r| r.step);
    let accuracy_reached = rows.iter().find(|r| r.distance < accuracy).map(|r| r.step);
    Ok(ContractionReport { rows, first_violation, accuracy_reached })
}

/// Settings of the quasi-invariant comparison. The limiting consensus
/// dynamics is `dX = lambda (m_alpha - X) dt + sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiInvariantConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub n: usize,
    pub init_mean: f64,
    pub init_std: f64,
    /// Time step of the consensus reference ensemble.
    pub reference_dt: f64,
}

impl Default for QuasiInvariantConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 1.0,
            horizon: 1.0,
            n: 10_000,
            init_mean: 1.0,
            init_std: 1.0,
            reference_dt: 1e-3,
        }
    }
}

/// One step of the scaled single-parent kernel: every particle `x` moves to
/// `x + eps lambda (x* - x) + sqrt(eps) sigma xi` with `x*` drawn from the
/// Gibbs parent measure.
fn scaled_kinetic_step<T: Real>(
    ensemble: &Ensemble<T>,
    eps: f64,
    cfg: &QuasiInvariantConfig,
    obj: &Objective<T>,
    rng: &RngStream,
    step: u64,
) -> Result<Ensemble<T>> {
    let e = energies_of(ensemble, obj)?;
    let parents = ParentMeasure::of_ensemble(ensemble, &e, SelectionKind::BoltzmannGibbs { alpha: cfg.alpha })?;
    let g = T::lit(eps * cfg.lambda);
    let s = T::lit(eps.sqrt() * cfg.sigma);
    let d = ensemble.dim();
    let mut out = ensemble.as_flat().to_vec();
    out.par_chunks_mut(d).enumerate().for_each(|(i, x)| {
        let mut r = rng.substream(step, i as u64);
        let xs = parents.point(parents.sample_index(&mut r));
        let mut xi = vec![T::zero(); d];
        fill_normal(&mut r, &mut xi);
        for k in 0..d {
            x[k] = x[k] + g * (xs[k] - x[k]) + s * xi[k];
        }
    });
    Ensemble::from_flat(ensemble.n(), d, out)
}

fn run_cbo<T: Real>(
    initial: &Ensemble<T>,
    cfg: &QuasiInvariantConfig,
    obj: &Objective<T>,
    rng: &RngStream,
) -> Result<Ensemble<T>> {
    let steps = (cfg.horizon / cfg.reference_dt).round().max(1.0) as u64;
    let dt = T::lit(cfg.horizon / steps as f64);
    let mut x = initial.clone();
    for k in 0..steps {
        x = cbo_step(&x, &[T::lit(cfg.lambda)], T::lit(cfg.sigma), T::lit(cfg.alpha), dt, obj, rng, k)?;
    }
    Ok(x)
}

/// For each `eps`, runs the scaled kinetic GA for `horizon / eps` steps and
/// reports its W2 distance to the consensus ensemble at time `horizon`, both
/// from the same initial draw. The noise floor is the distance between two
/// consensus ensembles driven by independent noise.
pub fn ga_quasi_invariant_experiment<T: Real>(
    eps_list: &[f64],
    obj: &Objective<T>,
    cfg: &QuasiInvariantConfig,
    rng: &RngStream,
) -> Result<DistanceReport> {
    if obj.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "quasi-invariant comparison needs a 1D objective, got d = {}",
            obj.dim()
        )));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return arg("scales must lie in (0, 1]");
    }
    if eps_list.iter().any(|e| e * cfg.lambda > 1.0) {
        return arg("eps * lambda must not exceed 1");
    }
    if !(cfg.horizon > 0.0) || !(cfg.reference_dt > 0.0) || cfg.n < 2 || !(cfg.sigma >= 0.0) || !(cfg.alpha >= 0.0) {
        return arg("invalid quasi-invariant settings");
    }
    let initial = Ensemble::gaussian(cfg.n, &[T::lit(cfg.init_mean)], T::lit(cfg.init_std), &rng.derive(0), 0)?;
    let reference = run_cbo(&initial, cfg, obj, &rng.derive(1))?;
    let twin = run_cbo(&initial, cfg, obj, &rng.derive(2))?;
    let noise_floor = wasserstein2_1d(reference.as_flat(), twin.as_flat())?;
    let mut rows = Vec::new();
    for (j, &eps) in eps_list.iter().enumerate() {
        let steps = (cfg.horizon / eps).round().max(1.0) as u64;
        let r = rng.derive(100 + j as u64);
        let mut x = initial.clone();
        for k in 0..steps {
            x = scaled_kinetic_step(&x, eps, cfg, obj, &r, k)?;
        }
        rows.push(DistanceRow { scale: eps, distance: wasserstein2_1d(x.as_flat(), reference.as_flat())? });
    }
    Ok(DistanceReport { rows, noise_floor, seed: rng.seed(), n: cfg.n, horizon: cfg.horizon })
}
