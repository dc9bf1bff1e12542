//! Simulated annealing: the Metropolis chain, its ensemble realization,
//! the overdamped Langevin integrator, and the diffusion-scaling comparison
//! between the two.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{gibbs_density, kl_divergence, wasserstein2_1d, GridDensity1D};
use crate::ensemble::Ensemble;
use crate::error::{arg, Error, Result};
use crate::objective::Objective;
use crate::report::{Cell, CsvTable, DistanceReport, DistanceRow};
use crate::rng::{fill_normal, normal, uniform, RngStream};
use crate::scalar::Real;
use crate::schedule::Schedule;

const CHAIN_TAG: u64 = 0x5341_0000;
const LANGEVIN_TAG: u64 = 0x4c41_4e47;

/// `min(1, exp(-(E_y - E_x) / T))`.
pub fn acceptance_probability<T: Real>(e_x: T, e_y: T, temperature: T) -> Result<T> {
    if !(temperature > T::zero()) || !temperature.is_finite() {
        return arg("temperature must be positive");
    }
    if !e_x.is_finite() || !e_y.is_finite() {
        return arg("energies must be finite");
    }
    Ok(metropolis(e_x, e_y, temperature))
}

fn metropolis<T: Real>(e_x: T, e_y: T, temperature: T) -> T {
    if e_y <= e_x {
        T::one()
    } else if !e_y.is_finite() {
        T::zero()
    } else {
        (-(e_y - e_x) / temperature).exp()
    }
}

/// How the proposal standard deviation follows the temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposalScale {
    /// `sigma_k = factor * sqrt(2 T_k)`.
    SqrtTwoT { factor: f64 },
    Fixed { sigma: f64 },
}

impl Default for ProposalScale {
    fn default() -> Self {
        ProposalScale::SqrtTwoT { factor: 1.0 }
    }
}

impl ProposalScale {
    fn sigma<T: Real>(&self, temperature: T) -> T {
        match *self {
            ProposalScale::SqrtTwoT { factor } => T::lit(factor) * (temperature + temperature).sqrt(),
            ProposalScale::Fixed { sigma } => T::lit(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            ProposalScale::SqrtTwoT { factor } => factor,
            ProposalScale::Fixed { sigma } => sigma,
        };
        if !(v > 0.0) || !v.is_finite() {
            return arg("proposal scale must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub schedule: Schedule,
    #[serde(default)]
    pub proposal: ProposalScale,
}

impl SaParams {
    pub fn fixed_temperature(t: f64) -> Self {
        Self { schedule: Schedule::Constant { value: t }, proposal: ProposalScale::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.proposal.validate()
    }
}

/// One Metropolis chain: position, step counter, current temperature and
/// proposal scale, plus the cached energy of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SAState<T> {
    pub x: Vec<T>,
    pub k: u64,
    pub temperature: T,
    pub sigma: T,
    pub energy: T,
}

impl<T: Real> SAState<T> {
    pub fn new(x: Vec<T>, obj: &Objective<T>, params: &SaParams) -> Result<Self> {
        params.validate()?;
        if x.len() != obj.dim() {
            return arg("start point has the wrong dimension");
        }
        let energy = obj.eval(&x);
        if !energy.is_finite() {
            return Err(Error::Numeric("non-finite energy at the start point".into()));
        }
        let temperature: T = params.schedule.value_at(0);
        Ok(Self { x, k: 0, temperature, sigma: params.proposal.sigma(temperature), energy })
    }
}

/// One Metropolis step at the current temperature, then advances the
/// schedule. Returns whether the proposal was accepted.
///
/// Draws `d` normals then one uniform from `rng`, always in that order.
pub fn sa_step<T: Real, R: Rng + ?Sized>(
    state: &SAState<T>,
    obj: &Objective<T>,
    params: &SaParams,
    rng: &mut R,
) -> (SAState<T>, bool) {
    let mut y = vec![T::zero(); state.x.len()];
    fill_normal(rng, &mut y);
    for (yk, &xk) in y.iter_mut().zip(&state.x) {
        *yk = xk + state.sigma * *yk;
    }
    let u: T = uniform(rng);
    let e_y = obj.eval(&y);
    let accepted = u < metropolis(state.energy, e_y, state.temperature);
    let k = state.k + 1;
    let temperature: T = params.schedule.value_at(k);
    let sigma = params.proposal.sigma(temperature);
    let next = if accepted {
        SAState { x: y, k, temperature, sigma, energy: e_y }
    } else {
        SAState { x: state.x.clone(), k, temperature, sigma, energy: state.energy }
    };
    (next, accepted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SATraceRow<T> {
    pub step: u64,
    /// Temperature used for the step that produced this row.
    pub temperature: T,
    pub energy: T,
    pub accepted: bool,
    pub position: Vec<T>,
}

/// Chronological per-step records; row 0 is the start point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SATrace<T> {
    pub rows: Vec<SATraceRow<T>>,
}

impl<T: Real> SATrace<T> {
    pub fn to_table(&self) -> CsvTable {
        let d = self.rows.first().map(|r| r.position.len()).unwrap_or(0);
        let mut cols = vec!["step".to_string(), "temperature".into(), "energy".into(), "accepted".into()];
        cols.extend((0..d).map(|i| format!("x{i}")));
        let mut t = CsvTable::new(cols);
        for r in &self.rows {
            let mut row = vec![
                Cell::from(r.step),
                Cell::from(r.temperature.as_f64()),
                Cell::from(r.energy.as_f64()),
                Cell::from(r.accepted),
            ];
            row.extend(r.position.iter().map(|v| Cell::from(v.as_f64())));
            t.push(row);
        }
        t
    }
}

/// A single annealing run of `steps` steps with a full trace.
pub fn run_sa<T: Real>(
    x0: Vec<T>,
    steps: u64,
    obj: &Objective<T>,
    params: &SaParams,
    rng: &RngStream,
) -> Result<(SAState<T>, SATrace<T>)> {
    let mut state = SAState::new(x0, obj, params)?;
    let mut trace = SATrace {
        rows: vec![SATraceRow {
            step: 0,
            temperature: state.temperature,
            energy: state.energy,
            accepted: false,
            position: state.x.clone(),
        }],
    };
    let mut r = rng.substream(CHAIN_TAG, 0);
    for _ in 0..steps {
        let t_used = state.temperature;
        let (next, accepted) = sa_step(&state, obj, params, &mut r);
        state = next;
        trace.rows.push(SATraceRow {
            step: state.k,
            temperature: t_used,
            energy: state.energy,
            accepted,
            position: state.x.clone(),
        });
    }
    Ok((state, trace))
}

/// Monte Carlo estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Estimates `(Q phi)(x) = E[beta(x, x + sigma xi) (phi(x + sigma xi) - phi(x))] + phi(x)`.
pub fn estimate_transition_operator<T: Real>(
    phi: impl Fn(&[T]) -> T,
    x: &[T],
    sigma: T,
    temperature: T,
    n: usize,
    obj: &Objective<T>,
    rng: &RngStream,
) -> Result<Estimate> {
    if n == 0 {
        return arg("need at least one sample");
    }
    if !(sigma > T::zero()) || !(temperature > T::zero()) {
        return arg("sigma and temperature must be positive");
    }
    let phi_x = phi(x).as_f64();
    let e_x = obj.eval(x);
    let mut r = rng.substream(0x5141_0000, 0);
    let mut y = vec![T::zero(); x.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        fill_normal(&mut r, &mut y);
        for (yk, &xk) in y.iter_mut().zip(x) {
            *yk = xk + sigma * *yk;
        }
        let b = metropolis(e_x, obj.eval(&y), temperature).as_f64();
        let v = b * (phi(&y).as_f64() - phi_x);
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(Estimate { value: mean + phi_x, std_error: (var / nf).sqrt() })
}

fn check_snapshots(snapshot_at: &[u64], steps: u64) -> Result<()> {
    if snapshot_at.windows(2).any(|w| w[0] >= w[1]) {
        return arg("snapshot steps must be strictly increasing");
    }
    if snapshot_at.last().is_some_and(|&s| s > steps) {
        return arg("snapshot step beyond the run length");
    }
    Ok(())
}

/// Collects per-chain snapshot buffers (chain-major) into ensembles.
fn gather_snapshots<T: Real>(buffers: Vec<Vec<T>>, snapshot_at: &[u64], n: usize, d: usize) -> Result<Vec<(u64, Ensemble<T>)>> {
    snapshot_at
        .iter()
        .enumerate()
        .map(|(s, &step)| {
            let mut flat = Vec::with_capacity(n * d);
            for b in &buffers {
                flat.extend_from_slice(&b[s * d..(s + 1) * d]);
            }
            Ensemble::from_flat(n, d, flat).map(|e| (step, e))
        })
        .collect()
}

/// Runs one independent chain per particle of `initial` for `steps` steps,
/// returning the ensemble at each step in `snapshot_at` (strictly
/// increasing, `0` is the start).
///
/// Chain `i` draws from its own substream, so the result is independent of
/// the thread count.
pub fn run_sa_ensemble<T: Real>(
    initial: &Ensemble<T>,
    steps: u64,
    obj: &Objective<T>,
    params: &SaParams,
    rng: &RngStream,
    snapshot_at: &[u64],
) -> Result<Vec<(u64, Ensemble<T>)>> {
    params.validate()?;
    check_snapshots(snapshot_at, steps)?;
    if initial.dim() != obj.dim() {
        return arg("ensemble and objective dimensions differ");
    }
    let d = initial.dim();
    let buffers: Vec<Vec<T>> = (0..initial.n())
        .into_par_iter()
        .map(|i| {
            let mut state = SAState::new(initial.point(i).to_vec(), obj, params)?;
            let mut r = rng.substream(CHAIN_TAG, i as u64);
            let mut buf = Vec::with_capacity(snapshot_at.len() * d);
            let mut next_snap = snapshot_at.iter().peekable();
            loop {
                while next_snap.next_if(|&&s| s == state.k).is_some() {
                    buf.extend_from_slice(&state.x);
                }
                if state.k == steps {
                    break;
                }
                state = sa_step(&state, obj, params, &mut r).0;
            }
            Ok(buf)
        })
        .collect::<Result<_>>()?;
    gather_snapshots(buffers, snapshot_at, initial.n(), d)
}

/// Euler-Maruyama step of `dX = -grad E dt + sqrt(2T) dW`.
pub fn langevin_step<T: Real, R: Rng + ?Sized>(
    x: &[T],
    obj: &Objective<T>,
    temperature: T,
    dt: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    if temperature < T::zero() || !(dt > T::zero()) {
        return arg("need T >= 0 and dt > 0");
    }
    let mut g = vec![T::zero(); x.len()];
    obj.gradient(x, &mut g)?;
    let amp = (T::lit(2.0) * temperature * dt).sqrt();
    Ok(x.iter()
        .zip(&g)
        .map(|(&xi, &gi)| {
            let xi_new = xi - gi * dt;
            if amp > T::zero() {
                xi_new + amp * normal::<T, _>(rng)
            } else {
                xi_new
            }
        })
        .collect())
}

/// Langevin analogue of [`run_sa_ensemble`].
pub fn run_langevin_ensemble<T: Real>(
    initial: &Ensemble<T>,
    obj: &Objective<T>,
    temperature: T,
    dt: T,
    steps: u64,
    rng: &RngStream,
    snapshot_at: &[u64],
) -> Result<Vec<(u64, Ensemble<T>)>> {
    check_snapshots(snapshot_at, steps)?;
    let d = initial.dim();
    let buffers: Vec<Vec<T>> = (0..initial.n())
        .into_par_iter()
        .map(|i| {
            let mut x = initial.point(i).to_vec();
            let mut r = rng.substream(LANGEVIN_TAG, i as u64);
            let mut buf = Vec::with_capacity(snapshot_at.len() * d);
            let mut next_snap = snapshot_at.iter().peekable();
            let mut k = 0u64;
            loop {
                while next_snap.next_if(|&&s| s == k).is_some() {
                    buf.extend_from_slice(&x);
                }
                if k == steps {
                    break;
                }
                x = langevin_step(&x, obj, temperature, dt, &mut r)?;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence {
                        last_valid_time: (k as f64) * dt.as_f64(),
                        reason: format!("langevin chain {i} left the finite range"),
                    });
                }
                k += 1;
            }
            Ok(buf)
        })
        .collect::<Result<_>>()?;
    gather_snapshots(buffers, snapshot_at, initial.n(), d)
}

/// Relative entropy of the histogram of a 1D ensemble (256 bins on
/// `[-half_width, half_width]`) with respect to the Gibbs density at `T`.
pub fn histogram_kl<T: Real>(ensemble: &Ensemble<T>, obj: &Objective<T>, temperature: f64, half_width: f64) -> Result<f64> {
    if ensemble.dim() != 1 {
        return Err(Error::Unsupported("histogram entropy needs a 1D ensemble".into()));
    }
    let h = GridDensity1D::histogram(ensemble.as_flat(), -half_width, half_width, 256)?;
    let g = gibbs_density(obj, temperature, *h.grid())?;
    kl_divergence(&h, &g)
}

/// Settings of the diffusion-scaling comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionScalingConfig {
    pub temperature: f64,
    pub horizon: f64,
    pub n: usize,
    pub init_mean: f64,
    pub init_std: f64,
    /// Time step of the Langevin reference ensemble.
    pub reference_dt: f64,
}

impl Default for DiffusionScalingConfig {
    fn default() -> Self {
        Self { temperature: 0.5, horizon: 1.0, n: 10_000, init_mean: 0.0, init_std: 0.5, reference_dt: 1e-3 }
    }
}

/// For each `eps`, runs the SA ensemble with proposal scale
/// `sqrt(eps) sqrt(2T)` for `horizon / eps` steps and reports its W2
/// distance to a Langevin ensemble at time `horizon`. Both start from the
/// same initial draw. The noise floor is the distance between two Langevin
/// ensembles driven by independent noise.
pub fn sa_diffusion_scaling<T: Real>(
    eps_list: &[f64],
    obj: &Objective<T>,
    cfg: &DiffusionScalingConfig,
    rng: &RngStream,
) -> Result<DistanceReport> {
    if obj.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "diffusion-scaling comparison needs a 1D objective, got d = {}",
            obj.dim()
        )));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return arg("scales must lie in (0, 1]");
    }
    if !(cfg.temperature > 0.0) || !(cfg.horizon > 0.0) || !(cfg.reference_dt > 0.0) || cfg.n == 0 || !(cfg.init_std >= 0.0) {
        return arg("invalid diffusion-scaling settings");
    }
    let initial = Ensemble::gaussian(cfg.n, &[T::lit(cfg.init_mean)], T::lit(cfg.init_std), &rng.derive(0), 0)?;
    let ref_steps = (cfg.horizon / cfg.reference_dt).round().max(1.0) as u64;
    let t = T::lit(cfg.temperature);
    let dt = T::lit(cfg.horizon / ref_steps as f64);
    let reference = run_langevin_ensemble(&initial, obj, t, dt, ref_steps, &rng.derive(1), &[ref_steps])?;
    let twin = run_langevin_ensemble(&initial, obj, t, dt, ref_steps, &rng.derive(2), &[ref_steps])?;
    let noise_floor = wasserstein2_1d(reference[0].1.as_flat(), twin[0].1.as_flat())?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for (j, &eps) in eps_list.iter().enumerate() {
        let steps = (cfg.horizon / eps).round().max(1.0) as u64;
        let params = SaParams {
            schedule: Schedule::Constant { value: cfg.temperature },
            proposal: ProposalScale::SqrtTwoT { factor: eps.sqrt() },
        };
        let out = run_sa_ensemble(&initial, steps, obj, &params, &rng.derive(100 + j as u64), &[steps])?;
        rows.push(DistanceRow { scale: eps, distance: wasserstein2_1d(out[0].1.as_flat(), reference[0].1.as_flat())? });
    }
    Ok(DistanceReport { rows, noise_floor, seed: rng.seed(), n: cfg.n, horizon: cfg.horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::make_benchmark;
    use proptest::prelude::*;

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(2.0, 1.0, 0.3).unwrap(), 1.0);
        assert!((acceptance_probability(1.0, 1.7, 0.7).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(acceptance_probability(0.0, 1.0, 1e-300).unwrap(), 0.0);
        assert!(acceptance_probability(0.0, 1.0, 0.0).is_err());
        assert!(acceptance_probability(f64::NAN, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn detailed_balance_ratio(ex in -10.0f64..10.0, ey in -10.0f64..10.0, t in 0.05f64..5.0) {
            let fwd = acceptance_probability(ex, ey, t).unwrap();
            let bwd = acceptance_probability(ey, ex, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&fwd));
            let ratio = fwd / bwd;
            let expect = (-(ey - ex) / t).exp();
            prop_assert!((ratio - expect).abs() <= 1e-12 * expect.max(1.0));
        }

        #[test]
        fn rejected_chain_keeps_position_bits(seed in 0u64..1000) {
            let obj = make_benchmark::<f64>("rastrigin", 2).unwrap();
            let params = SaParams::fixed_temperature(0.2);
            let (_, trace) = run_sa(vec![0.3, -0.7], 50, &obj, &params, &RngStream::new(seed)).unwrap();
            for w in trace.rows.windows(2) {
                if w[1].accepted {
                    prop_assert!(w[1].position != w[0].position);
                } else {
                    prop_assert_eq!(&w[1].position, &w[0].position);
                    prop_assert_eq!(w[1].energy.to_bits(), w[0].energy.to_bits());
                }
            }
        }
    }

    #[test]
    fn acceptance_frequency_matches_probability() {
        // fixed (x, y): feed the step a proposal noise that lands on y
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let (ex, ey, t) = (obj.eval(&[0.5]), obj.eval(&[1.2]), 0.4);
        let p = acceptance_probability(ex, ey, t).unwrap();
        let mut r = RngStream::new(5).substream(0, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| uniform::<f64, _>(&mut r) < metropolis(ex, ey, t)).count();
        let freq = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn step_acceptance_rate_matches_integrated_probability() {
        // one-step acceptance from x, compared with a quadrature of
        // E[beta(x, x + sigma xi)] over the Gaussian proposal
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let params = SaParams::fixed_temperature(0.5);
        let state = SAState::new(vec![0.8], &obj, &params).unwrap();
        let mut r = RngStream::new(9).substream(1, 0);
        let n = 100_000;
        let acc = (0..n).filter(|_| sa_step(&state, &obj, &params, &mut r).1).count() as f64 / n as f64;
        let (sigma, ex) = (1.0, obj.eval(&[0.8]));
        let mut quad = 0.0;
        let h = 1e-3;
        let mut z: f64 = -8.0;
        while z < 8.0 {
            let w = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * h;
            quad += w * metropolis(ex, obj.eval(&[0.8 + sigma * z]), 0.5);
            z += h;
        }
        let se = (quad * (1.0 - quad) / n as f64).sqrt();
        assert!((acc - quad).abs() < 3.0 * se, "{acc} vs {quad}");
    }

    #[test]
    fn low_temperature_only_descends() {
        let obj = make_benchmark::<f64>("rastrigin", 1).unwrap();
        let params = SaParams::fixed_temperature(1e-300);
        let (_, trace) = run_sa(vec![1.3], 500, &obj, &params, &RngStream::new(3)).unwrap();
        for w in trace.rows.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
    }

    #[test]
    fn transition_operator_preserves_constants() {
        let obj = make_benchmark::<f64>("doublewell1d", 1).unwrap();
        for n in [1, 7, 1000] {
            let est = estimate_transition_operator(|_| 1.0, &[0.3], 0.4, 0.2, n, &obj, &RngStream::new(1)).unwrap();
            assert_eq!(est.value, 1.0);
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn transition_operator_constant_objective_is_gaussian_average() {
        let flat = Objective::new("flat", 1, |_: &[f64]| 0.0);
        // E[(x + sigma xi)^2] = x^2 + sigma^2
        let est = estimate_transition_operator(|y| y[0] * y[0], &[0.5], 0.3, 1.0, 200_000, &flat, &RngStream::new(2)).unwrap();
        assert!((est.value - 0.34).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn transition_operator_pulls_toward_minimum() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let est = estimate_transition_operator(|y| y[0], &[1.0], 0.1, 0.05, 100_000, &obj, &RngStream::new(4)).unwrap();
        // brute-force oracle with ten times the samples and another stream
        let oracle = estimate_transition_operator(|y| y[0], &[1.0], 0.1, 0.05, 1_000_000, &obj, &RngStream::new(40)).unwrap();
        assert!(est.value < 1.0);
        assert!(oracle.value < 1.0 - 3.0 * oracle.std_error);
        let se = (est.std_error.powi(2) + oracle.std_error.powi(2)).sqrt();
        assert!((est.value - oracle.value).abs() < 4.0 * se);
    }

    #[test]
    fn single_chain_ensemble_matches_run_sa() {
        let obj = make_benchmark::<f64>("ackley", 2).unwrap();
        let params = SaParams { schedule: Schedule::Logarithmic { c: 1.0 }, proposal: ProposalScale::default() };
        let rng = RngStream::new(17);
        let init = Ensemble::from_points(&[vec![1.5, -0.5]]).unwrap();
        let snaps = run_sa_ensemble(&init, 200, &obj, &params, &rng, &[0, 100, 200]).unwrap();
        let (last, trace) = run_sa(vec![1.5, -0.5], 200, &obj, &params, &rng).unwrap();
        assert_eq!(snaps[0].1.point(0), &[1.5, -0.5]);
        assert_eq!(snaps[1].1.point(0), trace.rows[100].position.as_slice());
        assert_eq!(snaps[2].1.point(0), last.x.as_slice());
    }

    #[test]
    fn fixed_temperature_variance_is_t() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let t = 0.3;
        let init = Ensemble::gaussian(4000, &[2.0], 0.1, &RngStream::new(8), 0).unwrap();
        let snaps = run_sa_ensemble(&init, 1500, &obj, &SaParams::fixed_temperature(t), &RngStream::new(8), &[1500]).unwrap();
        let v = snaps[0].1.variance()[0];
        assert!((v - t).abs() < 0.1 * t, "variance {v}");
    }

    #[test]
    fn entropy_decreases_on_doublewell() {
        let obj = make_benchmark::<f64>("doublewell1d", 1).unwrap();
        let t = 0.5;
        let init = Ensemble::gaussian(10_000, &[0.0], 0.2, &RngStream::new(21), 0).unwrap();
        let snaps = run_sa_ensemble(&init, 100, &obj, &SaParams::fixed_temperature(t), &RngStream::new(21), &[1, 100]).unwrap();
        let early = histogram_kl(&snaps[0].1, &obj, t, 2.5).unwrap();
        let late = histogram_kl(&snaps[1].1, &obj, t, 2.5).unwrap();
        assert!(late < early, "{late} !< {early}");
    }

    #[test]
    fn langevin_zero_temperature_is_gradient_descent() {
        let obj = make_benchmark::<f64>("doublewell1d", 1).unwrap();
        let mut r = RngStream::new(0).substream(0, 0);
        let x = langevin_step(&[0.5], &obj, 0.0, 0.01, &mut r).unwrap();
        assert_eq!(x[0], 0.5 - 0.01 * 4.0 * 0.5 * (0.25 - 1.0));
    }

    #[test]
    fn langevin_mean_decay_closed_form() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let dt = 0.05;
        let mut x = vec![3.0];
        let mut r = RngStream::new(0).substream(0, 0);
        for _ in 0..40 {
            x = langevin_step(&x, &obj, 0.0, dt, &mut r).unwrap();
        }
        assert!((x[0] - 3.0 * (1.0f64 - dt).powi(40)).abs() < 1e-12);
    }

    #[test]
    fn langevin_ou_stationary_variance() {
        let obj = make_benchmark::<f64>("quadratic", 1).unwrap();
        let (t, dt) = (0.4, 0.01);
        let init = Ensemble::consensus(5000, &[0.0]).unwrap();
        let out = run_langevin_ensemble(&init, &obj, t, dt, 1000, &RngStream::new(6), &[1000]).unwrap();
        // Euler-Maruyama stationary variance of the OU recursion
        let exact = 2.0 * t * dt / (1.0 - (1.0 - dt) * (1.0 - dt));
        let v = out[0].1.variance()[0];
        assert!((v - exact).abs() < 0.06 * exact, "{v} vs {exact}");
    }

    #[test]
    fn langevin_rejects_bad_gradient() {
        let obj = Objective::new("nan", 1, |_: &[f64]| f64::NAN);
        let mut r = RngStream::new(0).substream(0, 0);
        assert!(matches!(langevin_step(&[0.0], &obj, 1.0, 0.1, &mut r), Err(Error::Numeric(_))));
    }

    #[test]
    fn diffusion_scaling_is_deterministic_and_1d_only() {
        let obj = make_benchmark::<f64>("doublewell1d", 1).unwrap();
        let cfg = DiffusionScalingConfig { n: 500, reference_dt: 1e-2, ..Default::default() };
        let a = sa_diffusion_scaling(&[0.5], &obj, &cfg, &RngStream::new(3)).unwrap();
        let b = sa_diffusion_scaling(&[0.5], &obj, &cfg, &RngStream::new(3)).unwrap();
        assert_eq!(a, b);
        let obj2 = make_benchmark::<f64>("doublewell1d", 2).unwrap();
        assert!(matches!(sa_diffusion_scaling(&[0.5], &obj2, &cfg, &RngStream::new(3)), Err(Error::Unsupported(_))));
        assert!(sa_diffusion_scaling(&[1.5], &obj, &cfg, &RngStream::new(3)).is_err());
    }

    #[test]
    fn trace_csv_has_position_columns() {
        let obj = make_benchmark::<f64>("quadratic", 2).unwrap();
        let (_, trace) = run_sa(vec![1.0, 1.0], 3, &obj, &SaParams::fixed_temperature(1.0), &RngStream::new(0)).unwrap();
        let csv = trace.to_table().render(None);
        assert!(csv.starts_with("step,temperature,energy,accepted,x0,x1\n0,"));
        assert_eq!(csv.lines().count(), 5);
    }
}
