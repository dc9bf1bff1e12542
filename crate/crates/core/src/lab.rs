//! Seeded scaling experiments: run a module experiment over a list of
//! scale values and several replicates, then judge the distance column.

use serde::{Deserialize, Serialize};

use crate::enkf::{eki_integrate, loglog_slope, InverseProblem, OdeMethod};
use crate::ensemble::Ensemble;
use crate::error::{arg, Error, Result};
use crate::ga::{ga_contraction_check, ga_quasi_invariant_experiment, GAParams, QuasiInvariantConfig, Retention, SelectionKind};
use crate::linalg::Matrix;
use crate::objective::make_benchmark;
use crate::pso::{zero_inertia_experiment, ZeroInertiaConfig};
use crate::report::{Cell, CsvTable, DistanceReport};
use crate::rng::RngStream;
use crate::sa::{sa_diffusion_scaling, DiffusionScalingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SaDiffusion,
    GaQuasiInvariant,
    PsoZeroInertia,
    GaContraction,
    EnkfCollapse,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SaDiffusion => "sa_diffusion",
            ExperimentKind::GaQuasiInvariant => "ga_quasi_invariant",
            ExperimentKind::PsoZeroInertia => "pso_zero_inertia",
            ExperimentKind::GaContraction => "ga_contraction",
            ExperimentKind::EnkfCollapse => "enkf_collapse",
        }
    }

    /// What the scale list means for this kind.
    pub fn scale_meaning(self) -> &'static str {
        match self {
            ExperimentKind::SaDiffusion | ExperimentKind::GaQuasiInvariant => "epsilon",
            ExperimentKind::PsoZeroInertia => "inertia m",
            ExperimentKind::GaContraction => "new-particle fraction nu",
            ExperimentKind::EnkfCollapse => "noise variance",
        }
    }
}

fn default_dim() -> usize {
    1
}

fn default_replicates() -> usize {
    5
}

/// Optional overrides of the per-kind defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOptions {
    pub init_mean: Option<f64>,
    pub init_std: Option<f64>,
    /// Gibbs weight parameter (GA kinds).
    pub alpha: Option<f64>,
    /// Mutation / diffusion strength.
    pub sigma: Option<f64>,
    /// Target distance of the contraction check.
    pub accuracy: Option<f64>,
    /// Time step of the limit or ODE integrator.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Strictly positive, strictly descending.
    pub scales: Vec<f64>,
    pub objective: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Physical time, or the step budget for `ga_contraction`.
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub options: ExperimentOptions,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return arg("scales must be nonempty, finite and strictly positive");
        }
        if self.scales.windows(2).any(|w| !(w[0] > w[1])) {
            return arg("scales must be sorted strictly descending");
        }
        if self.n < 100 {
            return arg("experiments need N >= 100");
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return arg("horizon must be positive");
        }
        if self.replicates == 0 {
            return arg("at least one replicate is needed");
        }
        if self.dim == 0 {
            return arg("dimension must be positive");
        }
        let needs_1d = matches!(
            self.kind,
            ExperimentKind::SaDiffusion | ExperimentKind::GaQuasiInvariant | ExperimentKind::PsoZeroInertia
        );
        if needs_1d && self.dim != 1 {
            return arg(format!("{} compares 1D laws; dim must be 1", self.kind.name()));
        }
        match self.kind {
            ExperimentKind::EnkfCollapse => {
                if self.objective != "linear" {
                    return arg("enkf_collapse runs on the `linear` problem");
                }
            }
            _ => {
                make_benchmark::<f64>(&self.objective, self.dim)?;
            }
        }
        if self.kind == ExperimentKind::GaContraction && self.scales.iter().any(|s| *s > 1.0) {
            return arg("ga_contraction scales are fractions in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub scale: f64,
    /// Mean over replicates of the distance (W2 kinds), the worst envelope
    /// margin `distance - envelope - 3 SE` (contraction), or the log-log
    /// spread slope (collapse).
    pub value: f64,
    /// Standard error of `value` across replicates.
    pub mc_error: f64,
    /// Replicates failing the per-run check (contraction only).
    #[serde(default)]
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub objective: String,
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub horizon: f64,
    pub seed: u64,
    pub replicates: usize,
    /// Mean distance between independent realizations of the limit (W2
    /// kinds only).
    pub noise_floor: Option<f64>,
    pub rows: Vec<ExperimentRow>,
    pub pass: bool,
}

impl ExperimentReport {
    /// Recomputes the verdict from the rows.
    pub fn verdict(&self) -> bool {
        verdict(self.kind, &self.rows, self.noise_floor.unwrap_or(0.0))
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["scale", "value", "mc_error", "failures"]);
        for r in &self.rows {
            t.push(vec![r.scale.into(), r.value.into(), r.mc_error.into(), r.failures.into()]);
        }
        t
    }
}

/// Allowed slope window for the spread collapse.
pub const COLLAPSE_SLOPE: (f64, f64) = (-1.2, -0.8);

/// Consecutive rows are compared only while the larger-scale distance is
/// above twice the noise floor. `sa_diffusion` needs a strict drop of more
/// than two combined standard errors; the other distance kinds only forbid
/// a rise of more than two combined standard errors.
pub fn verdict(kind: ExperimentKind, rows: &[ExperimentRow], noise_floor: f64) -> bool {
    if rows.is_empty() || rows.iter().any(|r| !r.value.is_finite()) {
        return false;
    }
    match kind {
        ExperimentKind::SaDiffusion | ExperimentKind::GaQuasiInvariant | ExperimentKind::PsoZeroInertia => {
            rows.windows(2).all(|w| {
                let (prev, next) = (&w[0], &w[1]);
                if prev.value <= 2.0 * noise_floor {
                    return true;
                }
                let se = (prev.mc_error.powi(2) + next.mc_error.powi(2)).sqrt();
                if kind == ExperimentKind::SaDiffusion {
                    prev.value - next.value > 2.0 * se
                } else {
                    next.value <= prev.value + 2.0 * se
                }
            })
        }
        ExperimentKind::GaContraction => rows.iter().all(|r| r.failures == 0 && r.value <= 0.0),
        ExperimentKind::EnkfCollapse => {
            rows.iter().all(|r| (COLLAPSE_SLOPE.0..=COLLAPSE_SLOPE.1).contains(&r.value))
        }
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let m = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

/// Runs every replicate (stream `rng.derive(r)` of the seed) and folds the
/// per-scale values into means and standard errors.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let root = RngStream::new(spec.seed);
    let mut per_scale: Vec<Vec<f64>> = vec![Vec::new(); spec.scales.len()];
    let mut failures = vec![0usize; spec.scales.len()];
    let mut floors = Vec::new();
    for r in 0..spec.replicates {
        let rng = root.derive(r as u64);
        match spec.kind {
            ExperimentKind::SaDiffusion | ExperimentKind::GaQuasiInvariant | ExperimentKind::PsoZeroInertia => {
                let rep = distance_replicate(spec, &rng)?;
                floors.push(rep.noise_floor);
                for (slot, row) in per_scale.iter_mut().zip(&rep.rows) {
                    slot.push(row.distance);
                }
            }
            ExperimentKind::GaContraction => {
                for (j, &nu) in spec.scales.iter().enumerate() {
                    let (margin, ok) = contraction_replicate(spec, nu, &rng.derive(j as u64))?;
                    per_scale[j].push(margin);
                    failures[j] += usize::from(!ok);
                }
            }
            ExperimentKind::EnkfCollapse => {
                for (j, &g) in spec.scales.iter().enumerate() {
                    per_scale[j].push(collapse_replicate(spec, g, &rng.derive(j as u64))?);
                }
            }
        }
    }
    let rows: Vec<ExperimentRow> = spec
        .scales
        .iter()
        .zip(&per_scale)
        .zip(&failures)
        .map(|((&scale, vals), &failures)| {
            let (value, mc_error) = match spec.kind {
                // worst replicate, not the average
                ExperimentKind::GaContraction => {
                    (vals.iter().copied().fold(f64::NEG_INFINITY, f64::max), mean_se(vals).1)
                }
                _ => mean_se(vals),
            };
            ExperimentRow { scale, value, mc_error, failures }
        })
        .collect();
    let noise_floor = (!floors.is_empty()).then(|| mean_se(&floors).0);
    let mut report = ExperimentReport {
        kind: spec.kind,
        objective: spec.objective.clone(),
        dim: spec.dim,
        n: spec.n,
        horizon: spec.horizon,
        seed: spec.seed,
        replicates: spec.replicates,
        noise_floor,
        rows,
        pass: false,
    };
    report.pass = report.verdict();
    Ok(report)
}

fn distance_replicate(spec: &ExperimentSpec, rng: &RngStream) -> Result<DistanceReport> {
    let obj = make_benchmark::<f64>(&spec.objective, 1)?;
    let o = &spec.options;
    match spec.kind {
        ExperimentKind::SaDiffusion => {
            let d = DiffusionScalingConfig::default();
            let cfg = DiffusionScalingConfig {
                horizon: spec.horizon,
                n: spec.n,
                init_mean: o.init_mean.unwrap_or(d.init_mean),
                init_std: o.init_std.unwrap_or(d.init_std),
                reference_dt: o.dt.unwrap_or(d.reference_dt),
                ..d
            };
            sa_diffusion_scaling(&spec.scales, &obj, &cfg, rng)
        }
        ExperimentKind::GaQuasiInvariant => {
            let d = QuasiInvariantConfig::default();
            let cfg = QuasiInvariantConfig {
                horizon: spec.horizon,
                n: spec.n,
                init_mean: o.init_mean.unwrap_or(d.init_mean),
                init_std: o.init_std.unwrap_or(d.init_std),
                alpha: o.alpha.unwrap_or(d.alpha),
                sigma: o.sigma.unwrap_or(d.sigma),
                reference_dt: o.dt.unwrap_or(d.reference_dt),
                ..d
            };
            ga_quasi_invariant_experiment(&spec.scales, &obj, &cfg, rng)
        }
        ExperimentKind::PsoZeroInertia => {
            let d = ZeroInertiaConfig::default();
            let cfg = ZeroInertiaConfig {
                horizon: spec.horizon,
                n: spec.n,
                init_mean: o.init_mean.unwrap_or(d.init_mean),
                init_std: o.init_std.unwrap_or(d.init_std),
                dt: o.dt.unwrap_or(d.dt),
                ..d
            };
            zero_inertia_experiment(&spec.scales, &obj, &cfg, rng)
        }
        _ => Err(Error::Argument("not a distance experiment".into())),
    }
}

/// Worst `distance - envelope - 3 SE` up to the accuracy step, and whether
/// the envelope held until the accuracy was reached.
fn contraction_replicate(spec: &ExperimentSpec, nu: f64, rng: &RngStream) -> Result<(f64, bool)> {
    let o = &spec.options;
    let obj = make_benchmark::<f64>(&spec.objective, spec.dim)?;
    let params = GAParams {
        sigma: o.sigma.unwrap_or(0.01),
        nu,
        selection: SelectionKind::BoltzmannGibbs { alpha: o.alpha.unwrap_or(50.0) },
        retention: Retention::default(),
    };
    let mean = vec![o.init_mean.unwrap_or(1.0); spec.dim];
    let init = Ensemble::gaussian(spec.n, &mean, o.init_std.unwrap_or(1.0), rng, u64::MAX)?;
    let steps = spec.horizon.round().max(1.0) as u64;
    let rep = ga_contraction_check(&init, &params, &obj, steps, o.accuracy.unwrap_or(0.05), &rng.derive(1))?;
    let last = rep.accuracy_reached.unwrap_or(u64::MAX);
    let margin = rep
        .rows
        .iter()
        .filter(|r| r.step < last)
        .map(|r| r.distance - r.envelope - 3.0 * r.std_error)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((margin, rep.holds_until_accuracy()))
}

/// Log-log slope of the spread norm over the last decade of the run, for
/// `F = I`, `y = 0`, `Gamma = g I`.
fn collapse_replicate(spec: &ExperimentSpec, g: f64, rng: &RngStream) -> Result<f64> {
    let d = spec.dim;
    let o = &spec.options;
    let problem = InverseProblem::linear(Matrix::identity(d), vec![0.0; d], Matrix::identity(d).scale(g))?
        .with_truth(vec![0.0; d])?;
    let mean = vec![o.init_mean.unwrap_or(0.5); d];
    let init = Ensemble::gaussian(spec.n, &mean, o.init_std.unwrap_or(1.0), rng, 0)?;
    let t = spec.horizon;
    let times: Vec<f64> = (0..=40).map(|k| t / 10.0 * 10f64.powf(k as f64 / 40.0)).collect();
    let traj = eki_integrate(&init, &problem, t, o.dt.unwrap_or(0.01), OdeMethod::Rk4, &times)?;
    let pts: Vec<(f64, f64)> = traj.rows.iter().map(|r| (r.time, r.spread_norm)).collect();
    loglog_slope(&pts, t / 10.0 * (1.0 - 1e-9))
}

/// One line per report: identity, headline numbers and verdict.
pub fn summarize(reports: &[ExperimentReport]) -> Result<CsvTable> {
    if reports.is_empty() {
        return arg("nothing to summarize");
    }
    let mut t = CsvTable::new([
        "kind",
        "objective",
        "dim",
        "N",
        "horizon",
        "seed",
        "scales",
        "first_value",
        "last_value",
        "noise_floor",
        "pass",
    ]);
    for r in reports {
        let scales: Vec<String> = r.rows.iter().map(|x| x.scale.to_string()).collect();
        t.push(vec![
            Cell::from(r.kind.name()),
            Cell::from(r.objective.as_str()),
            r.dim.into(),
            r.n.into(),
            r.horizon.into(),
            Cell::Int(r.seed as i64),
            Cell::Text(scales.join(";")),
            r.rows.first().map_or(f64::NAN, |x| x.value).into(),
            r.rows.last().map_or(f64::NAN, |x| x.value).into(),
            r.noise_floor.unwrap_or(f64::NAN).into(),
            r.verdict().into(),
        ]);
    }
    Ok(t)
}
