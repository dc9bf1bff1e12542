//! `kinopt run`: one seeded run of one algorithm.

use serde::Serialize;

use kinopt::enkf::{eki_integrate, run_enkf, EkiTrajectory, InverseProblem};
use kinopt::ga::{cbo_step, ga_step, ga_stats_table, ga_step_stats, GaStepStats};
use kinopt::pso::{cbo_memory_step, pso_classic_step, pso_sde_step, pso_stats_table, pso_step_stats, PsoStepStats};
use kinopt::report::CsvTable;
use kinopt::sa::run_sa;
use kinopt::{make_benchmark, Ensemble64, Error, Matrix, Objective64, RngStream, SwarmState64};

use crate::config::{Algorithm, PsoVariant, RunConfig};
use crate::CliError;

// stream families of one run
const INIT_TAG: u64 = 1 << 40;
const VEL_TAG: u64 = (1 << 40) + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub table: CsvTable,
    pub best_point: Vec<f64>,
    pub best_energy: f64,
    /// Steps completed.
    pub steps: u64,
    /// Set when the run stopped on a non-finite state.
    pub diverged: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub best_point: &'a [f64],
    pub best_energy: f64,
    pub steps: u64,
    pub wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged: Option<&'a str>,
    pub config: &'a RunConfig,
}

fn initial(cfg: &RunConfig, rng: &RngStream) -> Result<Ensemble64, CliError> {
    let mean = vec![cfg.init_mean; cfg.dim];
    Ok(Ensemble64::gaussian(cfg.particles, &mean, cfg.init_std, rng, INIT_TAG)?)
}

fn best_of(ens: &Ensemble64, obj: &Objective64) -> (Vec<f64>, f64) {
    let mut best = (ens.point(0).to_vec(), f64::INFINITY);
    for p in ens.points() {
        let e = obj.eval(p);
        if e < best.1 {
            best = (p.to_vec(), e);
        }
    }
    best
}

/// Runs the configured algorithm; a divergence stops the run early and is
/// reported in the outcome rather than as an error.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let seed = cfg.seed.unwrap_or(0);
    let rng = RngStream::new(seed);
    match cfg.algorithm {
        Algorithm::Sa => {
            let obj = make_benchmark::<f64>(cfg.objective(), cfg.dim)?;
            let x0 = initial(&RunConfig { particles: 1, ..cfg.clone() }, &rng)?.point(0).to_vec();
            let (state, trace) = run_sa(x0, cfg.steps, &obj, &cfg.sa_params(), &rng)?;
            let mut table = trace.to_table();
            let every = cfg.record_every as usize;
            table.rows = table
                .rows
                .into_iter()
                .enumerate()
                .filter(|(i, _)| i % every == 0 || *i == trace.rows.len() - 1)
                .map(|(_, r)| r)
                .collect();
            Ok(RunOutcome {
                table,
                best_energy: state.energy,
                best_point: state.x,
                steps: state.k,
                diverged: None,
            })
        }
        Algorithm::Ga | Algorithm::Cbo => run_population(cfg, &rng),
        Algorithm::Pso | Algorithm::CboMemory => run_swarm(cfg, &rng),
        Algorithm::Enkf | Algorithm::Eki => run_inversion(cfg, &rng),
    }
}

fn run_population(cfg: &RunConfig, rng: &RngStream) -> Result<RunOutcome, CliError> {
    let obj = make_benchmark::<f64>(cfg.objective(), cfg.dim)?;
    let mut ens = initial(cfg, rng)?;
    let mut rows: Vec<GaStepStats> = vec![ga_step_stats(0, &ens, &obj)?];
    let params = cfg.ga_params();
    let lambda = vec![cfg.lambda; cfg.dim];
    let mut diverged = None;
    let mut done = 0;
    for k in 1..=cfg.steps {
        let next = match cfg.algorithm {
            Algorithm::Ga => ga_step(&ens, &params, &obj, rng, k),
            _ => cbo_step(&ens, &lambda, cfg.sigma(), cfg.alpha(), cfg.dt(), &obj, rng, k),
        };
        match next {
            Ok(e) => ens = e,
            Err(e @ (Error::Numeric(_) | Error::Divergence { .. })) => {
                diverged = Some(format!("step {k}: {e}"));
                break;
            }
            Err(e) => return Err(e.into()),
        }
        done = k;
        if k % cfg.record_every == 0 || k == cfg.steps {
            rows.push(ga_step_stats(k, &ens, &obj)?);
        }
    }
    let (best_point, best_energy) = best_of(&ens, &obj);
    Ok(RunOutcome { table: ga_stats_table(&rows), best_point, best_energy, steps: done, diverged })
}

fn run_swarm(cfg: &RunConfig, rng: &RngStream) -> Result<RunOutcome, CliError> {
    let obj = make_benchmark::<f64>(cfg.objective(), cfg.dim)?;
    let x = initial(cfg, rng)?;
    let v = Ensemble64::gaussian(cfg.particles, &vec![0.0; cfg.dim], cfg.init_std, rng, VEL_TAG)?;
    let mut swarm = SwarmState64::new(&x, Some(&v), &obj)?;
    let params = cfg.pso_params();
    let mut rows: Vec<PsoStepStats> = vec![pso_step_stats(0, &swarm, &params, &obj)?];
    let mut diverged = None;
    let mut done = 0;
    for k in 1..=cfg.steps {
        let next = match (cfg.algorithm, cfg.pso_variant) {
            (Algorithm::CboMemory, _) => cbo_memory_step(&swarm, &params, &obj, rng, k),
            (_, PsoVariant::Sde) => pso_sde_step(&swarm, &params, &obj, rng, k),
            (_, PsoVariant::Classic) => pso_classic_step(&swarm, &cfg.classic_params(), &obj, rng, k),
        };
        match next {
            Ok(s) if s.is_finite() => swarm = s,
            Ok(_) => {
                diverged = Some(format!("step {k}: non-finite swarm state"));
                break;
            }
            Err(e @ (Error::Numeric(_) | Error::Divergence { .. })) => {
                diverged = Some(format!("step {k}: {e}"));
                break;
            }
            Err(e) => return Err(e.into()),
        }
        done = k;
        if k % cfg.record_every == 0 || k == cfg.steps {
            rows.push(pso_step_stats(k, &swarm, &params, &obj)?);
        }
    }
    Ok(RunOutcome {
        table: pso_stats_table(&rows),
        best_point: swarm.global_best().to_vec(),
        best_energy: swarm.global_best_energy(),
        steps: done,
        diverged,
    })
}

fn run_inversion(cfg: &RunConfig, rng: &RngStream) -> Result<RunOutcome, CliError> {
    let d = cfg.dim;
    let y = cfg.data.clone().unwrap_or_else(|| vec![0.0; d]);
    let problem = InverseProblem::linear(Matrix::identity(d), y.clone(), Matrix::identity(d).scale(cfg.gamma))?
        .with_truth(y)?;
    let init = initial(cfg, rng)?;
    let dt = cfg.dt();
    let result: Result<EkiTrajectory<f64>, Error> = match cfg.algorithm {
        Algorithm::Enkf => run_enkf(&init, &problem, dt, cfg.steps, cfg.record_every),
        _ => {
            let horizon = cfg.steps as f64 * dt;
            let times: Vec<f64> = (0..=cfg.steps)
                .step_by(cfg.record_every as usize)
                .map(|k| k as f64 * dt)
                .collect();
            eki_integrate(&init, &problem, horizon, dt, cfg.method, &times)
        }
    };
    match result {
        Ok(traj) => {
            let last = traj.last().expect("final state is recorded");
            let mean = last.mean();
            Ok(RunOutcome {
                table: traj.to_table(),
                best_energy: problem.misfit(&mean),
                best_point: mean,
                steps: cfg.steps,
                diverged: None,
            })
        }
        Err(Error::Divergence { last_valid_time, reason }) => {
            let steps = (last_valid_time / dt).round() as u64;
            Ok(RunOutcome {
                table: EkiTrajectory::<f64> { rows: Vec::new(), snapshots: Vec::new() }.to_table(),
                best_point: init.mean(),
                best_energy: f64::NAN,
                steps,
                diverged: Some(format!("step {steps}: {reason}")),
            })
        }
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::from_table;

    fn cfg(text: &str) -> RunConfig {
        from_table::<RunConfig>(text.parse::<toml::Table>().unwrap()).unwrap().resolve(7).unwrap()
    }

    #[test]
    fn every_algorithm_runs() {
        for alg in ["sa", "ga", "pso", "cbo", "cbo_memory", "enkf", "eki"] {
            let c = cfg(&format!("algorithm = \"{alg}\"\nsteps = 20\nparticles = 50"));
            let out = execute(&c).unwrap();
            assert!(out.diverged.is_none(), "{alg}");
            assert_eq!(out.best_point.len(), 1);
            assert!(out.best_energy.is_finite());
            assert!(out.table.rows.len() >= 2, "{alg}");
        }
    }

    #[test]
    fn sa_lowers_the_energy() {
        let c = cfg("algorithm = \"sa\"\nsteps = 10000\nrecord_every = 100");
        let out = execute(&c).unwrap();
        assert!(out.best_energy < 0.5 * 2.0f64.powi(2));
        assert_eq!(out.table.rows.len(), 101);
    }

    #[test]
    fn classic_swarm_without_inertia_is_reported_as_divergence() {
        let c = cfg("algorithm = \"pso\"\npso_variant = \"classic\"\nobjective = \"rastrigin\"\ndim = 2\nsteps = 20000\nrecord_every = 1000");
        let out = execute(&c).unwrap();
        assert!(out.diverged.is_some());
        assert!(out.steps < 20000);
    }
}
