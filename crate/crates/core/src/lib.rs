//! Stochastic particle optimizers (simulated annealing, genetic algorithms,
//! particle swarm, consensus-based optimization, ensemble Kalman inversion)
//! together with their kinetic and mean-field limits, and diagnostics for
//! comparing particle ensembles against those limits.
//!
//! All algorithms are generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`). Randomness flows through [`RngStream`], which hands
//! out independent substreams per (step, particle) so results do not depend
//! on the number of worker threads.

pub mod diagnostics;
pub mod enkf;
pub mod ensemble;
pub mod ga;
pub mod error;
pub mod gibbs;
pub mod lab;
pub mod linalg;
pub mod objective;
pub mod pso;
pub mod report;
pub mod rng;
pub mod sa;
pub mod scalar;
pub mod schedule;

pub use diagnostics::EmpiricalMeasure;
pub use enkf::InverseProblem;
pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use gibbs::{gibbs_mean, gibbs_weights};
pub use linalg::{Cholesky, Matrix};
pub use lab::{run_experiment, ExperimentReport, ExperimentSpec};
pub use objective::{make_benchmark, GrowthConstants, Objective, BENCHMARKS};
pub use rng::RngStream;
pub use pso::SwarmState;
pub use scalar::Real;
pub use schedule::Schedule;

pub type Ensemble64 = Ensemble<f64>;
pub type Ensemble32 = Ensemble<f32>;
pub type Objective64 = Objective<f64>;
pub type Objective32 = Objective<f32>;
pub type Matrix64 = Matrix<f64>;
pub type SwarmState64 = SwarmState<f64>;
pub type SwarmState32 = SwarmState<f32>;
pub type EmpiricalMeasure64 = EmpiricalMeasure<f64>;
pub type InverseProblem64 = InverseProblem<f64>;
pub type InverseProblem32 = InverseProblem<f32>;
