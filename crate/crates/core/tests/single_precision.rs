// The public API instantiated at f32, checked against the f64 runs.

use kinopt::enkf::run_enkf;
use kinopt::ga::cbo_step;
use kinopt::sa::{run_sa, SaParams};
use kinopt::{make_benchmark, Ensemble32, Ensemble64, InverseProblem32, Matrix, RngStream};

#[test]
fn sa_chain_reaches_the_well_in_both_precisions() {
    let p = SaParams::fixed_temperature(0.01);
    let rng = RngStream::new(5);
    let o32 = make_benchmark::<f32>("quadratic", 2).unwrap();
    let o64 = make_benchmark::<f64>("quadratic", 2).unwrap();
    let (s32, _) = run_sa(vec![2.0f32, -1.0], 4000, &o32, &p, &rng).unwrap();
    let (s64, _) = run_sa(vec![2.0f64, -1.0], 4000, &o64, &p, &rng).unwrap();
    assert!(s32.energy < 0.1 && s64.energy < 0.1, "{} {}", s32.energy, s64.energy);
}

#[test]
fn cbo_contracts_in_f32() {
    let obj = make_benchmark::<f32>("quadratic", 1).unwrap();
    let rng = RngStream::new(9);
    let mut ens = Ensemble32::gaussian(500, &[1.5], 1.0, &rng, 0).unwrap();
    for k in 0..300 {
        ens = cbo_step(&ens, &[1.0], 0.3, 30.0, 0.05, &obj, &rng, k).unwrap();
    }
    assert!(ens.mean()[0].abs() < 0.1, "{:?}", ens.mean());
    assert!(ens.variance()[0] < 0.05);
}

#[test]
fn enkf_mean_agrees_across_precisions() {
    let rng = RngStream::new(2);
    let e64 = Ensemble64::gaussian(20, &[0.5, -0.5], 1.0, &rng, 0).unwrap();
    let flat: Vec<f32> = e64.points().flat_map(|p| p.iter().map(|v| *v as f32)).collect();
    let e32 = Ensemble32::from_flat(20, 2, flat).unwrap();
    let p64 = kinopt::InverseProblem64::linear(Matrix::identity(2), vec![1.0, 2.0], Matrix::identity(2)).unwrap();
    let p32 = InverseProblem32::linear(Matrix::identity(2), vec![1.0, 2.0], Matrix::identity(2)).unwrap();
    let t64 = run_enkf(&e64, &p64, 0.1, 50, 50).unwrap();
    let t32 = run_enkf(&e32, &p32, 0.1, 50, 50).unwrap();
    let (m64, m32) = (t64.last().unwrap().mean(), t32.last().unwrap().mean());
    for (a, b) in m64.iter().zip(&m32) {
        assert!((a - *b as f64).abs() < 1e-4, "{a} vs {b}");
    }
}
