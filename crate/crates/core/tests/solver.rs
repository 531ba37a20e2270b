//! Linear solver and interval stepper against dense and analytic references.

mod common;

use faer::prelude::*;
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttgrape_core::oracle::{self, DenseModel};
use ttgrape_core::spin::{build_pure_density_tt, hermitian_conjugate, lift_superoperator, trace};
use ttgrape_core::{
    amen_solve, propagate, tamen_step, Error, ProductStateSpec, SolverOptions, SpectralGrid, SpinModel, TtOperator,
    TtVector, C64,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Identity plus a rank-2 random perturbation of size `eps`.
fn perturbed_identity(modes: &[usize], eps: f64, rng: &mut ChaCha8Rng) -> TtOperator {
    let mut a = TtOperator::identity(modes);
    for _ in 0..2 {
        let factors: Vec<(usize, Vec<C64>)> = modes
            .iter()
            .map(|&n| (n, TtVector::random(&[n * n], 1, rng).to_dense().unwrap()))
            .collect();
        let p = TtOperator::product(&factors).unwrap();
        let scale = eps / p.to_dense().unwrap().norm_l2() * (modes.iter().product::<usize>() as f64).sqrt();
        a = TtOperator::add_scaled(C64::new(scale, 0.0), &p, &a).unwrap();
    }
    a
}

fn dense_solve(a: &TtOperator, f: &TtVector) -> Vec<C64> {
    let fd = f.to_dense().unwrap();
    let x = a.to_dense().unwrap().partial_piv_lu().solve(Mat::from_fn(fd.len(), 1, |i, _| fd[i]));
    (0..fd.len()).map(|i| x[(i, 0)]).collect()
}

fn dense_residual(a: &TtOperator, f: &TtVector, x: &TtVector) -> f64 {
    let ad = a.to_dense().unwrap();
    let (fd, xd) = (f.to_dense().unwrap(), x.to_dense().unwrap());
    let ax = &ad * Mat::from_fn(xd.len(), 1, |i, _| xd[i]);
    let r: f64 = (0..fd.len()).map(|i| (fd[i] - ax[(i, 0)]).norm_sqr()).sum::<f64>().sqrt();
    r / fd.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn constant(modes: &[usize]) -> TtVector {
    TtVector::product(&modes.iter().map(|&n| vec![ONE; n]).collect::<Vec<_>>())
}

#[test]
fn identity_system_converges_in_one_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let f = TtVector::random(&[4, 4, 4], 3, &mut rng);
    let (x, rep) = amen_solve(&TtOperator::identity(&[4, 4, 4]), &f, &constant(&[4, 4, 4]), &SolverOptions::default())
        .unwrap();
    assert!(rep.converged);
    assert_eq!(rep.sweeps, 1);
    assert!(x.distance(&f).unwrap() <= 1e-8 * f.norm());
}

#[test]
fn residual_certificate_holds_densely() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for modes in [vec![4, 4, 4], vec![2, 3, 4, 2], vec![4, 4, 4, 4]] {
        let a = perturbed_identity(&modes, 0.1, &mut rng);
        let f = TtVector::random(&modes, 2, &mut rng);
        let mut opts = SolverOptions::with_tolerance(1e-8).unwrap();
        opts.verify_residual = true;
        let (x, rep) = amen_solve(&a, &f, &constant(&modes), &opts).unwrap();
        assert!(rep.converged, "{modes:?}: {rep:?}");
        let tt_res = rep.true_residual.unwrap();
        let dense_res = dense_residual(&a, &f, &x);
        assert!(tt_res <= 1e-8, "{modes:?}: TT residual {tt_res:e}");
        assert!(dense_res <= 1e-8, "{modes:?}: dense residual {dense_res:e}");
        assert!((tt_res - dense_res).abs() <= 1e-10, "{tt_res:e} vs {dense_res:e}");
        let xd = dense_solve(&a, &f);
        let err: f64 = x.to_dense().unwrap().iter().zip(&xd).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-7 * xd.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
}

#[test]
fn consistent_system_recovers_known_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let modes = [4, 4, 4, 4];
    let a = perturbed_identity(&modes, 0.2, &mut rng);
    let y = TtVector::random(&modes, 3, &mut rng);
    let f = a.apply(&y).unwrap();
    let (x, rep) = amen_solve(&a, &f, &constant(&modes), &SolverOptions::with_tolerance(1e-9).unwrap()).unwrap();
    assert!(rep.converged);
    assert!(x.distance(&y).unwrap() <= 1e-7 * y.norm());
}

#[test]
fn enrichment_escapes_rank_stagnation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let modes = [4, 4, 4, 4];
    let a = perturbed_identity(&modes, 0.1, &mut rng);
    let f = TtVector::random(&modes, 3, &mut rng);
    let x0 = constant(&modes);
    let mut als = SolverOptions::with_tolerance(1e-8).unwrap();
    als.enrichment_rank = 0;
    als.max_sweeps = 6;
    let (x_als, rep_als) = amen_solve(&a, &f, &x0, &als).unwrap();
    assert!(!rep_als.converged);
    assert_eq!(x_als.max_rank(), 1);
    let amen = SolverOptions { enrichment_rank: 4, ..als };
    let (_, rep) = amen_solve(&a, &f, &x0, &amen).unwrap();
    assert!(rep.converged, "{rep:?}");
}

#[test]
fn zero_generator_keeps_state() {
    let model = SpinModel::from_spec(&common::xxx(3)).unwrap();
    let zero = model.drift.scaled(ZERO);
    let rho = build_pure_density_tt(&ProductStateSpec::single_up(3, 2)).unwrap();
    let grid = SpectralGrid::new(8, 0.01).unwrap();
    let step = tamen_step(&zero, &rho, &grid, &SolverOptions::default(), None).unwrap();
    assert!(step.state.distance(&rho).unwrap() <= 1e-10);
    assert!(step.error_estimate <= 1e-10);
}

#[test]
fn single_spin_coherence_rotates_analytically() {
    let c = 1.7;
    let tau = 0.05;
    let h = TtOperator::product(&[(2, vec![C64::new(c, 0.0), ZERO, ZERO, C64::new(-c, 0.0)])]).unwrap();
    let hsup = lift_superoperator(&h).unwrap();
    let plus = TtVector::product(&[vec![C64::new(0.5, 0.0); 4]]);
    let grid = SpectralGrid::new(8, tau).unwrap();
    let step = tamen_step(&hsup, &plus, &grid, &SolverOptions::with_tolerance(1e-11).unwrap(), None).unwrap();
    let got = step.state.to_dense().unwrap();
    let phase = C64::new(0.0, -2.0 * c * tau).exp();
    let exact = [C64::new(0.5, 0.0), 0.5 * phase, 0.5 * phase.conj(), C64::new(0.5, 0.0)];
    for (g, e) in got.iter().zip(&exact) {
        assert!((g - e).norm() <= 1e-8, "{g} vs {e}");
    }
}

#[test]
fn interval_step_matches_expm_at_five_spins() {
    let spec = common::xxx(5);
    let model = SpinModel::from_spec(&spec).unwrap();
    let dense = DenseModel::from_spec(&spec).unwrap();
    let init = ProductStateSpec::single_up(5, 1);
    let rho0 = build_pure_density_tt(&init).unwrap();
    let grid = SpectralGrid::new(8, 0.01).unwrap();
    let c = common::amplitudes(1, 1, 5.0, 14).remove(0);
    let step = tamen_step(&model.generator(&c).unwrap(), &rho0, &grid, &SolverOptions::default(), None).unwrap();
    let exact = oracle::dense_propagate(&[dense.hamiltonian(&c)], &common::pure(&init), 0.01).pop().unwrap();
    assert!(common::rel_err(&common::dense(&step.state), &exact) <= 1e-5);
}

#[test]
fn propagation_of_zero_generators_is_stationary() {
    let model = SpinModel::from_spec(&common::xxx(3)).unwrap();
    let zero = model.drift.scaled(ZERO);
    let rho = build_pure_density_tt(&ProductStateSpec::single_up(3, 1)).unwrap();
    let grid = SpectralGrid::new(4, 0.1).unwrap();
    let out = propagate(&vec![zero; 4], &rho, &grid, &SolverOptions::default()).unwrap();
    assert_eq!(out.len(), 4);
    for s in &out {
        assert!(s.distance(&rho).unwrap() <= 1e-10);
    }
}

#[test]
fn single_interval_propagation_equals_one_step() {
    let model = SpinModel::from_spec(&common::xxx(3)).unwrap();
    let h = model.generator(&[0.4]).unwrap();
    let rho = build_pure_density_tt(&ProductStateSpec::single_up(3, 1)).unwrap();
    let grid = SpectralGrid::new(8, 0.01).unwrap();
    let opts = SolverOptions::default();
    let out = propagate(std::slice::from_ref(&h), &rho, &grid, &opts).unwrap();
    let step = tamen_step(&h, &rho, &grid, &opts, None).unwrap();
    assert_eq!(out.len(), 1);
    assert!(out[0].distance(&step.state).unwrap() <= 1e-14);
}

#[test]
fn propagation_matches_propagator_product() {
    let spec = common::xxx(4);
    let model = SpinModel::from_spec(&spec).unwrap();
    let dense = DenseModel::from_spec(&spec).unwrap();
    let init = ProductStateSpec::single_up(4, 1);
    let amps = common::amplitudes(10, 1, 5.0, 15);
    let hs: Vec<_> = amps.iter().map(|c| model.generator(c).unwrap()).collect();
    let grid = SpectralGrid::new(8, 0.01).unwrap();
    let out = propagate(&hs, &build_pure_density_tt(&init).unwrap(), &grid, &SolverOptions::default()).unwrap();
    let exact = oracle::dense_propagate(&dense.hamiltonians(&amps), &common::pure(&init), 0.01);
    for (n, (got, want)) in out.iter().zip(&exact).enumerate() {
        assert!(common::rel_err(&common::dense(got), want) <= 1e-5, "interval {n}");
    }
}

#[test]
fn empty_or_failing_propagation_reports() {
    let rho = build_pure_density_tt(&ProductStateSpec::single_up(3, 1)).unwrap();
    let grid = SpectralGrid::new(8, 0.01).unwrap();
    assert!(matches!(propagate(&[], &rho, &grid, &SolverOptions::default()), Err(Error::InvalidArgument(_))));

    let model = SpinModel::from_spec(&common::xxx(3)).unwrap();
    let h = model.generator(&[0.0]).unwrap();
    let mut opts = SolverOptions::with_tolerance(1e-12).unwrap();
    opts.max_sweeps = 1;
    opts.enrichment_rank = 0;
    match propagate(&[h.clone(), h], &rho, &grid, &opts) {
        Err(Error::Propagation { interval, partial, .. }) => assert_eq!(partial.len(), interval),
        Ok(_) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn trajectories_conserve_norm_trace_and_hermiticity() {
    let model = SpinModel::from_spec(&common::xxx(4)).unwrap();
    let rho0 = build_pure_density_tt(&ProductStateSpec::single_up(4, 1)).unwrap();
    let hs: Vec<_> = common::amplitudes(30, 1, 5.0, 16).iter().map(|c| model.generator(c).unwrap()).collect();
    let grid = SpectralGrid::new(8, 0.01).unwrap();
    let out = propagate(&hs, &rho0, &grid, &SolverOptions::default()).unwrap();
    let (n0, t0) = (rho0.norm(), trace(&rho0).unwrap());
    for rho in &out {
        assert!((rho.norm() - n0).abs() <= 1e-6 * n0);
        assert!((trace(rho).unwrap() - t0).norm() <= 1e-8);
        let herm = rho.distance(&hermitian_conjugate(rho).unwrap()).unwrap();
        assert!(herm <= 1e-6 * rho.norm(), "{herm:e}");
    }
}

#[test]
fn endpoint_error_falls_with_collocation_order() {
    let spec = common::xxx(3);
    let model = SpinModel::from_spec(&spec).unwrap();
    let dense = DenseModel::from_spec(&spec).unwrap();
    let init = ProductStateSpec::single_up(3, 1);
    let tau = 0.01;
    let exact = oracle::dense_propagate(&[dense.hamiltonian(&[1.0])], &common::pure(&init), tau).pop().unwrap();
    let opts = SolverOptions::with_tolerance(1e-12).unwrap();
    let errors: Vec<f64> = (2..=6)
        .map(|m| {
            let grid = SpectralGrid::new(m, tau).unwrap();
            let step = tamen_step(&model.generator(&[1.0]).unwrap(), &build_pure_density_tt(&init).unwrap(), &grid, &opts, None)
                .unwrap();
            common::rel_err(&common::dense(&step.state), &exact)
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}
