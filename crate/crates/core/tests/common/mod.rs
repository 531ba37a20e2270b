#![allow(dead_code)]

use std::f64::consts::PI;

use ttgrape_core::oracle::{self, DenseMatrix};
use ttgrape_core::{ProductStateSpec, SpinChainSpec, TtVector};

/// Isotropic chain with the σz control on the first site.
pub fn xxx(sites: usize) -> SpinChainSpec {
    SpinChainSpec::xxx(sites, 2.0 * PI)
}

pub fn dense(rho: &TtVector) -> DenseMatrix {
    oracle::tt_order_to_density(&rho.to_dense().unwrap()).unwrap()
}

pub fn pure(spec: &ProductStateSpec) -> DenseMatrix {
    oracle::pure_density(&oracle::product_state(spec))
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm_l2() / b.norm_l2()
}

/// Deterministic pseudo-random amplitudes in `[−scale, scale]`.
pub fn amplitudes(intervals: usize, controls: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..intervals).map(|_| (0..controls).map(|_| rng.gen_range(-scale..=scale)).collect()).collect()
}
