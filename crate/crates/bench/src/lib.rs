//! Fixtures shared by the benchmarks.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttgrape_core::spin::build_pure_density_tt;
use ttgrape_core::{ProductStateSpec, PulseSequence, SpinChainSpec, SpinModel, TtVector};

/// Isotropic chain at `J = 2π` with a σz control on the first spin, and the
/// end-to-end transfer states.
pub struct Transfer {
    pub model: SpinModel,
    pub initial: TtVector,
    pub target: TtVector,
}

impl Transfer {
    pub fn new(sites: usize) -> Self {
        Self {
            model: SpinModel::from_spec(&SpinChainSpec::xxx(sites, TAU)).expect("valid chain"),
            initial: build_pure_density_tt(&ProductStateSpec::single_up(sites, 1)).expect("valid state"),
            target: build_pure_density_tt(&ProductStateSpec::single_up(sites, sites)).expect("valid state"),
        }
    }
}

pub fn random_pulse(intervals: usize, tau: f64, seed: u64) -> PulseSequence {
    PulseSequence::random(intervals, 1, tau, 5.0, seed).expect("valid pulse")
}

pub fn random_tt(modes: &[usize], rank: usize, seed: u64) -> TtVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TtVector::random(modes, rank, &mut rng)
}
