//! Shared fixtures for the criterion benches.

use langevin_core::dynamics::{HyperParams, ParticleSystem};
use langevin_core::noise::NoiseStream;

/// `agents` points drawn uniformly from `[lo, hi]^dim`.
pub fn uniform_system(agents: usize, dim: usize, lo: f64, hi: f64, seed: u64) -> ParticleSystem {
    let mut s = NoiseStream::for_init(seed, 0);
    let flat = (0..agents * dim).map(|_| s.uniform(lo, hi)).collect();
    ParticleSystem::from_flat(dim, flat)
}

/// Camel-benchmark hyper-parameters with the given interaction strength.
pub fn camel_params(lambda: f64) -> HyperParams {
    HyperParams::builder()
        .beta(10.0)
        .lambda(lambda)
        .gamma(0.1)
        .epsilon(1.0)
        .outer_dt(0.01)
        .inner_steps(20)
        .agents(25)
        .iters(150)
        .build()
        .expect("valid preset")
}
