//! Counter-based Gaussian noise streams.
//!
//! Every `(seed, run, lane)` triple maps to a disjoint slice of one ChaCha12
//! keystream: the key is derived from the master seed, the 64-bit stream id is
//! the run index and the lane (agent index, or the reserved init lane) selects
//! a `2^48`-word window of the block counter. Draws are consumed sequentially
//! within a lane, so per-step and per-inner-step draws never overlap and the
//! result does not depend on which thread advances which agent.
//!
//! Standard normals come from `rand_distr::StandardNormal` (ziggurat). The
//! sampler is fixed by the pinned `rand_distr` version; changing it changes
//! every trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

const LANE_BITS: u32 = 48;
/// Number of agent lanes per run. The last lane is reserved for initialization.
pub const MAX_LANES: u64 = 1 << (68 - LANE_BITS);
const INIT_LANE: u64 = MAX_LANES - 1;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// One independent substream of standard Gaussian draws.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha12Rng,
}

impl NoiseStream {
    fn at(seed: u64, run: u64, lane: u64) -> Self {
        assert!(lane < MAX_LANES, "lane {lane} out of range");
        let mut rng = ChaCha12Rng::from_seed(key_from_seed(seed));
        rng.set_stream(run);
        rng.set_word_pos(u128::from(lane) << LANE_BITS);
        Self { rng }
    }

    /// Substream owned by one agent of one run.
    pub fn for_agent(seed: u64, run: u64, agent: usize) -> Self {
        let lane = agent as u64;
        assert!(lane < INIT_LANE, "agent index {agent} exceeds lane capacity");
        Self::at(seed, run, lane)
    }

    /// Substream used to draw a run's initial configuration.
    pub fn for_init(seed: u64, run: u64) -> Self {
        Self::at(seed, run, INIT_LANE)
    }

    /// Per-agent streams `0..agents` for one run.
    pub fn agents(seed: u64, run: u64, agents: usize) -> Vec<Self> {
        (0..agents).map(|a| Self::for_agent(seed, run, a)).collect()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.rng.sample(StandardNormal);
        }
    }

    /// Uniform draw on `[lo, hi)`; returns `lo` exactly when `lo == hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u: f64 = self.rng.random();
        lo + (hi - lo) * u
    }
}
