//! Seed derivation.
//!
//! One master seed fans out into one child seed per repetition, and each child
//! seed into one ChaCha stream per agent. Population-level draws (such as
//! heterogeneous learning rates) use a reserved stream so that they never
//! shift an agent's own sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the simulator.
pub type AgentRng = ChaCha8Rng;

/// Stream id reserved for population-level parameter draws.
pub const POPULATION_STREAM: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for repetition `rep` of a batch started from `master`.
pub fn child_seed(master: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(rep.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// The stream owned by agent `index` within a run seeded with `seed`.
pub fn agent_rng(seed: u64, index: usize) -> AgentRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// The stream for population-level draws within a run seeded with `seed`.
pub fn population_rng(seed: u64) -> AgentRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POPULATION_STREAM);
    rng
}
