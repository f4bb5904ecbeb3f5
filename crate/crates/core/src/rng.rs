//! Seeded randomness: one root seed fans out into independent substreams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream id reserved for market initialization draws.
pub const INIT_STREAM: u64 = 0;

/// Substream used by the agent with the given uid (uids start at 0).
pub fn agent_stream(agent_uid: u64) -> u64 {
    agent_uid + 1
}

/// Derives an independent generator for `stream` from the root seed.
///
/// Every consumer draws from its own stream, so the number of draws one
/// agent makes never perturbs another agent's sequence.
pub fn substream(root_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&root_seed.to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(seed);
    rng.set_stream(stream);
    rng
}
