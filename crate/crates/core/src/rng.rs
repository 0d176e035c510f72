//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 generator seeded with the
//! run seed and a fixed stream id, so components never share a stream and
//! results are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids, one per stochastic component.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const KFOLD: u64 = 2;
    pub const WORD2VEC: u64 = 3;
    pub const LDA: u64 = 4;
    pub const SVM: u64 = 5;
    pub const FOREST: u64 = 6;
    pub const RECURRENT: u64 = 7;
    pub const SEARCH: u64 = 8;
    pub const SYNTH: u64 = 9;
    /// Per-tree forest streams start here: tree `i` uses `FOREST_TREE_BASE + i`.
    pub const FOREST_TREE_BASE: u64 = 1 << 32;
}

/// Generator for component `stream_id` under run seed `seed`.
pub fn seeded(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
