//! Seeded random streams.
//!
//! Every randomized routine derives its generators from a master seed with
//! [`substream`]: the master seed keys a ChaCha8 generator and the stream
//! index selects one of its 2^64 independent streams. Work is split into
//! chunks with a fixed chunk-to-stream mapping, so results do not depend on
//! how many worker threads execute the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent generator number `stream` under `master`.
pub fn substream(master: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Derives a child master seed, for nesting (e.g. one seed per replication
/// whose generators are then split again).
pub fn child_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
