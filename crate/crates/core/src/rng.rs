//! Deterministic stream derivation for all randomness in the crate.
//!
//! Every consumer derives its own [`ChaCha8Rng`] from an experiment seed plus
//! a fixed stream tag and context values (epoch, client id, draw counter).
//! Streams are independent of execution order, which is what makes parallel
//! and serial federation runs bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags namespace the derived generators so that, e.g., client
/// selection and noise sampling never consume from the same stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Parameter initialization.
    Init,
    /// Per-epoch client selection.
    Select,
    /// Per-(epoch, client) local training: minibatch order and noise.
    Train,
    /// Synthetic-data fleet driver shared across sites.
    Driver,
    /// Synthetic-data per-site noise.
    Site,
    /// Scenario generation after training.
    Generate,
    /// k-means seeding.
    Kmeans,
    /// Copula sampling.
    Copula,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x01,
            Stream::Select => 0x02,
            Stream::Train => 0x03,
            Stream::Driver => 0x04,
            Stream::Site => 0x05,
            Stream::Generate => 0x06,
            Stream::Kmeans => 0x07,
            Stream::Copula => 0x08,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with a stream tag and context words into a single 64-bit key.
pub fn mix(seed: u64, stream: Stream, context: &[u64]) -> u64 {
    let mut state = seed;
    let mut acc = splitmix64(&mut state) ^ stream.tag().wrapping_mul(0xA076_1D64_78BD_642F);
    for &word in context {
        state ^= word.wrapping_mul(0xE703_7ED1_A0B4_28DB);
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// Derive an independent generator for `(seed, stream, context)`.
pub fn derive(seed: u64, stream: Stream, context: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream, context))
}

/// Stable 64-bit hash for strings (FNV-1a), used to fold site ids into
/// stream contexts without depending on `std`'s unstable hasher.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x1000_0000_01B3);
    }
    h
}
