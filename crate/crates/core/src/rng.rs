//! Counter-based random streams.
//!
//! A stream is a ChaCha8 keystream whose key comes from the user seed and whose
//! 64-bit stream id is a hash of a path of indices such as
//! `(domain, replicate, trial)`. Any task can rebuild its stream from the path alone,
//! so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains keep unrelated consumers of one seed apart.
pub mod domain {
    pub const SAMPLE: u64 = 0x5a;
    pub const PERMUTATION: u64 = 0x9e;
    pub const EXPERIMENT: u64 = 0x3c;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn path_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6a09_e667_f3bc_c908, |h, &x| splitmix(h ^ splitmix(x)))
}

/// A seed plus an index path; cheap to copy and extend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
    id: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            seed,
            id: path_id(&[]),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives the child family at `path` below this one.
    pub fn child(&self, path: &[u64]) -> Self {
        let mut full = Vec::with_capacity(path.len() + 1);
        full.push(self.id);
        full.extend_from_slice(path);
        Streams {
            seed: self.seed,
            id: path_id(&full),
        }
    }

    /// The generator for this node.
    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix(self.seed ^ ((i as u64) << 56)).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.id);
        rng
    }

    /// Shorthand for `self.child(path).rng()`.
    pub fn at(&self, path: &[u64]) -> StreamRng {
        self.child(path).rng()
    }
}
