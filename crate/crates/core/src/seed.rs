//! Deterministic seed hierarchy.
//!
//! A single master seed fans out into independent sub-seeds per purpose
//! (placement, shadowing, tasks, ...) and per index (episode, user, run).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named random streams derived from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Placement,
    Shadowing,
    Tasks,
    Blockage,
    NetworkInit,
    ActionSampling,
    Minibatch,
    Baseline,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Placement => 0x01,
            Stream::Shadowing => 0x02,
            Stream::Tasks => 0x03,
            Stream::Blockage => 0x04,
            Stream::NetworkInit => 0x05,
            Stream::ActionSampling => 0x06,
            Stream::Minibatch => 0x07,
            Stream::Baseline => 0x08,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Sub-seed for `stream` at position `index`.
    pub fn derive(&self, stream: Stream, index: u64) -> u64 {
        let a = splitmix64(self.master ^ stream.tag().rotate_left(56));
        splitmix64(a ^ splitmix64(index.wrapping_add(stream.tag())))
    }

    pub fn rng(&self, stream: Stream, index: u64) -> Rng {
        Rng::seed_from_u64(self.derive(stream, index))
    }
}
