//! Deterministic random substreams.
//!
//! Every stochastic step of a simulation draws from its own ChaCha stream,
//! keyed by `(round, client, role)` under one master seed. Reordering or
//! parallelising the client work therefore never changes the draws.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// Client index used for server-side draws.
pub const SERVER: u64 = u64::MAX;

/// What a substream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    ModelInit = 1,
    LocalTraining = 2,
    Measurement = 3,
    Channel = 4,
    PilotNoise = 5,
    DataNoise = 6,
    PatternChooser = 7,
    Partition = 8,
    Validation = 9,
}

/// Derives independent streams from a master seed.
#[derive(Clone, Copy, Debug)]
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

    pub fn stream(&self, round: u64, client: u64, role: Role) -> SimRng {
        let mut rng = SimRng::seed_from_u64(self.master);
        let id = mix(mix(mix(round) ^ client.rotate_left(21)) ^ (role as u64).rotate_left(42));
        rng.set_stream(id);
        rng
    }
}

/// Seeds a stand-alone stream, for tests and one-off experiments.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

// splitmix64 finaliser
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
