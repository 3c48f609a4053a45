//! Named random substreams derived from one experiment seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a random stream; each gets an independent sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Population,
    Beliefs,
    Signals,
    Jitter,
    Posterior,
    BanditTies,
    Planning,
    Oracle,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Population => 0x706f_7075,
            Stream::Beliefs => 0x6265_6c69,
            Stream::Signals => 0x7369_676e,
            Stream::Jitter => 0x6a69_7474,
            Stream::Posterior => 0x706f_7374,
            Stream::BanditTies => 0x7469_6573,
            Stream::Planning => 0x706c_616e,
            Stream::Oracle => 0x6f72_6163,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` at the coordinates `path` (batch, timestep, agent, ...).
pub fn derive_seed(seed: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(stream.tag()));
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn substream(seed: u64, stream: Stream, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, path))
}
