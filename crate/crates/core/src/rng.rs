use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream identifiers derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Electorate = 1,
    Slate = 2,
    VoterNoise = 3,
    CandidateNoise = 4,
}

/// A portable, reproducible generator for `(seed, stream)`.
pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
