//! Seeded, platform-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable that overrides any seed given on the command line.
pub const SEED_ENV: &str = "MAGBILL_SEED";

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `MAGBILL_SEED` when set and parseable, otherwise `fallback`.
pub fn seed_from_env(fallback: u64) -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(fallback)
}
