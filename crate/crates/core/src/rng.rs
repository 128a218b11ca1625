//! Counter-based randomness.
//!
//! Every random choice made by a protocol participant is drawn from a ChaCha
//! stream keyed by `(seed, player, round)`, so a run can be replayed exactly
//! and any single player's coins can be regenerated without replaying the
//! others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for `player`'s coins in `round` of a run seeded with `seed`.
pub fn keyed_rng(seed: u64, player: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(player);
    // 2^32 words per round is far more than any single round consumes.
    rng.set_word_pos((round as u128) << 32);
    rng
}

/// Plain seeded generator for instance and stream generation.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
