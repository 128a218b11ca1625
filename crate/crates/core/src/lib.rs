//! Streaming sketches and multiparty communication tools built around the
//! Mostly Set Disjointness problem.
//!
//! Modules, bottom-up:
//!
//! * [`field`]: arithmetic in a 64-bit prime field, NTT, and chirp-z
//!   evaluation along geometric progressions.
//! * [`stream`]: frequency vectors, ±1 updates and the stream file formats.
//! * [`distributions`]: finite distributions, divergences and the
//!   common/disjoint decomposition used by clean protocol simulation.
//! * [`protocol`]: blackboard protocols, exact transcript enumeration, clean
//!   simulation, ignoring-set search and the MostlyDISJ protocols.
//! * [`disj`]: MostlyDISJ instances, the hard input distribution and promise
//!   checking.
//! * [`reductions`]: streams built from MostlyDISJ instances and the
//!   linear-sketch adversary.
//! * [`sketches`]: Misra–Gries and a reference CountSketch.
//! * [`sparse_recovery`]: exact S-sparse recovery by syndrome decoding.
//! * [`turnstile`]: deterministic ℓ₂ heavy hitters for bounded-length
//!   turnstile streams.
//! * [`lowrank`]: the sparse-row rank-1 hard instance and its checks.

pub mod disj;
pub mod distributions;
pub mod field;
pub mod lowrank;
pub mod protocol;
pub mod reductions;
pub mod rng;
pub mod sketches;
pub mod sparse_recovery;
pub mod stream;
pub mod turnstile;

pub use disj::{DisjInstance, HardDistSample, Label};
pub use distributions::{Decomposition, FiniteDistribution};
pub use stream::{FrequencyVector, StreamUpdate};

/// Bits needed to write one symbol of an alphabet of `size` symbols with a
/// fixed-length code.
pub fn ceil_log2(size: u128) -> u64 {
    if size <= 1 {
        0
    } else {
        (128 - (size - 1).leading_zeros()) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::ceil_log2;

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(ceil_log2(0), 0);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1 << 40), 40);
        assert_eq!(ceil_log2((1 << 40) + 1), 41);
    }
}
