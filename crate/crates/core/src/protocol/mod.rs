//! Blackboard protocols.
//!
//! Players take turns writing messages on a shared board. A [`ProtocolSpec`]
//! lists, for every reachable board prefix and every value of the speaker's
//! input bit, the distribution of the next message. Costs are counted with a
//! fixed-length code per message.

mod clean;
mod disj;
mod ignoring;
mod spec;

pub use clean::{clean_simulate, CleanPlayerState, CleanProtocol, CleanStep};
pub use disj::{
    binomial, deterministic_cost_bound, deterministic_disj_protocol, epsilon_publish_protocol,
    epsilon_publish_yes_failure, pigeonhole_promise_protocol, DeterministicPublish, DisjProtocol,
    DisjRun, EpsilonPublish, PigeonholePromise, MAX_PROTOCOL_UNIVERSE,
};
pub use ignoring::{
    find_ignoring_set, gamma, ignoring_bound, mean_rate, IgnoringSet, MAX_EXHAUSTIVE_PLAYERS,
};
pub use spec::{ProtocolSpec, Round, Transcript, Utterance, MAX_TRANSCRIPTS};

use crate::distributions::DistributionError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid protocol: {0}")]
    InvalidSpec(String),
    #[error(
        "no message distribution for round {round} after prefix {prefix:?} with input bit {bit}"
    )]
    Incomplete {
        round: usize,
        prefix: Vec<u64>,
        bit: bool,
    },
    #[error("no output for final transcript {0:?}")]
    MissingOutput(Vec<u64>),
    #[error("expected {expected} input bits, got {got}")]
    WrongInputCount { expected: usize, got: usize },
    #[error("transcript space of size {size} exceeds the enumeration limit {limit}")]
    StateSpaceOverflow { size: u128, limit: u128 },
    #[error("{players} players exceed the limit {limit} of exhaustive search")]
    TooManyPlayers { players: usize, limit: usize },
    #[error("clean simulation invariant broken: {0}")]
    CleanInvariant(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}
