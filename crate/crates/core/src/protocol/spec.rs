use super::ProtocolError;
use crate::ceil_log2;
use crate::distributions::FiniteDistribution;
use crate::rng::keyed_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Largest transcript space that exact enumeration accepts.
pub const MAX_TRANSCRIPTS: u128 = 1 << 20;

/// One turn of the schedule: who speaks and how many messages are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub speaker: usize,
    pub alphabet: u64,
}

/// One message written on the board.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub player: usize,
    pub message: u128,
    pub alphabet: u128,
}

impl Utterance {
    pub fn bits(&self) -> u64 {
        ceil_log2(self.alphabet)
    }
}

/// The board contents after a run, with its cost under fixed-length codes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Utterance>,
    pub bit_cost: u64,
    pub output: Option<bool>,
}

impl Transcript {
    pub fn push(&mut self, player: usize, message: u128, alphabet: u128) {
        debug_assert!(message < alphabet.max(1));
        let u = Utterance {
            player,
            message,
            alphabet,
        };
        self.bit_cost += u.bits();
        self.messages.push(u);
    }

    /// Bits written by each of `players` players.
    pub fn bits_by_player(&self, players: usize) -> Vec<u64> {
        let mut bits = vec![0u64; players];
        for u in &self.messages {
            bits[u.player] += u.bits();
        }
        bits
    }

    /// Message values only, for table-driven protocols.
    pub fn values(&self) -> Vec<u64> {
        self.messages.iter().map(|u| u.message as u64).collect()
    }
}

/// A finite blackboard protocol given by explicit message tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct ProtocolSpec {
    players: usize,
    rounds: Vec<Round>,
    table: BTreeMap<(Vec<u64>, bool), FiniteDistribution>,
    outputs: BTreeMap<Vec<u64>, bool>,
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    players: usize,
    rounds: Vec<Round>,
    messages: Vec<TableEntry>,
    outputs: Vec<OutputEntry>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    prefix: Vec<u64>,
    bit: u8,
    distribution: FiniteDistribution,
}

#[derive(Serialize, Deserialize)]
struct OutputEntry {
    transcript: Vec<u64>,
    output: u8,
}

impl From<ProtocolSpec> for SpecJson {
    fn from(spec: ProtocolSpec) -> Self {
        SpecJson {
            players: spec.players,
            rounds: spec.rounds,
            messages: spec
                .table
                .into_iter()
                .map(|((prefix, bit), distribution)| TableEntry {
                    prefix,
                    bit: bit as u8,
                    distribution,
                })
                .collect(),
            outputs: spec
                .outputs
                .into_iter()
                .map(|(transcript, out)| OutputEntry {
                    transcript,
                    output: out as u8,
                })
                .collect(),
        }
    }
}

impl TryFrom<SpecJson> for ProtocolSpec {
    type Error = ProtocolError;
    fn try_from(json: SpecJson) -> Result<Self, Self::Error> {
        let mut spec = ProtocolSpec::new(json.players, json.rounds)?;
        let bit = |b: u8| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(ProtocolError::InvalidSpec(format!(
                "bit must be 0 or 1, got {b}"
            ))),
        };
        for e in json.messages {
            spec.set_message(e.prefix, bit(e.bit)?, e.distribution)?;
        }
        for o in json.outputs {
            spec.set_output(o.transcript, bit(o.output)?)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl ProtocolSpec {
    pub fn new(players: usize, rounds: Vec<Round>) -> Result<Self, ProtocolError> {
        if players == 0 || players > 64 {
            return Err(ProtocolError::InvalidSpec(format!(
                "player count {players} must be in 1..=64"
            )));
        }
        for (r, round) in rounds.iter().enumerate() {
            if round.speaker >= players {
                return Err(ProtocolError::InvalidSpec(format!(
                    "round {r} speaker {} is not a player",
                    round.speaker
                )));
            }
            if round.alphabet == 0 {
                return Err(ProtocolError::InvalidSpec(format!(
                    "round {r} has an empty alphabet"
                )));
            }
        }
        Ok(ProtocolSpec {
            players,
            rounds,
            table: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    /// Fills every reachable table entry from `message(prefix, bit)` and
    /// every reachable output from `output(transcript)`.
    pub fn from_fn(
        players: usize,
        rounds: Vec<Round>,
        mut message: impl FnMut(&[u64], bool) -> FiniteDistribution,
        mut output: impl FnMut(&[u64]) -> bool,
    ) -> Result<Self, ProtocolError> {
        let mut spec = ProtocolSpec::new(players, rounds)?;
        let mut stack = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == spec.rounds.len() {
                let out = output(&prefix);
                spec.set_output(prefix, out)?;
                continue;
            }
            let mut next = BTreeSet::new();
            for bit in [false, true] {
                let d = message(&prefix, bit);
                next.extend(d.support());
                spec.set_message(prefix.clone(), bit, d)?;
            }
            for m in next {
                let mut child = prefix.clone();
                child.push(m);
                stack.push(child);
            }
        }
        Ok(spec)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    fn check_prefix(&self, prefix: &[u64]) -> Result<(), ProtocolError> {
        for (r, &m) in prefix.iter().enumerate() {
            if m >= self.rounds[r].alphabet {
                return Err(ProtocolError::InvalidSpec(format!(
                    "message {m} in round {r} exceeds alphabet {}",
                    self.rounds[r].alphabet
                )));
            }
        }
        Ok(())
    }

    pub fn set_message(
        &mut self,
        prefix: Vec<u64>,
        bit: bool,
        dist: FiniteDistribution,
    ) -> Result<(), ProtocolError> {
        let r = prefix.len();
        if r >= self.rounds.len() {
            return Err(ProtocolError::InvalidSpec(format!(
                "prefix of length {r} has no next round"
            )));
        }
        self.check_prefix(&prefix)?;
        if let Some(bad) = dist
            .support()
            .into_iter()
            .find(|&m| m >= self.rounds[r].alphabet)
        {
            return Err(ProtocolError::InvalidSpec(format!(
                "message {bad} in round {r} exceeds alphabet {}",
                self.rounds[r].alphabet
            )));
        }
        self.table.insert((prefix, bit), dist);
        Ok(())
    }

    pub fn set_output(&mut self, transcript: Vec<u64>, out: bool) -> Result<(), ProtocolError> {
        if transcript.len() != self.rounds.len() {
            return Err(ProtocolError::InvalidSpec(format!(
                "output transcript has {} messages, schedule has {}",
                transcript.len(),
                self.rounds.len()
            )));
        }
        self.check_prefix(&transcript)?;
        self.outputs.insert(transcript, out);
        Ok(())
    }

    pub fn message(&self, prefix: &[u64], bit: bool) -> Result<&FiniteDistribution, ProtocolError> {
        self.table
            .get(&(prefix.to_vec(), bit))
            .ok_or_else(|| ProtocolError::Incomplete {
                round: prefix.len(),
                prefix: prefix.to_vec(),
                bit,
            })
    }

    pub fn output(&self, transcript: &[u64]) -> Result<bool, ProtocolError> {
        self.outputs
            .get(transcript)
            .copied()
            .ok_or_else(|| ProtocolError::MissingOutput(transcript.to_vec()))
    }

    /// Checks that every prefix reachable under some input has entries for
    /// both bits and every reachable transcript has an output.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let mut stack = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == self.rounds.len() {
                self.output(&prefix)?;
                continue;
            }
            let mut next = BTreeSet::new();
            for bit in [false, true] {
                next.extend(self.message(&prefix, bit)?.support());
            }
            for m in next {
                let mut child = prefix.clone();
                child.push(m);
                stack.push(child);
            }
        }
        Ok(())
    }

    /// Number of distinct full transcripts allowed by the alphabets.
    pub fn transcript_space(&self) -> u128 {
        self.rounds
            .iter()
            .try_fold(1u128, |acc, r| acc.checked_mul(r.alphabet as u128))
            .unwrap_or(u128::MAX)
    }

    /// Mixed-radix code of a full transcript.
    pub fn encode(&self, transcript: &[u64]) -> u64 {
        let mut code = 0u64;
        for (r, &m) in transcript.iter().enumerate().rev() {
            code = code * self.rounds[r].alphabet + m;
        }
        code
    }

    pub fn decode(&self, mut code: u64) -> Vec<u64> {
        self.rounds
            .iter()
            .map(|r| {
                let m = code % r.alphabet;
                code /= r.alphabet;
                m
            })
            .collect()
    }

    /// Bits of a full run, identical for every transcript.
    pub fn bit_cost(&self) -> u64 {
        self.rounds
            .iter()
            .map(|r| ceil_log2(r.alphabet as u128))
            .sum()
    }

    pub(crate) fn check_inputs(&self, inputs: &[bool]) -> Result<(), ProtocolError> {
        if inputs.len() != self.players {
            return Err(ProtocolError::WrongInputCount {
                expected: self.players,
                got: inputs.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_space(&self) -> Result<(), ProtocolError> {
        let size = self.transcript_space();
        if size > MAX_TRANSCRIPTS {
            return Err(ProtocolError::StateSpaceOverflow {
                size,
                limit: MAX_TRANSCRIPTS,
            });
        }
        Ok(())
    }

    /// Samples a run. The speaker of round `r` draws from the stream keyed
    /// by `(seed, speaker, r)`.
    pub fn run(&self, inputs: &[bool], seed: u64) -> Result<Transcript, ProtocolError> {
        self.check_inputs(inputs)?;
        let mut transcript = Transcript::default();
        let mut prefix = Vec::with_capacity(self.rounds.len());
        for (r, round) in self.rounds.iter().enumerate() {
            let dist = self.message(&prefix, inputs[round.speaker])?;
            let mut rng = keyed_rng(seed, round.speaker as u64, r as u64);
            let m = dist.sample(rng.random::<f64>());
            transcript.push(round.speaker, m as u128, round.alphabet as u128);
            prefix.push(m);
        }
        transcript.output = Some(self.output(&prefix)?);
        Ok(transcript)
    }

    /// Exact distribution of the transcript (atoms are [`encode`](Self::encode)
    /// codes) when player `j` holds `inputs[j]`.
    pub fn transcript_distribution(
        &self,
        inputs: &[bool],
    ) -> Result<FiniteDistribution, ProtocolError> {
        self.check_inputs(inputs)?;
        self.check_space()?;
        let mut out = BTreeMap::new();
        let mut stack = vec![(Vec::new(), 1.0f64)];
        while let Some((prefix, prob)) = stack.pop() {
            if prefix.len() == self.rounds.len() {
                *out.entry(self.encode(&prefix)).or_insert(0.0) += prob;
                continue;
            }
            let speaker = self.rounds[prefix.len()].speaker;
            for (m, p) in self.message(&prefix, inputs[speaker])?.iter() {
                let mut child = prefix.clone();
                child.push(m);
                stack.push((child, prob * p));
            }
        }
        Ok(FiniteDistribution::from_weights(out))
    }

    /// Probability that the protocol outputs 1 on `inputs`.
    pub fn output_probability(&self, inputs: &[bool]) -> Result<f64, ProtocolError> {
        let dist = self.transcript_distribution(inputs)?;
        let mut total = 0.0;
        for (code, p) in dist.iter() {
            if self.output(&self.decode(code))? {
                total += p;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::tv_distance;

    fn point(m: u64) -> FiniteDistribution {
        FiniteDistribution::point(m)
    }

    #[test]
    fn one_player_announces_its_bit() {
        let spec = ProtocolSpec::from_fn(
            1,
            vec![Round {
                speaker: 0,
                alphabet: 2,
            }],
            |_, b| point(b as u64),
            |t| t[0] == 1,
        )
        .unwrap();
        let t = spec.run(&[true], 5).unwrap();
        assert_eq!(t.messages.len(), 1);
        assert_eq!(t.bit_cost, 1);
        assert_eq!(t.output, Some(true));
        assert_eq!(spec.transcript_distribution(&[false]).unwrap(), point(0));
    }

    #[test]
    fn publish_with_probability_half() {
        // alphabet {0, 1, ⊥ = 2}
        let spec = ProtocolSpec::from_fn(
            1,
            vec![Round {
                speaker: 0,
                alphabet: 3,
            }],
            |_, b| FiniteDistribution::from_pairs([(b as u64, 0.5), (2, 0.5)]).unwrap(),
            |t| t[0] == 1,
        )
        .unwrap();
        let d = spec.transcript_distribution(&[true]).unwrap();
        assert_eq!(d.prob(1), 0.5);
        assert_eq!(d.prob(2), 0.5);
        assert_eq!(
            tv_distance(&d, &spec.transcript_distribution(&[false]).unwrap()),
            0.5
        );
    }

    #[test]
    fn runs_are_replayable() {
        let spec = ProtocolSpec::from_fn(
            2,
            vec![
                Round {
                    speaker: 0,
                    alphabet: 4,
                },
                Round {
                    speaker: 1,
                    alphabet: 4,
                },
            ],
            |p, b| {
                FiniteDistribution::uniform(
                    (0..4).filter(|&m| (m + p.len() as u64 + b as u64).is_multiple_of(2)),
                )
                .unwrap()
            },
            |t| t[0] > t[1],
        )
        .unwrap();
        for seed in 0..20 {
            assert_eq!(
                spec.run(&[true, false], seed).unwrap(),
                spec.run(&[true, false], seed).unwrap()
            );
        }
        assert!(spec.run(&[true], 0).is_err());
    }

    #[test]
    fn missing_entries_are_reported() {
        let mut spec = ProtocolSpec::new(
            1,
            vec![Round {
                speaker: 0,
                alphabet: 2,
            }],
        )
        .unwrap();
        spec.set_message(vec![], false, point(0)).unwrap();
        assert!(matches!(
            spec.run(&[true], 0),
            Err(ProtocolError::Incomplete { .. })
        ));
        assert!(matches!(
            spec.run(&[false], 0),
            Err(ProtocolError::MissingOutput(_))
        ));
        assert!(spec.validate().is_err());
        assert!(spec.set_message(vec![], true, point(2)).is_err());
    }

    #[test]
    fn encode_decode_and_json() {
        let spec = ProtocolSpec::from_fn(
            2,
            vec![
                Round {
                    speaker: 1,
                    alphabet: 3,
                },
                Round {
                    speaker: 0,
                    alphabet: 5,
                },
            ],
            |p, b| point((p.len() as u64 + b as u64) % 3),
            |t| t[1] == 2,
        )
        .unwrap();
        assert_eq!(spec.decode(spec.encode(&[2, 4])), vec![2, 4]);
        assert_eq!(spec.bit_cost(), 5);
        let json = serde_json::to_string(&spec).unwrap();
        let back: ProtocolSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn enumeration_limit() {
        let rounds = vec![
            Round {
                speaker: 0,
                alphabet: 1 << 11,
            },
            Round {
                speaker: 0,
                alphabet: 1 << 10,
            },
        ];
        let spec = ProtocolSpec::new(1, rounds).unwrap();
        assert!(matches!(
            spec.transcript_distribution(&[false]),
            Err(ProtocolError::StateSpaceOverflow { .. })
        ));
    }
}
