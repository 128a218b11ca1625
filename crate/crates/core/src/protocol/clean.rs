use super::spec::{ProtocolSpec, Transcript};
use super::ProtocolError;
use crate::distributions::{decompose, FiniteDistribution};
use crate::rng::keyed_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// How a clean player speaks after one prefix.
///
/// A player who has not yet observed their bit observes it with probability
/// `delta`; unobserved players send from `common`, observed players send
/// from `zero_part` or `one_part` according to their bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanStep {
    pub delta: f64,
    pub common: FiniteDistribution,
    pub zero_part: FiniteDistribution,
    pub one_part: FiniteDistribution,
    /// Posterior probabilities `(p₀, p₁)` that the player has already
    /// observed, given the prefix and bit 0 or 1.
    pub prior: [f64; 2],
}

impl CleanStep {
    fn part(&self, bit: bool) -> &FiniteDistribution {
        if bit {
            &self.one_part
        } else {
            &self.zero_part
        }
    }
}

/// The clean behaviour of one player: a [`CleanStep`] for each prefix at
/// which they speak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanPlayerState {
    pub player: usize,
    pub steps: BTreeMap<Vec<u64>, CleanStep>,
}

/// Unnormalized probabilities of the player's own choices along a prefix,
/// split by whether they have observed: `[(unobserved, observed); 2]`
/// indexed by the input bit.
type HiddenWeights = [(f64, f64); 2];

fn posterior(w: &HiddenWeights) -> [f64; 2] {
    let p = |(u, o): (f64, f64)| if u + o > 0.0 { o / (u + o) } else { 0.0 };
    [p(w[0]), p(w[1])]
}

impl CleanPlayerState {
    fn build(spec: &ProtocolSpec, player: usize) -> Result<Self, ProtocolError> {
        let rounds = spec.rounds();
        let mut steps = BTreeMap::new();
        let mut stack: Vec<(Vec<u64>, HiddenWeights)> = vec![(Vec::new(), [(1.0, 0.0); 2])];
        while let Some((prefix, w)) = stack.pop() {
            let r = prefix.len();
            if r == rounds.len() {
                continue;
            }
            let round = rounds[r];
            let d0 = spec.message(&prefix, false)?;
            let d1 = spec.message(&prefix, true)?;
            if round.speaker != player {
                let next: BTreeSet<u64> = d0.support().into_iter().chain(d1.support()).collect();
                for m in next {
                    let mut child = prefix.clone();
                    child.push(m);
                    stack.push((child, w));
                }
                continue;
            }
            let prior = posterior(&w);
            let step = if prior[1] == 0.0 {
                let dec = decompose(d0, d1, prior[0])?;
                CleanStep {
                    delta: dec.delta,
                    common: dec.common,
                    zero_part: dec.zero_part,
                    one_part: dec.one_part,
                    prior,
                }
            } else if prior[0] == 0.0 {
                let dec = decompose(d1, d0, prior[1])?;
                CleanStep {
                    delta: dec.delta,
                    common: dec.common,
                    zero_part: dec.one_part,
                    one_part: dec.zero_part,
                    prior,
                }
            } else {
                return Err(ProtocolError::CleanInvariant(format!(
                    "player {player} may have observed either bit after prefix {prefix:?}"
                )));
            };
            let next: BTreeSet<u64> = step
                .common
                .support()
                .into_iter()
                .chain(step.zero_part.support())
                .chain(step.one_part.support())
                .filter(|&m| m < round.alphabet)
                .collect();
            for m in next {
                let mut cw = w;
                let mut live = false;
                for (b, (u, o)) in cw.iter_mut().enumerate() {
                    let part = step.part(b == 1).prob(m);
                    let nu = *u * (1.0 - step.delta) * step.common.prob(m);
                    let no = (*o + *u * step.delta) * part;
                    *u = nu;
                    *o = no;
                    live |= nu > 0.0 || no > 0.0;
                }
                if live {
                    let mut child = prefix.clone();
                    child.push(m);
                    stack.push((child, cw));
                }
            }
            steps.insert(prefix, step);
        }
        Ok(CleanPlayerState { player, steps })
    }

    pub fn step(&self, prefix: &[u64]) -> Result<&CleanStep, ProtocolError> {
        self.steps.get(prefix).ok_or_else(|| {
            ProtocolError::CleanInvariant(format!(
                "player {} has no clean step after {prefix:?}",
                self.player
            ))
        })
    }

    /// Posterior probabilities `(p₀(m), p₁(m))` that the player observed
    /// their bit, given the board `transcript` and bit 0 or 1.
    pub fn observation_posteriors(
        &self,
        spec: &ProtocolSpec,
        transcript: &[u64],
    ) -> Result<[f64; 2], ProtocolError> {
        let mut w: HiddenWeights = [(1.0, 0.0); 2];
        for (r, &m) in transcript.iter().enumerate() {
            if spec.rounds()[r].speaker != self.player {
                continue;
            }
            let step = self.step(&transcript[..r])?;
            for (b, (u, o)) in w.iter_mut().enumerate() {
                let part = step.part(b == 1).prob(m);
                let nu = *u * (1.0 - step.delta) * step.common.prob(m);
                *o = (*o + *u * step.delta) * part;
                *u = nu;
            }
        }
        Ok(posterior(&w))
    }
}

/// A protocol in which some players have been replaced by their clean
/// simulations. Players without a clean state behave as in the base spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanProtocol {
    base: ProtocolSpec,
    clean: BTreeMap<usize, CleanPlayerState>,
}

/// `spec` with `player` replaced by a clean simulation.
pub fn clean_simulate(spec: &ProtocolSpec, player: usize) -> Result<CleanProtocol, ProtocolError> {
    CleanProtocol::new(spec.clone())?.make_clean(player)
}

impl CleanProtocol {
    pub fn new(base: ProtocolSpec) -> Result<Self, ProtocolError> {
        base.validate()?;
        Ok(CleanProtocol {
            base,
            clean: BTreeMap::new(),
        })
    }

    /// Also makes `player` clean. Each clean player keeps independent coins.
    pub fn make_clean(mut self, player: usize) -> Result<Self, ProtocolError> {
        if player >= self.base.players() {
            return Err(ProtocolError::InvalidParameters(format!(
                "player {player} does not exist"
            )));
        }
        let state = CleanPlayerState::build(&self.base, player)?;
        self.clean.insert(player, state);
        Ok(self)
    }

    /// Every player clean.
    pub fn all_clean(base: ProtocolSpec) -> Result<Self, ProtocolError> {
        let players = base.players();
        (0..players).try_fold(Self::new(base)?, |acc, j| acc.make_clean(j))
    }

    pub fn base(&self) -> &ProtocolSpec {
        &self.base
    }

    pub fn player_state(&self, player: usize) -> Option<&CleanPlayerState> {
        self.clean.get(&player)
    }

    /// Exact joint distribution of `(transcript code, observed mask)`, where
    /// bit `j` of the mask is set when clean player `j` observed their input.
    pub fn joint_distribution(
        &self,
        inputs: &[bool],
    ) -> Result<BTreeMap<(u64, u64), f64>, ProtocolError> {
        self.base.check_inputs(inputs)?;
        self.base.check_space()?;
        let rounds = self.base.rounds();
        let mut out = BTreeMap::new();
        let mut stack: Vec<(Vec<u64>, u64, f64)> = vec![(Vec::new(), 0, 1.0)];
        while let Some((prefix, mask, prob)) = stack.pop() {
            if prefix.len() == rounds.len() {
                *out.entry((self.base.encode(&prefix), mask)).or_insert(0.0) += prob;
                continue;
            }
            let speaker = rounds[prefix.len()].speaker;
            let bit = inputs[speaker];
            let mut push = |m: u64, mask: u64, p: f64| {
                if p > 0.0 {
                    let mut child = prefix.clone();
                    child.push(m);
                    stack.push((child, mask, prob * p));
                }
            };
            match self.clean.get(&speaker) {
                None => {
                    for (m, p) in self.base.message(&prefix, bit)?.iter() {
                        push(m, mask, p);
                    }
                }
                Some(state) => {
                    let step = state.step(&prefix)?;
                    let flag = 1u64 << speaker;
                    if mask & flag != 0 {
                        for (m, p) in step.part(bit).iter() {
                            push(m, mask, p);
                        }
                    } else {
                        for (m, p) in step.common.iter() {
                            push(m, mask, (1.0 - step.delta) * p);
                        }
                        for (m, p) in step.part(bit).iter() {
                            push(m, mask | flag, step.delta * p);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn transcript_distribution(
        &self,
        inputs: &[bool],
    ) -> Result<FiniteDistribution, ProtocolError> {
        let mut marginal = BTreeMap::new();
        for ((code, _), p) in self.joint_distribution(inputs)? {
            *marginal.entry(code).or_insert(0.0) += p;
        }
        Ok(FiniteDistribution::from_weights(marginal))
    }

    /// Probability that `player` observes their input when player `j` holds
    /// `inputs[j]`.
    pub fn observation_probability_with(
        &self,
        player: usize,
        inputs: &[bool],
    ) -> Result<f64, ProtocolError> {
        if !self.clean.contains_key(&player) {
            return Err(ProtocolError::InvalidParameters(format!(
                "player {player} is not clean"
            )));
        }
        let flag = 1u64 << player;
        Ok(self
            .joint_distribution(inputs)?
            .into_iter()
            .filter(|((_, mask), _)| mask & flag != 0)
            .map(|(_, p)| p)
            .sum())
    }

    /// Observation probability of `player` when every input is 0.
    pub fn observation_probability(&self, player: usize) -> Result<f64, ProtocolError> {
        self.observation_probability_with(player, &vec![false; self.base.players()])
    }

    /// Probability that at least one player in `players` observes.
    pub fn any_observation_probability(
        &self,
        players: &[usize],
        inputs: &[bool],
    ) -> Result<f64, ProtocolError> {
        let mut flags = 0u64;
        for &j in players {
            if !self.clean.contains_key(&j) {
                return Err(ProtocolError::InvalidParameters(format!(
                    "player {j} is not clean"
                )));
            }
            flags |= 1 << j;
        }
        Ok(self
            .joint_distribution(inputs)?
            .into_iter()
            .filter(|((_, mask), _)| mask & flags != 0)
            .map(|(_, p)| p)
            .sum())
    }

    /// Samples a run, returning the transcript and the clean players who
    /// observed their input.
    pub fn run(
        &self,
        inputs: &[bool],
        seed: u64,
    ) -> Result<(Transcript, Vec<usize>), ProtocolError> {
        self.base.check_inputs(inputs)?;
        let mut transcript = Transcript::default();
        let mut prefix = Vec::new();
        let mut observed = BTreeSet::new();
        for (r, round) in self.base.rounds().iter().enumerate() {
            let s = round.speaker;
            let mut rng = keyed_rng(seed, s as u64, r as u64);
            let m = match self.clean.get(&s) {
                None => self.base.message(&prefix, inputs[s])?.sample(rng.random()),
                Some(state) => {
                    let step = state.step(&prefix)?;
                    if !observed.contains(&s) && rng.random::<f64>() < step.delta {
                        observed.insert(s);
                    }
                    let u = rng.random::<f64>();
                    if observed.contains(&s) {
                        step.part(inputs[s]).sample(u)
                    } else {
                        step.common.sample(u)
                    }
                }
            };
            transcript.push(s, m as u128, round.alphabet as u128);
            prefix.push(m);
        }
        transcript.output = Some(self.base.output(&prefix)?);
        Ok((transcript, observed.into_iter().collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::tv_distance;
    use crate::protocol::spec::Round;

    fn one_round(d0: FiniteDistribution, d1: FiniteDistribution) -> ProtocolSpec {
        ProtocolSpec::from_fn(
            1,
            vec![Round {
                speaker: 0,
                alphabet: 4,
            }],
            move |_, b| if b { d1.clone() } else { d0.clone() },
            |t| t[0] == 0,
        )
        .unwrap()
    }

    #[test]
    fn one_round_observation_is_tv() {
        let d0 = FiniteDistribution::from_pairs([(0, 0.5), (1, 0.3), (2, 0.2)]).unwrap();
        let d1 = FiniteDistribution::from_pairs([(0, 0.1), (1, 0.3), (3, 0.6)]).unwrap();
        let spec = one_round(d0.clone(), d1.clone());
        let clean = clean_simulate(&spec, 0).unwrap();
        let p = clean.observation_probability(0).unwrap();
        assert!((p - tv_distance(&d0, &d1)).abs() < 1e-12);
        for bit in [false, true] {
            let a = spec.transcript_distribution(&[bit]).unwrap();
            let b = clean.transcript_distribution(&[bit]).unwrap();
            assert!(tv_distance(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn ignoring_player_never_observes() {
        let d = FiniteDistribution::from_pairs([(0, 0.5), (1, 0.5)]).unwrap();
        let spec = one_round(d.clone(), d);
        let clean = clean_simulate(&spec, 0).unwrap();
        assert_eq!(clean.observation_probability(0).unwrap(), 0.0);
    }

    #[test]
    fn two_rounds_same_player() {
        // Player 0 speaks twice; second message depends on the first.
        let spec = ProtocolSpec::from_fn(
            1,
            vec![
                Round {
                    speaker: 0,
                    alphabet: 3,
                },
                Round {
                    speaker: 0,
                    alphabet: 3,
                },
            ],
            |p, b| match (p.len(), b) {
                (0, false) => FiniteDistribution::from_pairs([(0, 0.6), (1, 0.4)]).unwrap(),
                (0, true) => {
                    FiniteDistribution::from_pairs([(0, 0.3), (1, 0.5), (2, 0.2)]).unwrap()
                }
                (_, false) => {
                    FiniteDistribution::from_pairs([(p[0] % 3, 0.7), ((p[0] + 1) % 3, 0.3)])
                        .unwrap()
                }
                (_, true) => {
                    FiniteDistribution::from_pairs([(p[0] % 3, 0.2), ((p[0] + 2) % 3, 0.8)])
                        .unwrap()
                }
            },
            |t| t[1] == 0,
        )
        .unwrap();
        let clean = clean_simulate(&spec, 0).unwrap();
        let state = clean.player_state(0).unwrap();
        for bit in [false, true] {
            let a = spec.transcript_distribution(&[bit]).unwrap();
            let b = clean.transcript_distribution(&[bit]).unwrap();
            assert!(tv_distance(&a, &b) < 1e-12);
        }
        let p = clean.observation_probability(0).unwrap();
        let tv = tv_distance(
            &spec.transcript_distribution(&[false]).unwrap(),
            &spec.transcript_distribution(&[true]).unwrap(),
        );
        assert!((p - tv).abs() < 1e-12, "p* = {p}, tv = {tv}");
        for code in spec.transcript_distribution(&[true]).unwrap().support() {
            let post = state
                .observation_posteriors(&spec, &spec.decode(code))
                .unwrap();
            assert!(post[0] == 0.0 || post[1] == 0.0);
        }
    }
}
