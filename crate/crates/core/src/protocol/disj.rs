//! Protocols for MostlyDISJ and promise disjointness.
//!
//! Sets are written on the board as a size followed by the rank of the set
//! among all sets of that size drawn from the elements still unclaimed, so
//! each message is a fixed-length code over an explicit alphabet.

use super::spec::Transcript;
use super::ProtocolError;
use crate::disj::{DisjInstance, Label};
use crate::rng::keyed_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest universe supported; set ranks must fit in a `u128`.
pub const MAX_PROTOCOL_UNIVERSE: usize = 120;

/// Binomial coefficient; `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Rank of `subset` (sorted positions in `[0, u)`) among the `C(u, |subset|)`
/// subsets of its size, in the combinatorial number system.
fn subset_rank(positions: &[usize]) -> u128 {
    positions
        .iter()
        .enumerate()
        .map(|(t, &p)| binomial(p, t + 1).expect("bounded by the universe limit"))
        .sum()
}

/// `n · ⌈log₂(k+1)⌉`.
pub fn deterministic_cost_bound(n: usize, k: usize) -> u64 {
    n as u64 * crate::ceil_log2(k as u128 + 1)
}

/// Probability that fewer than two of the `l` holders of the star publish
/// it: `(1−ε)^l + l·ε·(1−ε)^{l−1}`.
pub fn epsilon_publish_yes_failure(l: usize, eps: f64) -> f64 {
    let q = 1.0 - eps;
    q.powi(l as i32) + l as f64 * eps * q.powi(l as i32 - 1)
}

/// Result of one protocol run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjRun {
    pub transcript: Transcript,
    pub output: Label,
}

pub trait DisjProtocol {
    fn name(&self) -> &'static str;
    fn run(&self, instance: &DisjInstance, seed: u64) -> Result<DisjRun, ProtocolError>;
}

fn check_shape(n: usize, k: usize, instance: &DisjInstance) -> Result<(), ProtocolError> {
    if instance.n() != n || instance.k() != k {
        return Err(ProtocolError::InvalidParameters(format!(
            "protocol built for (n={n}, k={k}) but instance has (n={}, k={})",
            instance.n(),
            instance.k()
        )));
    }
    Ok(())
}

fn check_params(n: usize, k: usize) -> Result<(), ProtocolError> {
    if n == 0 || k == 0 {
        return Err(ProtocolError::InvalidParameters(
            "need n ≥ 1 and k ≥ 1".into(),
        ));
    }
    if n > MAX_PROTOCOL_UNIVERSE {
        return Err(ProtocolError::InvalidParameters(format!(
            "universe {n} exceeds the supported maximum {MAX_PROTOCOL_UNIVERSE}"
        )));
    }
    Ok(())
}

/// Round-robin publishing of owned elements.
///
/// Players speak once each, in order, while the board accumulates the set
/// `C` of claimed elements. A player holding an element of `C` announces a
/// collision and the protocol stops with YES. Otherwise the player writes
/// the size of their set and its rank among subsets of the unclaimed
/// elements, and their set joins `C`. The last player only needs to say
/// whether they collide with `C`, which costs nothing when `C` is empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicPublish {
    pub n: usize,
    pub k: usize,
}

pub fn deterministic_disj_protocol(
    n: usize,
    k: usize,
) -> Result<DeterministicPublish, ProtocolError> {
    check_params(n, k)?;
    Ok(DeterministicPublish { n, k })
}

/// Runs the publishing schedule on explicit per-player sets.
fn publish(n: usize, sets: &[Vec<usize>]) -> DisjRun {
    let k = sets.len();
    let mut claimed = vec![false; n];
    let mut claimed_count = 0usize;
    let mut transcript = Transcript::default();
    for (j, set) in sets.iter().enumerate() {
        let collides = set.iter().any(|&e| claimed[e]);
        if j + 1 == k {
            if claimed_count > 0 {
                transcript.push(j, collides as u128, 2);
            }
            return DisjRun {
                transcript,
                output: Label::from_bool(collides),
            };
        }
        let unclaimed = n - claimed_count;
        // sizes 0..=unclaimed, plus a collision symbol once something is claimed
        let alphabet = unclaimed as u128 + 1 + (claimed_count > 0) as u128;
        if collides {
            transcript.push(j, unclaimed as u128 + 1, alphabet);
            return DisjRun {
                transcript,
                output: Label::Yes,
            };
        }
        transcript.push(j, set.len() as u128, alphabet);
        let mut positions = Vec::with_capacity(set.len());
        let mut pos = 0usize;
        let mut next = set.iter().peekable();
        for (e, &taken) in claimed.iter().enumerate() {
            if taken {
                continue;
            }
            if next.peek() == Some(&&e) {
                positions.push(pos);
                next.next();
            }
            pos += 1;
        }
        let choices = binomial(unclaimed, set.len()).expect("bounded by the universe limit");
        transcript.push(j, subset_rank(&positions), choices);
        for &e in set {
            claimed[e] = true;
        }
        claimed_count += set.len();
    }
    DisjRun {
        transcript,
        output: Label::No,
    }
}

impl DisjProtocol for DeterministicPublish {
    fn name(&self) -> &'static str {
        "deterministic"
    }

    fn run(&self, instance: &DisjInstance, _seed: u64) -> Result<DisjRun, ProtocolError> {
        check_shape(self.n, self.k, instance)?;
        Ok(publish(self.n, instance.rows()))
    }
}

/// Each player keeps every owned element independently with probability
/// `eps` and the kept sets are published as in [`DeterministicPublish`].
/// YES is reported only when some element is published by two players, so
/// NO instances are never misreported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPublish {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub eps: f64,
}

pub fn epsilon_publish_protocol(
    n: usize,
    k: usize,
    l: usize,
    eps: f64,
) -> Result<EpsilonPublish, ProtocolError> {
    check_params(n, k)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(ProtocolError::InvalidParameters(format!(
            "eps = {eps} must be in [0, 1]"
        )));
    }
    if l == 0 || l > k {
        return Err(ProtocolError::InvalidParameters(format!(
            "need 1 ≤ l ≤ k, got l = {l}"
        )));
    }
    Ok(EpsilonPublish { n, k, l, eps })
}

impl DisjProtocol for EpsilonPublish {
    fn name(&self) -> &'static str {
        "eps-publish"
    }

    fn run(&self, instance: &DisjInstance, seed: u64) -> Result<DisjRun, ProtocolError> {
        check_shape(self.n, self.k, instance)?;
        if instance.l() != self.l {
            return Err(ProtocolError::InvalidParameters(format!(
                "protocol built for l = {} but instance has l = {}",
                self.l,
                instance.l()
            )));
        }
        let kept: Vec<Vec<usize>> = instance
            .rows()
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let mut rng = keyed_rng(seed, j as u64, 0);
                row.iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() < self.eps)
                    .collect()
            })
            .collect();
        Ok(publish(self.n, &kept))
    }
}

/// Promise disjointness (the sets are pairwise disjoint, or share one
/// element held by everyone).
///
/// Every player announces with one bit whether their set has at most
/// `⌊(n−1)/k⌋ + 1` elements; some player always does. The first such player
/// writes their set, and the next player confirms with one bit whether they
/// hold one of those elements. With a single player, YES means the set is
/// nonempty. Inputs outside the promise get an unspecified answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PigeonholePromise {
    pub n: usize,
    pub k: usize,
}

pub fn pigeonhole_promise_protocol(n: usize, k: usize) -> Result<PigeonholePromise, ProtocolError> {
    check_params(n, k)?;
    Ok(PigeonholePromise { n, k })
}

impl PigeonholePromise {
    pub fn threshold(&self) -> usize {
        (self.n - 1) / self.k + 1
    }
}

impl DisjProtocol for PigeonholePromise {
    fn name(&self) -> &'static str {
        "pigeonhole"
    }

    fn run(&self, instance: &DisjInstance, _seed: u64) -> Result<DisjRun, ProtocolError> {
        check_shape(self.n, self.k, instance)?;
        let t = self.threshold();
        let mut transcript = Transcript::default();
        let mut poster = None;
        for j in 0..self.k {
            let small = instance.row(j).len() <= t;
            transcript.push(j, small as u128, 2);
            if small {
                poster = Some(j);
                break;
            }
        }
        let Some(j) = poster else {
            return Ok(DisjRun {
                transcript,
                output: Label::No,
            });
        };
        let set = instance.row(j);
        transcript.push(j, set.len() as u128, t as u128 + 1);
        let choices = binomial(self.n, set.len()).expect("bounded by the universe limit");
        transcript.push(j, subset_rank(set), choices);
        if self.k == 1 {
            return Ok(DisjRun {
                transcript,
                output: Label::from_bool(!set.is_empty()),
            });
        }
        let confirmer = (j + 1) % self.k;
        let hit = set.iter().any(|&e| instance.bit(confirmer, e));
        transcript.push(confirmer, hit as u128, 2);
        Ok(DisjRun {
            transcript,
            output: Label::from_bool(hit),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(120, 60), Some(96614908840363322603893139521372656));
    }

    #[test]
    fn ranks_are_a_bijection() {
        let u = 7;
        for s in 0..=u {
            let mut seen = std::collections::BTreeSet::new();
            for mask in 0u32..(1 << u) {
                if mask.count_ones() as usize != s {
                    continue;
                }
                let pos: Vec<usize> = (0..u).filter(|&i| mask & (1 << i) != 0).collect();
                let r = subset_rank(&pos);
                assert!(r < binomial(u, s).unwrap());
                assert!(seen.insert(r));
            }
        }
    }

    #[test]
    fn empty_instance_is_no_and_cheap() {
        let inst = DisjInstance::new(8, 4, 2, vec![vec![]; 4]).unwrap();
        let p = deterministic_disj_protocol(8, 4).unwrap();
        let run = p.run(&inst, 0).unwrap();
        assert_eq!(run.output, Label::No);
        assert!(run.transcript.bit_cost <= deterministic_cost_bound(8, 4));
    }

    #[test]
    fn collision_is_detected() {
        let inst = DisjInstance::new(6, 3, 2, vec![vec![0, 1], vec![2], vec![1, 5]]).unwrap();
        let run = deterministic_disj_protocol(6, 3)
            .unwrap()
            .run(&inst, 0)
            .unwrap();
        assert_eq!(run.output, Label::Yes);
    }

    #[test]
    fn eps_extremes() {
        let inst = DisjInstance::new(6, 3, 3, vec![vec![0, 1], vec![0, 2], vec![0, 5]]).unwrap();
        let full = epsilon_publish_protocol(6, 3, 3, 1.0)
            .unwrap()
            .run(&inst, 4)
            .unwrap();
        let det = deterministic_disj_protocol(6, 3)
            .unwrap()
            .run(&inst, 4)
            .unwrap();
        assert_eq!(full, det);
        for seed in 0..50 {
            let none = epsilon_publish_protocol(6, 3, 3, 0.0)
                .unwrap()
                .run(&inst, seed)
                .unwrap();
            assert_eq!(none.output, Label::No);
        }
    }

    #[test]
    fn failure_formula() {
        assert!((epsilon_publish_yes_failure(8, 0.5) - 9.0 / 256.0).abs() < 1e-15);
        assert_eq!(epsilon_publish_yes_failure(3, 1.0), 0.0);
        assert_eq!(epsilon_publish_yes_failure(3, 0.0), 1.0);
    }

    #[test]
    fn pigeonhole_cases() {
        let p = pigeonhole_promise_protocol(8, 4).unwrap();
        let disjoint = DisjInstance::new(
            8,
            4,
            4,
            vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]],
        )
        .unwrap();
        assert_eq!(p.run(&disjoint, 0).unwrap().output, Label::No);
        let common = DisjInstance::new(
            8,
            4,
            4,
            vec![vec![0, 1, 2], vec![0, 3], vec![0, 4, 5], vec![0, 6, 7]],
        )
        .unwrap();
        assert_eq!(p.run(&common, 0).unwrap().output, Label::Yes);
        let single = pigeonhole_promise_protocol(5, 1).unwrap();
        let inst = DisjInstance::new(5, 1, 1, vec![vec![1, 3]]).unwrap();
        let run = single.run(&inst, 0).unwrap();
        assert_eq!(run.output, Label::Yes);
        assert_eq!(run.transcript.messages.len(), 3);
    }

    #[test]
    fn shape_mismatch() {
        let inst = DisjInstance::new(8, 4, 2, vec![vec![]; 4]).unwrap();
        assert!(deterministic_disj_protocol(8, 3)
            .unwrap()
            .run(&inst, 0)
            .is_err());
        assert!(deterministic_disj_protocol(121, 3).is_err());
    }
}
