//! Finite distributions, divergences and the common/disjoint decomposition.
//!
//! All logarithms are base 2, so divergences are in bits. With that unit
//! Pinsker's inequality reads `KL(P‖Q) ≥ (2 / ln 2) · tv(P, Q)²`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Atom used for `one_part` when that component carries no weight.
pub const FRESH_ONE_ATOM: u64 = u64::MAX;
/// Atom used for `zero_part` when that component carries no weight.
pub const FRESH_ZERO_ATOM: u64 = u64::MAX - 1;

/// Allowed deviation of the total mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("probability {prob} of atom {atom} is negative or not finite")]
    BadProbability { atom: u64, prob: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("empty distribution")]
    Empty,
    #[error("alpha = {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
}

/// A probability distribution over `u64` atoms. Atoms with probability 0
/// are not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u64, f64>", into = "BTreeMap<u64, f64>")]
pub struct FiniteDistribution {
    probs: BTreeMap<u64, f64>,
}

impl TryFrom<BTreeMap<u64, f64>> for FiniteDistribution {
    type Error = DistributionError;
    fn try_from(map: BTreeMap<u64, f64>) -> Result<Self, Self::Error> {
        FiniteDistribution::new(map)
    }
}

impl From<FiniteDistribution> for BTreeMap<u64, f64> {
    fn from(d: FiniteDistribution) -> Self {
        d.probs
    }
}

impl FiniteDistribution {
    pub fn new(probs: BTreeMap<u64, f64>) -> Result<Self, DistributionError> {
        for (&atom, &prob) in &probs {
            if !prob.is_finite() || prob < 0.0 {
                return Err(DistributionError::BadProbability { atom, prob });
            }
        }
        let total: f64 = probs.values().sum();
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DistributionError::NotNormalized(total));
        }
        Ok(Self::from_weights(probs))
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (u64, f64)>,
    ) -> Result<Self, DistributionError> {
        let mut map = BTreeMap::new();
        for (atom, prob) in pairs {
            *map.entry(atom).or_insert(0.0) += prob;
        }
        Self::new(map)
    }

    /// Builds from nonnegative weights that are already known to sum to 1
    /// up to rounding; zero weights are dropped.
    pub(crate) fn from_weights(mut probs: BTreeMap<u64, f64>) -> Self {
        probs.retain(|_, p| *p > 0.0);
        FiniteDistribution { probs }
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn normalized(
        weights: impl IntoIterator<Item = (u64, f64)>,
    ) -> Result<Self, DistributionError> {
        let mut map = BTreeMap::new();
        for (atom, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(DistributionError::BadProbability { atom, prob: w });
            }
            *map.entry(atom).or_insert(0.0) += w;
        }
        let total: f64 = map.values().sum();
        if total <= 0.0 {
            return Err(DistributionError::Empty);
        }
        for w in map.values_mut() {
            *w /= total;
        }
        Ok(Self::from_weights(map))
    }

    pub fn point(atom: u64) -> Self {
        FiniteDistribution {
            probs: BTreeMap::from([(atom, 1.0)]),
        }
    }

    pub fn uniform(atoms: impl IntoIterator<Item = u64>) -> Result<Self, DistributionError> {
        Self::normalized(atoms.into_iter().map(|a| (a, 1.0)))
    }

    pub fn prob(&self, atom: u64) -> f64 {
        self.probs.get(&atom).copied().unwrap_or(0.0)
    }

    /// Atoms with positive probability, in increasing order.
    pub fn support(&self) -> Vec<u64> {
        self.probs.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().map(|(&a, &p)| (a, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Inverse-CDF sample for `u ∈ [0, 1)`, scanning atoms in increasing order.
    pub fn sample(&self, u: f64) -> u64 {
        let mut acc = 0.0;
        let mut last = 0;
        for (&atom, &p) in &self.probs {
            acc += p;
            last = atom;
            if u < acc {
                return atom;
            }
        }
        last
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample(rng.random::<f64>())
    }
}

fn union_atoms<'a>(
    p: &'a FiniteDistribution,
    q: &'a FiniteDistribution,
) -> impl Iterator<Item = u64> + 'a {
    let mut atoms: Vec<u64> = p.probs.keys().chain(q.probs.keys()).copied().collect();
    atoms.sort_unstable();
    atoms.dedup();
    atoms.into_iter()
}

/// `½ Σ |P(x) − Q(x)|`.
pub fn tv_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    let s: f64 = union_atoms(p, q)
        .map(|a| (p.prob(a) - q.prob(a)).abs())
        .sum();
    (0.5 * s).min(1.0)
}

/// `Σ P(x) log₂(P(x)/Q(x))`; `+∞` when `P` is not absolutely continuous
/// with respect to `Q`.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    let mut total = 0.0;
    for (a, pa) in p.iter() {
        let qa = q.prob(a);
        if qa <= 0.0 {
            return f64::INFINITY;
        }
        total += pa * (pa / qa).log2();
    }
    total.max(0.0)
}

/// Jensen–Shannon divergence `½(KL(P‖M) + KL(Q‖M))` with `M = ½(P + Q)`.
pub fn js_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    let mid = FiniteDistribution::from_weights(
        union_atoms(p, q)
            .map(|a| (a, 0.5 * (p.prob(a) + q.prob(a))))
            .collect(),
    );
    0.5 * (kl_divergence(p, &mid) + kl_divergence(q, &mid))
}

/// Split of `(D⁰, D¹)` into a shared component and two disjointly supported
/// remainders:
///
/// * `D⁰ = (1−α)(1−δ)·common + (1 − (1−α)(1−δ))·zero_part`
/// * `D¹ = (1−δ)·common + δ·one_part`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub common: FiniteDistribution,
    pub zero_part: FiniteDistribution,
    pub one_part: FiniteDistribution,
    pub delta: f64,
    pub alpha: f64,
}

impl Decomposition {
    /// Weight of `zero_part` in the mixture for `D⁰`.
    pub fn zero_weight(&self) -> f64 {
        1.0 - (1.0 - self.alpha) * (1.0 - self.delta)
    }

    /// Largest pointwise error of the two mixture identities.
    pub fn mixture_error(&self, d0: &FiniteDistribution, d1: &FiniteDistribution) -> f64 {
        let shared0 = (1.0 - self.alpha) * (1.0 - self.delta);
        let shared1 = 1.0 - self.delta;
        let mut atoms: Vec<u64> = d0
            .probs
            .keys()
            .chain(d1.probs.keys())
            .chain(self.common.probs.keys())
            .chain(self.zero_part.probs.keys())
            .chain(self.one_part.probs.keys())
            .copied()
            .collect();
        atoms.sort_unstable();
        atoms.dedup();
        atoms
            .into_iter()
            .map(|a| {
                let e0 = d0.prob(a)
                    - shared0 * self.common.prob(a)
                    - (1.0 - shared0) * self.zero_part.prob(a);
                let e1 =
                    d1.prob(a) - shared1 * self.common.prob(a) - self.delta * self.one_part.prob(a);
                e0.abs().max(e1.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn parts_disjoint(&self) -> bool {
        self.zero_part
            .probs
            .keys()
            .all(|a| !self.one_part.probs.contains_key(a))
    }
}

/// Decomposes `(d0, d1)` with prior `alpha`.
///
/// With `m(x) = min(d0(x)/(1−α), d1(x))`, `δ = 1 − Σ m` and
/// `common = m / (1−δ)`. Components that carry no weight are returned as a
/// point mass on [`FRESH_ZERO_ATOM`] / [`FRESH_ONE_ATOM`].
pub fn decompose(
    d0: &FiniteDistribution,
    d1: &FiniteDistribution,
    alpha: f64,
) -> Result<Decomposition, DistributionError> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(DistributionError::AlphaOutOfRange(alpha));
    }
    if alpha == 1.0 {
        return Ok(Decomposition {
            common: d1.clone(),
            zero_part: d0.clone(),
            one_part: FiniteDistribution::point(FRESH_ONE_ATOM),
            delta: 0.0,
            alpha,
        });
    }
    let scale = 1.0 / (1.0 - alpha);
    let mut overlap = BTreeMap::new();
    let mut zero_excess = BTreeMap::new();
    let mut one_excess = BTreeMap::new();
    for a in union_atoms(d0, d1) {
        let lifted = d0.prob(a) * scale;
        let b = d1.prob(a);
        if lifted > b {
            overlap.insert(a, b);
            // d0 − (1−α)·m where m = d1
            zero_excess.insert(a, d0.prob(a) - (1.0 - alpha) * b);
        } else {
            overlap.insert(a, lifted);
            if b > lifted {
                one_excess.insert(a, b - lifted);
            }
        }
    }
    let mass: f64 = overlap.values().sum();
    let delta = (1.0 - mass).clamp(0.0, 1.0);
    let common = if mass > 0.0 {
        FiniteDistribution::from_weights(overlap.into_iter().map(|(a, m)| (a, m / mass)).collect())
    } else {
        d1.clone()
    };
    let zero_weight = 1.0 - (1.0 - alpha) * (1.0 - delta);
    let zero_part = if zero_weight > 0.0 && zero_excess.values().any(|&w| w > 0.0) {
        FiniteDistribution::from_weights(
            zero_excess
                .into_iter()
                .map(|(a, w)| (a, w.max(0.0) / zero_weight))
                .collect(),
        )
    } else {
        FiniteDistribution::point(FRESH_ZERO_ATOM)
    };
    let one_part = if delta > 0.0 && one_excess.values().any(|&w| w > 0.0) {
        FiniteDistribution::from_weights(
            one_excess
                .into_iter()
                .map(|(a, w)| (a, w / delta))
                .collect(),
        )
    } else {
        FiniteDistribution::point(FRESH_ONE_ATOM)
    };
    Ok(Decomposition {
        common,
        zero_part,
        one_part,
        delta,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(u64, f64)]) -> FiniteDistribution {
        FiniteDistribution::from_pairs(pairs.iter().copied()).unwrap()
    }

    const TOL: f64 = 1e-12;

    #[test]
    fn tv_examples() {
        let p = dist(&[(0, 0.5), (1, 0.5)]);
        let q = dist(&[(0, 0.25), (1, 0.75)]);
        assert_eq!(tv_distance(&p, &p), 0.0);
        assert!((tv_distance(&p, &q) - 0.25).abs() < TOL);
        assert_eq!(
            tv_distance(&FiniteDistribution::point(3), &FiniteDistribution::point(4)),
            1.0
        );
    }

    #[test]
    fn kl_and_js_examples() {
        let p = dist(&[(0, 0.5), (1, 0.5)]);
        let q = dist(&[(0, 0.25), (1, 0.75)]);
        assert_eq!(kl_divergence(&p, &p), 0.0);
        let expected = 0.5 * (0.5f64 / 0.25).log2() + 0.5 * (0.5f64 / 0.75).log2();
        assert!((kl_divergence(&p, &q) - expected).abs() < TOL);
        assert!(kl_divergence(&p, &q) >= 2.0 / std::f64::consts::LN_2 * 0.25 * 0.25);
        assert!(
            (js_divergence(&FiniteDistribution::point(0), &FiniteDistribution::point(1)) - 1.0)
                .abs()
                < TOL
        );
        assert_eq!(
            kl_divergence(&p, &FiniteDistribution::point(0)),
            f64::INFINITY
        );
    }

    #[test]
    fn decomposition_hand_example() {
        let d0 = dist(&[(0, 0.5), (1, 0.5)]);
        let d1 = dist(&[(0, 0.25), (1, 0.75)]);
        let dec = decompose(&d0, &d1, 0.0).unwrap();
        assert!((dec.delta - 0.25).abs() < TOL);
        assert!((dec.common.prob(0) - 1.0 / 3.0).abs() < TOL);
        assert!((dec.common.prob(1) - 2.0 / 3.0).abs() < TOL);
        assert_eq!(dec.zero_part, FiniteDistribution::point(0));
        assert_eq!(dec.one_part, FiniteDistribution::point(1));
        assert!(dec.mixture_error(&d0, &d1) < TOL);
    }

    #[test]
    fn decomposition_alpha_one() {
        let d0 = dist(&[(0, 0.3), (1, 0.7)]);
        let d1 = dist(&[(1, 0.4), (2, 0.6)]);
        let dec = decompose(&d0, &d1, 1.0).unwrap();
        assert_eq!(dec.delta, 0.0);
        assert_eq!(dec.zero_part, d0);
        assert_eq!(dec.common, d1);
        assert!(dec.parts_disjoint());
        assert!(dec.mixture_error(&d0, &d1) < TOL);
    }

    #[test]
    fn decomposition_disjoint_inputs() {
        let d0 = dist(&[(0, 0.3), (1, 0.7)]);
        let d1 = dist(&[(2, 0.4), (3, 0.6)]);
        for alpha in [0.0, 0.4, 0.999] {
            let dec = decompose(&d0, &d1, alpha).unwrap();
            assert_eq!(dec.delta, 1.0);
            assert_eq!(dec.zero_part, d0);
            assert_eq!(dec.one_part, d1);
            assert!(dec.mixture_error(&d0, &d1) < TOL);
        }
    }

    #[test]
    fn decomposition_identical_inputs() {
        let d = dist(&[(0, 0.3), (1, 0.7)]);
        let dec = decompose(&d, &d, 0.0).unwrap();
        assert_eq!(dec.delta, 0.0);
        assert_eq!(dec.common, d);
        assert!(dec.parts_disjoint());
        assert!(dec.mixture_error(&d, &d) < TOL);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = FiniteDistribution::point(0);
        assert!(matches!(
            decompose(&d, &d, 1.5),
            Err(DistributionError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            decompose(&d, &d, -0.1),
            Err(DistributionError::AlphaOutOfRange(_))
        ));
        assert!(FiniteDistribution::from_pairs([(0, 0.5)]).is_err());
        assert!(FiniteDistribution::from_pairs([(0, 1.5), (1, -0.5)]).is_err());
    }

    #[test]
    fn json_is_an_atom_map() {
        let d = dist(&[(0, 0.25), (7, 0.75)]);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s, r#"{"0":0.25,"7":0.75}"#);
        let back: FiniteDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<FiniteDistribution>(r#"{"0":0.2}"#).is_err());
    }

    #[test]
    fn sampling_follows_cdf() {
        let d = dist(&[(2, 0.25), (5, 0.75)]);
        assert_eq!(d.sample(0.0), 2);
        assert_eq!(d.sample(0.2499), 2);
        assert_eq!(d.sample(0.25), 5);
        assert_eq!(d.sample(0.9999999), 5);
    }
}
