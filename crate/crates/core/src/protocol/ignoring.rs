use super::ProtocolError;
use crate::distributions::FiniteDistribution;
use serde::{Deserialize, Serialize};

/// Largest player count for the exhaustive search.
pub const MAX_EXHAUSTIVE_PLAYERS: usize = 20;

/// `γ_c = 1 / (c · ln(e/c))`.
pub fn gamma(c: f64) -> f64 {
    1.0 / (c * (std::f64::consts::E / c).ln())
}

/// `e^{−k/γ_c − 1}`, the guaranteed probability that a best set of size
/// `⌈ck⌉` is entirely silent.
pub fn ignoring_bound(k: usize, c: f64) -> f64 {
    (-(k as f64) / gamma(c) - 1.0).exp()
}

/// A set of players and the probability that none of them has indicator 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgnoringSet {
    pub members: Vec<usize>,
    pub probability: f64,
}

fn check(joint: &FiniteDistribution, k: usize) -> Result<(), ProtocolError> {
    if k > MAX_EXHAUSTIVE_PLAYERS {
        return Err(ProtocolError::TooManyPlayers {
            players: k,
            limit: MAX_EXHAUSTIVE_PLAYERS,
        });
    }
    if let Some(bad) = joint.support().into_iter().find(|&a| a >> k != 0) {
        return Err(ProtocolError::InvalidParameters(format!(
            "atom {bad:#b} has bits beyond {k} players"
        )));
    }
    Ok(())
}

/// `E[Σ_j Y_j] / k` for a joint distribution whose atoms are bitmasks of
/// the indicators `Y_0 … Y_{k−1}`.
pub fn mean_rate(joint: &FiniteDistribution, k: usize) -> f64 {
    joint
        .iter()
        .map(|(a, p)| p * a.count_ones() as f64)
        .sum::<f64>()
        / k as f64
}

/// Among all sets of `⌈ck⌉` players, one maximizing `Pr[Y_j = 0 ∀ j ∈ S]`.
/// Atoms of `joint` are bitmasks of the indicators. Ties go to the set
/// whose bitmask is smallest.
pub fn find_ignoring_set(
    joint: &FiniteDistribution,
    k: usize,
    c: f64,
) -> Result<IgnoringSet, ProtocolError> {
    check(joint, k)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(ProtocolError::InvalidParameters(format!(
            "c = {c} must be in (0, 1]"
        )));
    }
    let size = ((c * k as f64) - 1e-9).ceil().max(0.0) as u32;
    let full = (1usize << k) - 1;
    // below[M] = Pr[Y ⊆ M]
    let mut below = vec![0.0f64; 1 << k];
    for (a, p) in joint.iter() {
        below[a as usize] += p;
    }
    for bit in 0..k {
        for m in 0..=full {
            if m & (1 << bit) != 0 {
                below[m] += below[m ^ (1 << bit)];
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for s in 0..=full {
        if s.count_ones() != size {
            continue;
        }
        let p = below[full ^ s];
        if best.is_none_or(|(_, q)| p > q) {
            best = Some((s, p));
        }
    }
    let (mask, probability) = best.expect("some set has the requested size");
    Ok(IgnoringSet {
        members: (0..k).filter(|j| mask & (1 << j) != 0).collect(),
        probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_silent_gives_one() {
        let joint = FiniteDistribution::point(0);
        let s = find_ignoring_set(&joint, 6, 0.5).unwrap();
        assert_eq!(s.members.len(), 3);
        assert_eq!(s.probability, 1.0);
    }

    #[test]
    fn one_random_speaker() {
        let joint = FiniteDistribution::uniform((0..4).map(|j| 1u64 << j)).unwrap();
        let s = find_ignoring_set(&joint, 4, 0.5).unwrap();
        assert_eq!(s.members.len(), 2);
        assert!((s.probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn prefers_quiet_players() {
        // players 1 and 3 always speak
        let joint = FiniteDistribution::from_pairs([(0b1010, 0.7), (0b1011, 0.3)]).unwrap();
        let s = find_ignoring_set(&joint, 4, 0.25).unwrap();
        assert_eq!(s.members, vec![2]);
        assert_eq!(s.probability, 1.0);
    }

    #[test]
    fn limits() {
        assert!(find_ignoring_set(&FiniteDistribution::point(0), 21, 0.5).is_err());
        assert!(find_ignoring_set(&FiniteDistribution::point(1 << 5), 4, 0.5).is_err());
        assert!(find_ignoring_set(&FiniteDistribution::point(0), 4, 0.0).is_err());
    }

    #[test]
    fn gamma_at_half() {
        let g = gamma(0.5);
        assert!((g - 1.0 / (0.5 * (2.0 * std::f64::consts::E).ln())).abs() < 1e-15);
        assert!((ignoring_bound(4, 0.5) - (-4.0 / g - 1.0).exp()).abs() < 1e-15);
    }
}
