//! Rank-1 approximation of streams of standard-basis rows.
//!
//! A set-disjointness instance over `[d]` with `m = √d` players turns into a
//! row stream: player `ℓ` contributes the rows `e_i`, `i ∈ S_ℓ`, and players
//! appear in order. For such matrices `AᵀA = diag(c)` with `c_i` the number
//! of copies of `e_i`, so every quantity below is a function of the counts.

use crate::disj::{DisjInstance, InstanceError, Label};
use crate::rng::seeded_rng;
use crate::stream::{StreamFile, StreamHeader, StreamUpdate};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const DEFAULT_TAU: f64 = 0.05;
pub const MAX_CANDIDATES: usize = 20;
/// Lower bound on `v_{i*}²` that [`approximation_constant`] enforces.
pub const MASS_THRESHOLD: f64 = 0.1;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LowRankError {
    #[error("dimension {0} is not a positive perfect square")]
    NotSquare(usize),
    #[error("vector has length {got}, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("vector is not a unit vector: ‖v‖² = {0}")]
    NotUnit(f64),
    #[error("{found} candidates with v_j² ≥ {tau}, at most {limit} allowed")]
    TooManyCandidates {
        found: usize,
        tau: f64,
        limit: usize,
    },
    #[error("tau = {0} must be in (0, 1]")]
    BadTau(f64),
    #[error("row index {index} outside dimension {d}")]
    RowOutOfRange { index: usize, d: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// `⌊√d⌋` when `d` is a positive perfect square.
pub fn exact_sqrt(d: usize) -> Option<usize> {
    let m = (d as f64).sqrt().round() as usize;
    (d > 0 && m * m == d).then_some(m)
}

/// `√d` player sets over `[d]`, each of size `⌈√d/2⌉`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowStreamInstance {
    pub d: usize,
    pub sets: Vec<Vec<usize>>,
    pub label: Label,
    pub star: Option<usize>,
}

/// `(m, s, t)`: players, set size, and sets holding the star.
pub fn lowrank_shape(d: usize) -> Result<(usize, usize, usize), LowRankError> {
    let m = exact_sqrt(d).ok_or(LowRankError::NotSquare(d))?;
    Ok((m, m.div_ceil(2), (2 * m).div_ceil(3)))
}

/// Random instance. YES places the star in exactly `⌈2√d/3⌉` sets; all
/// other elements are distinct.
pub fn gen_lowrank_instance(
    d: usize,
    label: Label,
    seed: u64,
) -> Result<RowStreamInstance, LowRankError> {
    let (m, s, t) = lowrank_shape(d)?;
    let mut rng = seeded_rng(seed);
    let yes = label.is_yes();
    let fresh = m * s - if yes { t } else { 0 } + usize::from(yes);
    let mut elements = index::sample(&mut rng, d, fresh).into_vec();
    let star = if yes { elements.pop() } else { None };
    let holders: BTreeSet<usize> = match star {
        Some(_) => index::sample(&mut rng, m, t).into_iter().collect(),
        None => BTreeSet::new(),
    };
    let mut sets = Vec::with_capacity(m);
    for player in 0..m {
        let mut set = Vec::with_capacity(s);
        if let (Some(x), true) = (star, holders.contains(&player)) {
            set.push(x);
        }
        while set.len() < s {
            set.push(elements.pop().expect("enough fresh elements"));
        }
        set.shuffle(&mut rng);
        sets.push(set);
    }
    let inst = RowStreamInstance {
        d,
        sets,
        label,
        star,
    };
    inst.validate()?;
    Ok(inst)
}

impl RowStreamInstance {
    pub fn players(&self) -> usize {
        self.sets.len()
    }

    /// Checks sizes and the disjointness promise against the label.
    pub fn validate(&self) -> Result<(), LowRankError> {
        let (m, s, t) = lowrank_shape(self.d)?;
        if self.sets.len() != m || self.sets.iter().any(|set| set.len() != s) {
            return Err(
                InstanceError::InvalidParameters(format!("expected {m} sets of size {s}")).into(),
            );
        }
        let verdict = self
            .to_disj_instance(t)?
            .verify_promise()
            .map_err(InstanceError::Promise)?;
        if verdict.label != self.label || verdict.star != self.star {
            return Err(InstanceError::InvalidParameters(
                "label or star disagrees with the sets".into(),
            )
            .into());
        }
        Ok(())
    }

    fn to_disj_instance(&self, l: usize) -> Result<DisjInstance, InstanceError> {
        DisjInstance::new(self.d, self.sets.len(), l, self.sets.clone())
    }

    /// The same sets as a DISJ instance with promise parameter `⌈2√d/3⌉`.
    pub fn disj_instance(&self) -> Result<DisjInstance, LowRankError> {
        let (_, _, t) = lowrank_shape(self.d)?;
        Ok(self.to_disj_instance(t)?)
    }

    /// Row indices in stream order.
    pub fn rows(&self) -> Vec<usize> {
        self.sets.iter().flatten().copied().collect()
    }

    /// Number of sets in the first half of the stream.
    pub fn midpoint_sets(&self) -> usize {
        self.sets.len() / 2
    }

    pub fn first_half_rows(&self) -> Vec<usize> {
        self.sets[..self.midpoint_sets()]
            .iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn second_half_rows(&self) -> Vec<usize> {
        self.sets[self.midpoint_sets()..]
            .iter()
            .flatten()
            .copied()
            .collect()
    }

    /// Counts after the first half.
    pub fn midpoint_counts(&self) -> CountsProfile {
        CountsProfile::from_rows(self.d, &self.first_half_rows()).expect("rows lie in [d]")
    }

    /// Stream with one insertion per row and one block per player.
    pub fn to_stream_file(&self) -> StreamFile {
        let (_, _, t) = lowrank_shape(self.d).expect("validated instance");
        StreamFile {
            header: StreamHeader {
                n: self.d,
                k: self.sets.len(),
                l: t,
                p: 2.0,
                label: Some(self.label),
                universe: self.d,
            },
            initial: Vec::new(),
            blocks: self
                .sets
                .iter()
                .map(|set| set.iter().map(|&i| StreamUpdate::insert(i)).collect())
                .collect(),
        }
    }
}

/// `c_i`, the number of rows equal to `e_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsProfile {
    pub counts: Vec<u64>,
}

impl CountsProfile {
    pub fn new(d: usize) -> Self {
        CountsProfile { counts: vec![0; d] }
    }

    pub fn from_rows(d: usize, rows: &[usize]) -> Result<Self, LowRankError> {
        let mut c = Self::new(d);
        for &i in rows {
            c.push_row(i)?;
        }
        Ok(c)
    }

    pub fn push_row(&mut self, index: usize) -> Result<(), LowRankError> {
        let d = self.counts.len();
        *self
            .counts
            .get_mut(index)
            .ok_or(LowRankError::RowOutOfRange { index, d })? += 1;
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.counts.len()
    }

    /// `‖A‖_F² = Σ c_i`.
    pub fn frobenius_squared(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// `‖A − A vvᵀ‖_F²` minimized over unit `v`: `Σc − max c`.
    pub fn optimal_residual(&self) -> u64 {
        self.frobenius_squared() - self.max_count()
    }

    /// `AᵀA = diag(c)`.
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dimension(),
            self.counts.iter().map(|&c| c as f64),
        ))
    }
}

fn check_unit(v: &[f64], d: usize) -> Result<(), LowRankError> {
    if v.len() != d {
        return Err(LowRankError::WrongLength {
            got: v.len(),
            expected: d,
        });
    }
    let norm: f64 = v.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(LowRankError::NotUnit(norm));
    }
    Ok(())
}

/// `‖A‖_F² − ‖Av‖₂² = Σc_i − Σc_i v_i²`.
pub fn residual_rank1(counts: &CountsProfile, v: &[f64]) -> Result<f64, LowRankError> {
    check_unit(v, counts.dimension())?;
    let captured: f64 = counts
        .counts
        .iter()
        .zip(v)
        .map(|(&c, x)| c as f64 * x * x)
        .sum();
    Ok(counts.frobenius_squared() as f64 - captured)
}

/// Unit eigenvector of `AᵀA` for its largest eigenvalue.
pub fn top_singular_vector(counts: &CountsProfile) -> Vec<f64> {
    let eig = SymmetricEigen::new(counts.gram());
    let best = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(best);
    let norm = v.norm();
    v.iter().map(|x| x / norm).collect()
}

/// Smallest star count any YES instance of dimension `d` has after the first
/// half: `⌈2m/3⌉ − (m − ⌊m/2⌋)`.
pub fn midpoint_star_lower_bound(d: usize) -> Result<u64, LowRankError> {
    let (m, _, t) = lowrank_shape(d)?;
    Ok(t.saturating_sub(m - m / 2) as u64)
}

/// Largest `C` such that every unit `v` with residual `≤ C · optimal` at the
/// midpoint of a YES instance has `v_{i*}² ≥ MASS_THRESHOLD`.
///
/// From `residual ≥ F − 1 − c·v_{i*}²` and `optimal = F − c`, the guarantee
/// holds when `C ≤ (F − 1 − 0.1c)/(F − c)`. The right side grows with `c`,
/// so it is evaluated at the smallest midpoint star count.
pub fn approximation_constant(d: usize) -> Result<f64, LowRankError> {
    let (m, s, _) = lowrank_shape(d)?;
    let f = ((m / 2) * s) as f64;
    let c = midpoint_star_lower_bound(d)? as f64;
    Ok((f - 1.0 - MASS_THRESHOLD * c) / (f - c))
}

/// `v_{i*}²` implied by `residual ≤ bound`: `(F − 1 − bound) / c_{i*}`.
pub fn implied_star_mass(counts: &CountsProfile, star: usize, residual_bound: f64) -> f64 {
    (counts.frobenius_squared() as f64 - 1.0 - residual_bound) / counts.counts[star] as f64
}

/// `T = {j : v_j² ≥ τ}`, sorted.
pub fn candidate_set(v: &[f64], tau: f64) -> Result<Vec<usize>, LowRankError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(LowRankError::BadTau(tau));
    }
    let t: Vec<usize> = (0..v.len()).filter(|&j| v[j] * v[j] >= tau).collect();
    if t.len() > MAX_CANDIDATES {
        return Err(LowRankError::TooManyCandidates {
            found: t.len(),
            tau,
            limit: MAX_CANDIDATES,
        });
    }
    Ok(t)
}

/// YES iff exactly one element of `T` occurs among the second-half rows.
pub fn identify_star(
    v: &[f64],
    tau: f64,
    second_half_rows: &[usize],
) -> Result<Label, LowRankError> {
    let norm: f64 = v.iter().map(|x| x * x).sum();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(LowRankError::NotUnit(norm));
    }
    let t = candidate_set(v, tau)?;
    let seen: BTreeSet<usize> = second_half_rows
        .iter()
        .copied()
        .filter(|r| t.binary_search(r).is_ok())
        .collect();
    Ok(Label::from_bool(seen.len() == 1))
}

/// Result of the full midpoint pipeline on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowRankOutcome {
    pub label: Label,
    pub predicted: Label,
    pub candidates: Vec<usize>,
    pub residual: f64,
    pub optimal: u64,
    pub star_count: Option<u64>,
}

/// Counts the first half, takes the exact top vector, and identifies the
/// label from the second half.
pub fn run_pipeline(inst: &RowStreamInstance, tau: f64) -> Result<LowRankOutcome, LowRankError> {
    let counts = inst.midpoint_counts();
    let v = top_singular_vector(&counts);
    let predicted = identify_star(&v, tau, &inst.second_half_rows())?;
    Ok(LowRankOutcome {
        label: inst.label,
        predicted,
        candidates: candidate_set(&v, tau)?,
        residual: residual_rank1(&counts, &v)?,
        optimal: counts.optimal_residual(),
        star_count: inst.star.map(|s| counts.counts[s]),
    })
}

/// Row multiplicities as a map, for reporting.
pub fn row_histogram(rows: &[usize]) -> BTreeMap<usize, u64> {
    let mut h = BTreeMap::new();
    for &r in rows {
        *h.entry(r).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(d: usize, rows: &[usize]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(rows.len(), d);
        for (r, &i) in rows.iter().enumerate() {
            a[(r, i)] = 1.0;
        }
        a
    }

    #[test]
    fn small_shapes() {
        let no = gen_lowrank_instance(16, Label::No, 1).unwrap();
        assert_eq!(no.sets.len(), 4);
        assert!(no.sets.iter().all(|s| s.len() == 2));
        assert_eq!(no.rows().iter().collect::<BTreeSet<_>>().len(), 8);
        let yes = gen_lowrank_instance(16, Label::Yes, 1).unwrap();
        let star = yes.star.unwrap();
        assert_eq!(yes.sets.iter().filter(|s| s.contains(&star)).count(), 3);
        let tiny = gen_lowrank_instance(4, Label::Yes, 2).unwrap();
        assert_eq!(tiny.sets, vec![vec![tiny.star.unwrap()]; 2]);
        assert_eq!(
            gen_lowrank_instance(15, Label::No, 0),
            Err(LowRankError::NotSquare(15))
        );
    }

    #[test]
    fn residual_examples() {
        let c = CountsProfile {
            counts: vec![1, 3, 2, 0],
        };
        let mut e1 = vec![0.0; 4];
        e1[1] = 1.0;
        assert_eq!(residual_rank1(&c, &e1).unwrap(), 3.0);
        assert_eq!(c.optimal_residual(), 3);
        let uniform = vec![0.5; 4];
        assert!((residual_rank1(&c, &uniform).unwrap() - (6.0 - 6.0 / 4.0)).abs() < 1e-12);
        assert!(matches!(
            residual_rank1(&c, &[1.0, 1.0, 0.0, 0.0]),
            Err(LowRankError::NotUnit(_))
        ));
    }

    #[test]
    fn residual_matches_dense_matrix() {
        let inst = gen_lowrank_instance(36, Label::Yes, 5).unwrap();
        let rows = inst.first_half_rows();
        let counts = inst.midpoint_counts();
        let a = dense(36, &rows);
        let raw: Vec<f64> = (0..36).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = DVector::from_iterator(36, raw.iter().map(|x| x / norm));
        let oracle = (&a - &a * &v * v.transpose()).norm_squared();
        let ours = residual_rank1(&counts, v.as_slice()).unwrap();
        assert!((oracle - ours).abs() < 1e-9);
    }

    #[test]
    fn constants() {
        assert!((approximation_constant(64).unwrap() - 14.8 / 14.0).abs() < 1e-12);
        assert!(approximation_constant(256).unwrap() > 1.0);
        assert_eq!(midpoint_star_lower_bound(64).unwrap(), 2);
    }

    #[test]
    fn pipeline_labels() {
        for seed in 0..5 {
            for label in [Label::Yes, Label::No] {
                let inst = gen_lowrank_instance(64, label, seed).unwrap();
                let out = run_pipeline(&inst, DEFAULT_TAU).unwrap();
                assert_eq!(out.predicted, label);
                assert!((out.residual - out.optimal as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthogonal_vector_misses_star() {
        let inst = gen_lowrank_instance(64, Label::Yes, 3).unwrap();
        let counts = inst.midpoint_counts();
        let star = inst.star.unwrap();
        let mut v = vec![0.0; 64];
        v[inst
            .first_half_rows()
            .into_iter()
            .find(|&r| r != star)
            .unwrap()] = 1.0;
        let c = approximation_constant(64).unwrap();
        assert!(residual_rank1(&counts, &v).unwrap() > c * counts.optimal_residual() as f64);
    }

    #[test]
    fn too_many_candidates() {
        let v = vec![0.2; 25];
        assert!(matches!(
            identify_star(&v, 0.04, &[]),
            Err(LowRankError::TooManyCandidates { .. })
        ));
    }

    #[test]
    fn stream_export() {
        let inst = gen_lowrank_instance(16, Label::Yes, 9).unwrap();
        let file = inst.to_stream_file();
        assert_eq!(file.blocks.len(), 4);
        let x = file.final_vector().unwrap();
        assert_eq!(x.get(inst.star.unwrap()), 3);
        assert_eq!(row_histogram(&inst.rows()).values().sum::<u64>(), 8);
    }
}
