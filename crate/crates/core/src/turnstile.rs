//! Deterministic ℓ₂ heavy hitters for ±1 turnstile streams of bounded
//! length.
//!
//! Three summaries run side by side: Misra–Gries over the insertions,
//! Misra–Gries over the deletions and an S-sparse syndrome sketch. Their
//! difference `x̂ = x̂⁺ − x̂⁻` satisfies `‖x̂ − x‖∞ ≤ max(P, N)/S`, and the
//! sketch recovers `x` exactly whenever `‖x‖₀ ≤ S`.
//!
//! Sketch updates are collected per index in a buffer of at most `S`
//! entries and folded into the syndromes in one batch when it overflows or
//! when a query needs them.

use crate::sketches::MisraGries;
use crate::sparse_recovery::{DecodeFailure, RecoveryError, SparseVector, SyndromeSketch};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

/// Every configuration uses at most `WORDS_CONSTANT · (L/ε)^{2/3}` words.
pub const WORDS_CONSTANT: f64 = 24.0;
/// Scalar fields counted by [`BoundedTurnstileHH::words`].
const SCALAR_WORDS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum TurnstileError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("stream length bound {0} reached")]
    LengthExceeded(u64),
    #[error("update delta must be +1 or -1, got {0}")]
    BadDelta(i64),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("strict-turnstile promise broken: {0}")]
    PromiseBroken(String),
    #[error("strict-turnstile promise broken: decoding failed with ‖x‖₁ ≤ S ({0})")]
    DecodeUnderPromise(DecodeFailure),
}

/// Which rule produced a strict-mode answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrictBranch {
    /// `‖x‖₁ ≤ S`: exact heavy hitters of the decoded vector.
    Exact,
    /// `‖x‖₁ > S`: items whose estimate exceeds `3L/S`.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrictOutput {
    pub items: Vec<usize>,
    pub branch: StrictBranch,
}

/// Which vector the ℓ∞ query returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinfSource {
    Decoded,
    Summaries,
}

/// Sparse estimate `ẑ` of the frequency vector with `‖ẑ − x‖∞ ≤ error_bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinfEstimate {
    pub values: BTreeMap<usize, i64>,
    pub source: LinfSource,
    pub error_bound: f64,
}

impl LinfEstimate {
    pub fn get(&self, index: usize) -> i64 {
        self.values.get(&index).copied().unwrap_or(0)
    }
}

/// Heavy-hitter summary for streams with at most `length_bound` updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TurnstileState", into = "TurnstileState")]
pub struct BoundedTurnstileHH {
    eps: f64,
    length_bound: u64,
    capacity: usize,
    mg_pos: MisraGries,
    mg_neg: MisraGries,
    sketch: SyndromeSketch,
    pending: HashMap<usize, i64>,
    positives: u64,
    negatives: u64,
}

/// Serialized form; the pending buffer is sorted by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnstileState {
    eps: f64,
    length_bound: u64,
    capacity: usize,
    mg_pos: MisraGries,
    mg_neg: MisraGries,
    sketch: SyndromeSketch,
    pending: Vec<(usize, i64)>,
    positives: u64,
    negatives: u64,
}

impl From<BoundedTurnstileHH> for TurnstileState {
    fn from(h: BoundedTurnstileHH) -> Self {
        let mut pending: Vec<(usize, i64)> = h.pending.into_iter().collect();
        pending.sort_unstable();
        TurnstileState {
            eps: h.eps,
            length_bound: h.length_bound,
            capacity: h.capacity,
            mg_pos: h.mg_pos,
            mg_neg: h.mg_neg,
            sketch: h.sketch,
            pending,
            positives: h.positives,
            negatives: h.negatives,
        }
    }
}

impl TryFrom<TurnstileState> for BoundedTurnstileHH {
    type Error = TurnstileError;
    fn try_from(s: TurnstileState) -> Result<Self, Self::Error> {
        let bad = |m: String| Err(TurnstileError::InvalidParameters(m));
        if s.mg_pos.capacity() != s.capacity
            || s.mg_neg.capacity() != s.capacity
            || s.sketch.sparsity() != s.capacity
        {
            return bad("component capacities disagree".into());
        }
        if s.pending.len() > s.capacity || s.pending.iter().any(|&(i, _)| i >= s.sketch.universe())
        {
            return bad("pending buffer is too long or out of range".into());
        }
        if s.mg_pos.processed() != s.positives || s.mg_neg.processed() != s.negatives {
            return bad("update counters disagree with the summaries".into());
        }
        if s.positives + s.negatives > s.length_bound {
            return bad("state already exceeds its length bound".into());
        }
        Ok(BoundedTurnstileHH {
            eps: s.eps,
            length_bound: s.length_bound,
            capacity: s.capacity,
            mg_pos: s.mg_pos,
            mg_neg: s.mg_neg,
            sketch: s.sketch,
            pending: s.pending.into_iter().collect(),
            positives: s.positives,
            negatives: s.negatives,
        })
    }
}

fn capacity_for(length_bound: u64, eps: f64, factor: f64) -> usize {
    (factor * (length_bound as f64 / eps).powf(2.0 / 3.0) - 1e-9)
        .ceil()
        .max(1.0) as usize
}

impl BoundedTurnstileHH {
    /// Strict-mode configuration: internally works with `ε/4`, so
    /// `S = ⌈(L/(ε/4))^{2/3}⌉`.
    pub fn new(universe: usize, eps: f64, length_bound: u64) -> Result<Self, TurnstileError> {
        Self::check(eps, length_bound)?;
        Self::with_capacity(
            universe,
            eps,
            length_bound,
            capacity_for(length_bound, eps / 4.0, 1.0),
        )
    }

    /// Configuration for [`query_linf`](Self::query_linf):
    /// `S = ⌈2(L/ε)^{2/3}⌉`.
    pub fn for_linf(universe: usize, eps: f64, length_bound: u64) -> Result<Self, TurnstileError> {
        Self::check(eps, length_bound)?;
        Self::with_capacity(
            universe,
            eps,
            length_bound,
            capacity_for(length_bound, eps, 2.0),
        )
    }

    /// Explicit `S`.
    pub fn with_capacity(
        universe: usize,
        eps: f64,
        length_bound: u64,
        capacity: usize,
    ) -> Result<Self, TurnstileError> {
        Self::check(eps, length_bound)?;
        let mg = MisraGries::new(capacity)
            .map_err(|e| TurnstileError::InvalidParameters(e.to_string()))?;
        Ok(BoundedTurnstileHH {
            eps,
            length_bound,
            capacity,
            mg_pos: mg.clone(),
            mg_neg: mg,
            sketch: SyndromeSketch::new(universe, capacity)?,
            pending: HashMap::with_capacity(capacity + 1),
            positives: 0,
            negatives: 0,
        })
    }

    fn check(eps: f64, length_bound: u64) -> Result<(), TurnstileError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(TurnstileError::InvalidParameters(format!(
                "eps = {eps} must be in (0, 1]"
            )));
        }
        if length_bound == 0 {
            return Err(TurnstileError::InvalidParameters(
                "length bound must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn length_bound(&self) -> u64 {
        self.length_bound
    }

    pub fn universe(&self) -> usize {
        self.sketch.universe()
    }

    pub fn positives(&self) -> u64 {
        self.positives
    }

    pub fn negatives(&self) -> u64 {
        self.negatives
    }

    /// Observed stream length `L = P + N`.
    pub fn length(&self) -> u64 {
        self.positives + self.negatives
    }

    /// Processes `x_index += delta` for `delta = ±1`.
    pub fn update(&mut self, index: usize, delta: i64) -> Result<(), TurnstileError> {
        if index >= self.universe() {
            return Err(RecoveryError::IndexOutOfRange {
                index,
                universe: self.universe(),
            }
            .into());
        }
        if self.length() >= self.length_bound {
            return Err(TurnstileError::LengthExceeded(self.length_bound));
        }
        match delta {
            1 => {
                self.positives += 1;
                self.mg_pos.update(index as u64);
            }
            -1 => {
                self.negatives += 1;
                self.mg_neg.update(index as u64);
            }
            d => return Err(TurnstileError::BadDelta(d)),
        }
        let slot = self.pending.entry(index).or_insert(0);
        *slot += delta;
        if *slot == 0 {
            self.pending.remove(&index);
        } else if self.pending.len() > self.capacity {
            self.flush()?;
        }
        Ok(())
    }

    fn pending_sorted(&self) -> Vec<(usize, i64)> {
        let mut v: Vec<(usize, i64)> = self.pending.iter().map(|(&i, &d)| (i, d)).collect();
        v.sort_unstable();
        v
    }

    fn flush(&mut self) -> Result<(), TurnstileError> {
        let batch = self.pending_sorted();
        self.sketch.apply_batch(&batch)?;
        self.pending.clear();
        Ok(())
    }

    /// The syndrome sketch including any buffered updates.
    pub fn current_sketch(&self) -> SyndromeSketch {
        let mut sk = self.sketch.clone();
        if !self.pending.is_empty() {
            sk.apply_batch(&self.pending_sorted())
                .expect("pending indices were range-checked");
        }
        sk
    }

    /// `x̂_i = x̂⁺_i − x̂⁻_i`.
    pub fn estimate(&self, index: usize) -> i64 {
        self.mg_pos.estimate(index as u64) as i64 - self.mg_neg.estimate(index as u64) as i64
    }

    /// All nonzero `x̂_i`.
    pub fn estimates(&self) -> BTreeMap<usize, i64> {
        let mut out = BTreeMap::new();
        for (i, c) in self.mg_pos.iter() {
            *out.entry(i as usize).or_insert(0) += c as i64;
        }
        for (i, c) in self.mg_neg.iter() {
            *out.entry(i as usize).or_insert(0) -= c as i64;
        }
        out.retain(|_, v| *v != 0);
        out
    }

    /// `max(P, N) / S`, the bound on `‖x̂ − x‖∞`.
    pub fn estimate_error(&self) -> f64 {
        self.positives.max(self.negatives) as f64 / self.capacity as f64
    }

    /// Heavy hitters under the strict-turnstile promise (`x ≥ 0` throughout):
    /// contains every ε-ℓ₂ heavy hitter.
    ///
    /// When `P − N ≤ S` the vector is decoded and its exact ε-heavy hitters
    /// are returned; otherwise the items with `x̂_i > 3L/S`.
    pub fn query_strict(&self) -> Result<StrictOutput, TurnstileError> {
        if self.negatives > self.positives {
            return Err(TurnstileError::PromiseBroken(format!(
                "{} deletions exceed {} insertions",
                self.negatives, self.positives
            )));
        }
        let mass = self.positives - self.negatives;
        if mass as usize <= self.capacity {
            let y = self
                .current_sketch()
                .decode_with_bound(mass as usize)
                .map_err(TurnstileError::DecodeUnderPromise)?;
            if let Some(&(i, v)) = y.entries.iter().find(|e| e.1 < 0) {
                return Err(TurnstileError::PromiseBroken(format!(
                    "decoded x_{i} = {v} < 0"
                )));
            }
            return Ok(StrictOutput {
                items: exact_heavy_hitters(&y, self.eps),
                branch: StrictBranch::Exact,
            });
        }
        let l = self.length() as i128;
        let s = self.capacity as i128;
        let items = self
            .estimates()
            .into_iter()
            .filter(|&(_, v)| v as i128 * s > 3 * l)
            .map(|(i, _)| i)
            .collect();
        Ok(StrictOutput {
            items,
            branch: StrictBranch::Threshold,
        })
    }

    /// Estimate `ẑ` with `‖ẑ − x‖∞ ≤ 2L/S`, valid without the strict
    /// promise. Returns the decoded vector `ŷ` when decoding succeeds and
    /// `‖ŷ − x̂‖∞ ≤ L/S`, and `x̂` otherwise.
    pub fn query_linf(&self) -> LinfEstimate {
        let l = self.length() as i128;
        let s = self.capacity as i128;
        let error_bound = 2.0 * self.length() as f64 / self.capacity as f64;
        let approx = self.estimates();
        if let Ok(y) = self.current_sketch().decode() {
            let decoded: BTreeMap<usize, i64> = y.entries.iter().copied().collect();
            let close = decoded.keys().chain(approx.keys()).all(|i| {
                let d = decoded.get(i).copied().unwrap_or(0) as i128
                    - approx.get(i).copied().unwrap_or(0) as i128;
                d.abs() * s <= l
            });
            if close {
                return LinfEstimate {
                    values: decoded,
                    source: LinfSource::Decoded,
                    error_bound,
                };
            }
        }
        LinfEstimate {
            values: approx,
            source: LinfSource::Summaries,
            error_bound,
        }
    }

    /// Machine words of state: both summaries, the syndromes, the pending
    /// buffer at full size, and a few scalars.
    pub fn words(&self) -> usize {
        self.mg_pos.words()
            + self.mg_neg.words()
            + self.sketch.words()
            + 2 * self.capacity
            + SCALAR_WORDS
    }

    /// `WORDS_CONSTANT · (L/ε)^{2/3}`.
    pub fn words_bound(length_bound: u64, eps: f64) -> f64 {
        WORDS_CONSTANT * (length_bound as f64 / eps).powf(2.0 / 3.0)
    }
}

/// `{i : y_i ≠ 0, y_i² ≥ ε²‖y‖₂²}`.
fn exact_heavy_hitters(y: &SparseVector, eps: f64) -> Vec<usize> {
    let threshold = eps * eps * y.l2_squared() as f64;
    y.entries
        .iter()
        .filter(|&&(_, v)| v != 0 && ((v as i128 * v as i128) as f64) >= threshold)
        .map(|&(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_formula() {
        let h = BoundedTurnstileHH::new(10, 0.25, 1000).unwrap();
        assert_eq!(h.capacity(), 635);
        let h = BoundedTurnstileHH::for_linf(10, 0.25, 1000).unwrap();
        assert_eq!(h.capacity(), 504);
    }

    #[test]
    fn insertions_only() {
        let mut h = BoundedTurnstileHH::new(100, 0.25, 1000).unwrap();
        for t in 0..300 {
            h.update(if t % 3 == 0 { 7 } else { t % 50 }, 1).unwrap();
        }
        assert_eq!(h.negatives(), 0);
        let out = h.query_strict().unwrap();
        assert_eq!(out.branch, StrictBranch::Exact);
        assert_eq!(out.items, vec![7]);
    }

    #[test]
    fn matched_pairs_cancel() {
        let mut h = BoundedTurnstileHH::new(50, 0.25, 100).unwrap();
        h.update(3, 1).unwrap();
        h.update(3, -1).unwrap();
        assert!(h.current_sketch().syndromes().iter().all(|s| s.is_zero()));
        assert_eq!(h.query_strict().unwrap().items, Vec::<usize>::new());
    }

    #[test]
    fn single_heavy_item() {
        let mut h = BoundedTurnstileHH::new(1000, 0.25, 1000).unwrap();
        for _ in 0..1000 {
            h.update(42, 1).unwrap();
        }
        assert_eq!(h.query_strict().unwrap().items, vec![42]);
        assert_eq!(h.update(1, 1), Err(TurnstileError::LengthExceeded(1000)));
    }

    #[test]
    fn dense_branch_uses_threshold() {
        let mut h = BoundedTurnstileHH::with_capacity(200, 0.25, 100, 20).unwrap();
        for t in 0..60 {
            h.update(t % 20, 1).unwrap();
        }
        for _ in 0..40 {
            h.update(5, 1).unwrap();
        }
        let out = h.query_strict().unwrap();
        assert_eq!(out.branch, StrictBranch::Threshold);
        assert_eq!(out.items, vec![5]);
    }

    #[test]
    fn linf_exact_when_sparse_and_zero_stream() {
        let h = BoundedTurnstileHH::for_linf(100, 0.25, 100).unwrap();
        let z = h.query_linf();
        assert!(z.values.is_empty());
        let mut h = BoundedTurnstileHH::for_linf(100, 0.25, 100).unwrap();
        for (i, d) in [(3, 1), (4, -1), (3, 1), (9, -1)] {
            h.update(i, d).unwrap();
        }
        let z = h.query_linf();
        assert_eq!(z.source, LinfSource::Decoded);
        assert_eq!(z.values, BTreeMap::from([(3, 2), (4, -1), (9, -1)]));
    }

    #[test]
    fn flushes_keep_sketch_exact() {
        let mut h = BoundedTurnstileHH::with_capacity(500, 0.5, 2000, 10).unwrap();
        let mut x = vec![0i64; 500];
        for t in 0..2000usize {
            let i = (t * 37 + t / 7) % 500;
            let d = if t % 5 == 0 { -1 } else { 1 };
            h.update(i, d).unwrap();
            x[i] += d;
        }
        let mut direct = SyndromeSketch::new(500, 10).unwrap();
        for (i, &v) in x.iter().enumerate() {
            if v != 0 {
                direct.update(i, v).unwrap();
            }
        }
        assert_eq!(h.current_sketch().syndromes(), direct.syndromes());
    }

    #[test]
    fn state_round_trip() {
        let mut h = BoundedTurnstileHH::new(64, 0.25, 500).unwrap();
        for t in 0..200 {
            h.update(t % 64, if t % 4 == 3 { -1 } else { 1 }).unwrap();
        }
        let json = serde_json::to_string(&h).unwrap();
        let back: BoundedTurnstileHH = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn word_budget() {
        for (l, eps) in [
            (1000u64, 0.25),
            (1000, 0.125),
            (100_000, 0.25),
            (100_000, 0.125),
        ] {
            let h = BoundedTurnstileHH::new(10, eps, l).unwrap();
            assert!((h.words() as f64) <= BoundedTurnstileHH::words_bound(l, eps));
            let h = BoundedTurnstileHH::for_linf(10, eps, l).unwrap();
            assert!((h.words() as f64) <= BoundedTurnstileHH::words_bound(l, eps));
        }
    }
}
