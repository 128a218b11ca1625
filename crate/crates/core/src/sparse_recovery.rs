//! Exact S-sparse recovery from 2S power-sum syndromes.
//!
//! Coordinate `i` is tagged with the evaluation point `α_i = g^i` and the
//! sketch stores `s_j = Σ_i x_i α_i^j` for `j < 2S`. Decoding runs
//! Berlekamp–Massey for the error-locator `Λ(z) = Π(1 − α_i z)`, scans all of
//! `[n]` for its roots, solves for the values and re-encodes the result; any
//! mismatch is reported as a failure rather than a wrong answer.

use crate::field::{batch_inverse, eval_geometric, poly_eval, poly_mul, Fp, GENERATOR, MODULUS};
use crate::stream::FrequencyVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Above this many recovered values, Forney's formula evaluated by chirp-z
/// replaces the quadratic Vandermonde solve.
const FORNEY_THRESHOLD: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("universe size {0} must be in [1, q − 1)")]
    BadUniverse(usize),
    #[error("sparsity must be positive")]
    ZeroSparsity,
    #[error("index {index} outside universe of size {universe}")]
    IndexOutOfRange { index: usize, universe: usize },
    #[error("sketch shapes differ: (n={0}, S={1}) vs (n={2}, S={3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("malformed serialized sketch: {0}")]
    Malformed(String),
}

/// Why a decode attempt produced no vector.
#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
pub enum DecodeFailure {
    #[error("error locator has degree {degree}, above the bound {bound}")]
    TooDense { degree: usize, bound: usize },
    #[error("error locator of degree {expected} has {found} roots in the universe")]
    RootCountMismatch { expected: usize, found: usize },
    #[error("recovered value at index {0} is zero")]
    ZeroValue(usize),
    #[error("re-encoded syndromes differ from the sketch")]
    VerificationMismatch,
}

/// A decoded vector: nonzero `(index, value)` pairs in increasing index order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(usize, i64)>,
}

impl SparseVector {
    pub fn get(&self, index: usize) -> i64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l2_squared(&self) -> u128 {
        self.entries
            .iter()
            .map(|&(_, v)| (v as i128 * v as i128) as u128)
            .sum()
    }

    pub fn to_frequency_vector(&self, universe: usize) -> FrequencyVector {
        let mut f = FrequencyVector::zeros(universe);
        for &(i, v) in &self.entries {
            f.add(i, v).expect("decoded index lies in the universe");
        }
        f
    }
}

/// Linear sketch of a vector over `[universe]` supporting exact recovery of
/// vectors with at most `sparsity` nonzeros.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeSketch {
    universe: usize,
    sparsity: usize,
    syndromes: Vec<Fp>,
    updates: u64,
}

/// Evaluation point of coordinate `index`.
pub fn evaluation_point(index: usize) -> Fp {
    Fp::generator().pow(index as u64)
}

/// Syndromes `Σ_t v_t α_{i_t}^j`, `j < count`, of sparse `(index, value)`
/// entries. Switches to chirp-z when the index span is small enough.
pub fn encode_syndromes(entries: &[(usize, Fp)], count: usize) -> Vec<Fp> {
    let mut out = vec![Fp::ZERO; count];
    if entries.is_empty() || count == 0 {
        return out;
    }
    let lo = entries.iter().map(|e| e.0).min().expect("nonempty");
    let hi = entries.iter().map(|e| e.0).max().expect("nonempty");
    let span = hi - lo + 1;
    let direct_cost = entries.len() as f64 * count as f64;
    let size = (2 * span + count).next_power_of_two() as f64;
    if direct_cost <= 3.0 * size * size.log2() + 4.0 * size {
        for &(i, v) in entries {
            let alpha = evaluation_point(i);
            let mut term = v;
            for s in out.iter_mut() {
                *s += term;
                term *= alpha;
            }
        }
        return out;
    }
    let mut coeffs = vec![Fp::ZERO; span];
    for &(i, v) in entries {
        coeffs[i - lo] += v;
    }
    // Σ_t c_t g^{(lo+t)j} = g^{lo·j} · Σ_t c_t (g^j)^t
    let g = Fp::generator();
    let shifted = eval_geometric(&coeffs, Fp::ONE, g, count);
    let step = g.pow(lo as u64);
    let mut scale = Fp::ONE;
    for (o, v) in out.iter_mut().zip(shifted) {
        *o = v * scale;
        scale *= step;
    }
    out
}

impl SyndromeSketch {
    pub fn new(universe: usize, sparsity: usize) -> Result<Self, RecoveryError> {
        if universe == 0 || universe as u64 >= MODULUS - 1 {
            return Err(RecoveryError::BadUniverse(universe));
        }
        if sparsity == 0 {
            return Err(RecoveryError::ZeroSparsity);
        }
        Ok(SyndromeSketch {
            universe,
            sparsity,
            syndromes: vec![Fp::ZERO; 2 * sparsity],
            updates: 0,
        })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn syndromes(&self) -> &[Fp] {
        &self.syndromes
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Machine words held by the syndromes.
    pub fn words(&self) -> usize {
        self.syndromes.len()
    }

    fn check_index(&self, index: usize) -> Result<(), RecoveryError> {
        if index >= self.universe {
            Err(RecoveryError::IndexOutOfRange {
                index,
                universe: self.universe,
            })
        } else {
            Ok(())
        }
    }

    /// `s_j += delta · α_index^j` for every `j`.
    pub fn update(&mut self, index: usize, delta: i64) -> Result<(), RecoveryError> {
        self.check_index(index)?;
        self.updates += 1;
        let alpha = evaluation_point(index);
        let mut term = Fp::from_i64(delta);
        for s in self.syndromes.iter_mut() {
            *s += term;
            term *= alpha;
        }
        Ok(())
    }

    /// Applies many `(index, delta)` changes at once; equivalent to calling
    /// [`update`](Self::update) for each.
    pub fn apply_batch(&mut self, changes: &[(usize, i64)]) -> Result<(), RecoveryError> {
        for &(i, _) in changes {
            self.check_index(i)?;
        }
        let entries: Vec<(usize, Fp)> = changes
            .iter()
            .filter(|c| c.1 != 0)
            .map(|&(i, d)| (i, Fp::from_i64(d)))
            .collect();
        let delta = encode_syndromes(&entries, self.syndromes.len());
        for (s, d) in self.syndromes.iter_mut().zip(delta) {
            *s += d;
        }
        self.updates += changes.len() as u64;
        Ok(())
    }

    /// Componentwise sum; the result sketches the sum of the two vectors.
    pub fn merge(&mut self, other: &SyndromeSketch) -> Result<(), RecoveryError> {
        if self.universe != other.universe || self.sparsity != other.sparsity {
            return Err(RecoveryError::ShapeMismatch(
                self.universe,
                self.sparsity,
                other.universe,
                other.sparsity,
            ));
        }
        for (a, &b) in self.syndromes.iter_mut().zip(&other.syndromes) {
            *a += b;
        }
        self.updates += other.updates;
        Ok(())
    }

    /// Recovers `x` if `‖x‖₀ ≤ S`.
    pub fn decode(&self) -> Result<SparseVector, DecodeFailure> {
        self.decode_with_bound(self.sparsity)
    }

    /// Recovers `x` assuming `‖x‖₀ ≤ bound ≤ S`: Berlekamp–Massey only reads
    /// the first `2·bound` syndromes, while the re-encoding check compares
    /// all `2S`.
    pub fn decode_with_bound(&self, bound: usize) -> Result<SparseVector, DecodeFailure> {
        let bound = bound.min(self.sparsity);
        if self.syndromes.iter().all(|s| s.is_zero()) {
            return Ok(SparseVector::default());
        }
        let locator = berlekamp_massey(&self.syndromes[..2 * bound], bound)?;
        let degree = locator.len() - 1;
        if degree == 0 {
            return Err(DecodeFailure::VerificationMismatch);
        }
        let g_inv = Fp::generator().inverse().expect("generator is nonzero");
        let at_points = eval_geometric(&locator, Fp::ONE, g_inv, self.universe);
        let roots: Vec<usize> = (0..self.universe)
            .filter(|&i| at_points[i].is_zero())
            .collect();
        if roots.len() != degree {
            return Err(DecodeFailure::RootCountMismatch {
                expected: degree,
                found: roots.len(),
            });
        }
        let values = if degree <= FORNEY_THRESHOLD {
            solve_values_vandermonde(&locator, &roots, &self.syndromes[..degree])
        } else {
            solve_values_forney(&locator, &roots, &self.syndromes[..degree], self.universe)
        };
        let mut entries = Vec::with_capacity(degree);
        for (&i, &v) in roots.iter().zip(&values) {
            if v.is_zero() {
                return Err(DecodeFailure::ZeroValue(i));
            }
            entries.push((i, v));
        }
        if encode_syndromes(&entries, self.syndromes.len()) != self.syndromes {
            return Err(DecodeFailure::VerificationMismatch);
        }
        Ok(SparseVector {
            entries: entries
                .into_iter()
                .map(|(i, v)| (i, v.to_signed()))
                .collect(),
        })
    }

    /// `q`, `S`, `g` as little-endian u64, then the `2S` syndromes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.syndromes.len());
        out.extend_from_slice(&MODULUS.to_le_bytes());
        out.extend_from_slice(&(self.sparsity as u64).to_le_bytes());
        out.extend_from_slice(&GENERATOR.to_le_bytes());
        for s in &self.syndromes {
            out.extend_from_slice(&s.value().to_le_bytes());
        }
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes); the universe is not part of
    /// the encoding and must be supplied.
    pub fn from_bytes(bytes: &[u8], universe: usize) -> Result<Self, RecoveryError> {
        let word = |k: usize| -> Result<u64, RecoveryError> {
            bytes
                .get(8 * k..8 * k + 8)
                .map(|b| u64::from_le_bytes(b.try_into().expect("eight bytes")))
                .ok_or_else(|| RecoveryError::Malformed("truncated".into()))
        };
        if word(0)? != MODULUS || word(2)? != GENERATOR {
            return Err(RecoveryError::Malformed(
                "field modulus or generator differs".into(),
            ));
        }
        let sparsity = word(1)? as usize;
        if bytes.len() != 24 + 16 * sparsity {
            return Err(RecoveryError::Malformed(format!(
                "expected {} bytes, got {}",
                24 + 16 * sparsity,
                bytes.len()
            )));
        }
        let mut sketch = SyndromeSketch::new(universe, sparsity)?;
        for j in 0..2 * sparsity {
            sketch.syndromes[j] = Fp::try_from(word(3 + j)?).map_err(RecoveryError::Malformed)?;
        }
        Ok(sketch)
    }
}

/// Shortest LFSR generating `seq`, as the connection polynomial
/// `Λ(z) = 1 + Λ_1 z + … + Λ_L z^L`. Stops with [`DecodeFailure::TooDense`]
/// as soon as the length exceeds `bound`.
pub fn berlekamp_massey(seq: &[Fp], bound: usize) -> Result<Vec<Fp>, DecodeFailure> {
    let mut c = vec![Fp::ONE];
    let mut b = vec![Fp::ONE];
    let mut len = 0usize;
    let mut shift = 1usize;
    let mut last_disc = Fp::ONE;
    for n in 0..seq.len() {
        let mut d = seq[n];
        for i in 1..=len.min(c.len() - 1) {
            d += c[i] * seq[n - i];
        }
        if d.is_zero() {
            shift += 1;
            continue;
        }
        let coef = d * last_disc
            .inverse()
            .expect("previous discrepancy is nonzero");
        let needed = b.len() + shift;
        let prev = if 2 * len <= n { Some(c.clone()) } else { None };
        if c.len() < needed {
            c.resize(needed, Fp::ZERO);
        }
        for (i, &bi) in b.iter().enumerate() {
            c[i + shift] -= coef * bi;
        }
        match prev {
            Some(t) => {
                len = n + 1 - len;
                if len > bound {
                    return Err(DecodeFailure::TooDense { degree: len, bound });
                }
                b = t;
                last_disc = d;
                shift = 1;
            }
            None => shift += 1,
        }
    }
    c.resize(len + 1, Fp::ZERO);
    Ok(c)
}

/// Values `c_t` with `Σ_t c_t β_t^j = s_j` for `j < ν`, where
/// `β_t = α_{roots[t]}`, by synthetic division of the master polynomial
/// `M(z) = Π(z − β_t)`. Quadratic in `ν`.
pub fn solve_values_vandermonde(locator: &[Fp], roots: &[usize], syndromes: &[Fp]) -> Vec<Fp> {
    let nu = roots.len();
    // M(z) = z^ν Λ(1/z): coefficient j of M is Λ_{ν−j}.
    let master: Vec<Fp> = (0..=nu).map(|j| locator[nu - j]).collect();
    let mut numerators = Vec::with_capacity(nu);
    let mut denominators = Vec::with_capacity(nu);
    let mut q = vec![Fp::ZERO; nu];
    for &r in roots {
        let beta = evaluation_point(r);
        q[nu - 1] = master[nu];
        for j in (1..nu).rev() {
            q[j - 1] = master[j] + beta * q[j];
        }
        numerators.push(q.iter().zip(syndromes).map(|(&a, &s)| a * s).sum::<Fp>());
        denominators.push(poly_eval(&q, beta));
    }
    batch_inverse(&mut denominators);
    numerators
        .iter()
        .zip(&denominators)
        .map(|(&a, &b)| a * b)
        .collect()
}

/// Same system as [`solve_values_vandermonde`], via Forney's formula
/// `c_t = −β_t Ω(β_t⁻¹) / Λ'(β_t⁻¹)` with `Ω = S·Λ mod z^ν`, evaluating
/// `Ω` and `Λ'` at every `α_i⁻¹` with chirp-z.
pub fn solve_values_forney(
    locator: &[Fp],
    roots: &[usize],
    syndromes: &[Fp],
    universe: usize,
) -> Vec<Fp> {
    let nu = roots.len();
    let mut omega = poly_mul(&syndromes[..nu], locator);
    omega.truncate(nu);
    let derivative: Vec<Fp> = (1..locator.len())
        .map(|i| locator[i] * Fp::new(i as u64))
        .collect();
    let g_inv = Fp::generator().inverse().expect("generator is nonzero");
    let count = roots.last().map_or(0, |&r| r + 1).min(universe);
    let omega_at = eval_geometric(&omega, Fp::ONE, g_inv, count);
    let deriv_at = eval_geometric(&derivative, Fp::ONE, g_inv, count);
    let mut denominators: Vec<Fp> = roots.iter().map(|&r| deriv_at[r]).collect();
    batch_inverse(&mut denominators);
    roots
        .iter()
        .zip(&denominators)
        .map(|(&r, &inv)| -(evaluation_point(r) * omega_at[r] * inv))
        .collect()
}

/// Exact sparse representation of a frequency vector, for tests and tools.
pub fn sparse_entries(x: &BTreeMap<usize, i64>) -> Vec<(usize, Fp)> {
    x.iter()
        .filter(|(_, &v)| v != 0)
        .map(|(&i, &v)| (i, Fp::from_i64(v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::seq::IteratorRandom;
    use rand::Rng;

    fn direct_syndromes(x: &BTreeMap<usize, i64>, count: usize) -> Vec<Fp> {
        (0..count)
            .map(|j| {
                x.iter()
                    .map(|(&i, &v)| Fp::from_i64(v) * Fp::generator().pow((i * j) as u64))
                    .sum()
            })
            .collect()
    }

    fn sketch_of(n: usize, s: usize, x: &BTreeMap<usize, i64>) -> SyndromeSketch {
        let mut sk = SyndromeSketch::new(n, s).unwrap();
        for (&i, &v) in x {
            sk.update(i, v).unwrap();
        }
        sk
    }

    #[test]
    fn zero_sketch_decodes_empty() {
        let sk = SyndromeSketch::new(10, 3).unwrap();
        assert_eq!(sk.decode().unwrap(), SparseVector::default());
    }

    #[test]
    fn update_and_inverse_cancel() {
        let mut sk = SyndromeSketch::new(10, 3).unwrap();
        sk.update(4, 1).unwrap();
        assert_eq!(sk.syndromes()[2], evaluation_point(4).pow(2));
        sk.update(4, -1).unwrap();
        assert!(sk.syndromes().iter().all(|s| s.is_zero()));
    }

    #[test]
    fn two_sparse_example() {
        let x = BTreeMap::from([(3usize, 5i64), (7, -2)]);
        let sk = sketch_of(16, 2, &x);
        assert_eq!(sk.syndromes(), direct_syndromes(&x, 4).as_slice());
        assert_eq!(sk.decode().unwrap().entries, vec![(3, 5), (7, -2)]);
    }

    #[test]
    fn batch_matches_single_updates() {
        let mut rng = seeded_rng(9);
        for trial in 0..20 {
            let n = 50 + trial * 37;
            let changes: Vec<(usize, i64)> = (0..rng.random_range(1..200))
                .map(|_| (rng.random_range(0..n), rng.random_range(-3i64..4)))
                .collect();
            let mut a = SyndromeSketch::new(n, 40).unwrap();
            let mut b = a.clone();
            for &(i, d) in &changes {
                a.update(i, d).unwrap();
            }
            b.apply_batch(&changes).unwrap();
            assert_eq!(a.syndromes(), b.syndromes());
        }
    }

    #[test]
    fn exact_recovery_at_full_sparsity() {
        let mut rng = seeded_rng(1);
        for _ in 0..200 {
            let n = rng.random_range(1..600);
            let s = rng.random_range(1..20);
            let support = (0..n).choose_multiple(&mut rng, s.min(n));
            let x: BTreeMap<usize, i64> = support
                .into_iter()
                .map(|i| {
                    (
                        i,
                        if rng.random() {
                            rng.random_range(1..1_000_000)
                        } else {
                            -rng.random_range(1..1_000_000)
                        },
                    )
                })
                .collect();
            let sk = sketch_of(n, s, &x);
            let got = sk.decode().unwrap();
            assert_eq!(got.entries, x.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn over_dense_vectors_fail() {
        let mut rng = seeded_rng(2);
        for _ in 0..200 {
            let n = 300;
            let s = rng.random_range(1..10);
            let x: BTreeMap<usize, i64> = (0..n)
                .choose_multiple(&mut rng, s + 1)
                .into_iter()
                .map(|i| (i, 1))
                .collect();
            assert!(sketch_of(n, s, &x).decode().is_err());
        }
    }

    #[test]
    fn forney_matches_vandermonde() {
        let mut rng = seeded_rng(3);
        for _ in 0..30 {
            let n = 2000;
            let nu = rng.random_range(1..60);
            let mut roots = (0..n).choose_multiple(&mut rng, nu);
            roots.sort_unstable();
            let x: BTreeMap<usize, i64> = roots
                .iter()
                .map(|&i| (i, rng.random_range(1..100)))
                .collect();
            let syn = direct_syndromes(&x, 2 * nu);
            let locator = berlekamp_massey(&syn, nu).unwrap();
            assert_eq!(locator.len(), nu + 1);
            let v1 = solve_values_vandermonde(&locator, &roots, &syn[..nu]);
            let v2 = solve_values_forney(&locator, &roots, &syn[..nu], n);
            assert_eq!(v1, v2);
            let expected: Vec<Fp> = x.values().map(|&v| Fp::from_i64(v)).collect();
            assert_eq!(v1, expected);
        }
    }

    #[test]
    fn large_support_uses_forney_path() {
        let n = 5000;
        let x: BTreeMap<usize, i64> = (0..400)
            .map(|t| (t * 11 + 3, (t as i64 % 7) - 3))
            .filter(|e| e.1 != 0)
            .collect();
        let mut sk = SyndromeSketch::new(n, 400).unwrap();
        let changes: Vec<(usize, i64)> = x.iter().map(|(&i, &v)| (i, v)).collect();
        sk.apply_batch(&changes).unwrap();
        assert_eq!(sk.decode().unwrap().entries, changes);
    }

    #[test]
    fn bounded_decode_reads_prefix() {
        let x = BTreeMap::from([(1usize, 2i64), (9, 1)]);
        let sk = sketch_of(20, 6, &x);
        assert_eq!(
            sk.decode_with_bound(2).unwrap().entries,
            vec![(1, 2), (9, 1)]
        );
        assert!(sk.decode_with_bound(1).is_err());
    }

    #[test]
    fn merge_and_bytes() {
        let a = sketch_of(32, 3, &BTreeMap::from([(1, 1), (2, 2)]));
        let b = sketch_of(32, 3, &BTreeMap::from([(2, -2), (30, 4)]));
        let mut m = a.clone();
        m.merge(&b).unwrap();
        assert_eq!(m.decode().unwrap().entries, vec![(1, 1), (30, 4)]);
        let bytes = m.to_bytes();
        assert_eq!(bytes.len(), 24 + 8 * 6);
        let back = SyndromeSketch::from_bytes(&bytes, 32).unwrap();
        assert_eq!(back.syndromes(), m.syndromes());
        assert!(SyndromeSketch::from_bytes(&bytes[..30], 32).is_err());
        assert!(m.merge(&SyndromeSketch::new(32, 4).unwrap()).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut sk = SyndromeSketch::new(5, 1).unwrap();
        assert!(sk.update(5, 1).is_err());
        assert!(sk.apply_batch(&[(0, 1), (9, 1)]).is_err());
        assert!(SyndromeSketch::new(0, 1).is_err());
        assert!(SyndromeSketch::new(5, 0).is_err());
    }
}
