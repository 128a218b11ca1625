//! Streams built from MostlyDISJ instances, and the adversary against
//! linear sketches with few rows.
//!
//! Each player's row becomes a block of +1 updates, so a streaming
//! algorithm run on the blocks in order, with its memory handed from player
//! to player, is a protocol whose cost is the memory size times the number
//! of hand-offs.

use crate::disj::{DisjInstance, Label};
use crate::rng::seeded_rng;
use crate::stream::{FrequencyVector, StreamFile, StreamHeader, StreamUpdate};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `r/n` accepted by [`linear_sketch_adversary`].
pub const ADVERSARY_MAX_RATIO: f64 = 0.29;

/// Constants in the power-law check
/// `c_lo·f₁·i^{−ζ} − a ≤ f_(i) ≤ c_hi·f₁·i^{−ζ} + a`.
pub const POWER_LAW_C_LO: f64 = 0.5;
pub const POWER_LAW_C_HI: f64 = 4.0;
pub const POWER_LAW_ADDITIVE: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ReductionError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("instance has (k={got_k}, l={got_l}) but the reduction needs (k={k}, l={l})")]
    InstanceMismatch {
        k: usize,
        l: usize,
        got_k: usize,
        got_l: usize,
    },
    #[error("r/n = {ratio:.4} exceeds {max}; the adversary needs r/n ≤ {max}")]
    TooManyRows { ratio: f64, max: f64 },
}

fn ceil_param(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// A reduction output: a preloaded vector plus one block of updates per
/// player, with the instance's ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedStream {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub p: f64,
    pub initial: FrequencyVector,
    pub blocks: Vec<Vec<StreamUpdate>>,
    pub label: Label,
    pub star: Option<usize>,
}

impl ReducedStream {
    pub fn universe(&self) -> usize {
        self.initial.universe()
    }

    /// Replays the initial vector and every block.
    pub fn final_vector(&self) -> FrequencyVector {
        let mut f = self.initial.clone();
        f.apply_all(self.blocks.iter().flatten())
            .expect("blocks stay inside the universe");
        f
    }

    /// The stream as a sequence of +1 updates, the preload expanded first.
    pub fn to_stream_file(&self) -> StreamFile {
        let initial = self
            .initial
            .values()
            .iter()
            .enumerate()
            .flat_map(|(i, &v)| std::iter::repeat_n(StreamUpdate::insert(i), v.max(0) as usize))
            .collect();
        StreamFile {
            header: StreamHeader {
                n: self.n,
                k: self.k,
                l: self.l,
                p: self.p,
                label: Some(self.label),
                universe: self.universe(),
            },
            initial,
            blocks: self.blocks.clone(),
        }
    }

    /// Memory hand-offs in an `passes`-pass simulation: every player passes
    /// the state once per pass.
    pub fn handoffs(&self, passes: usize) -> usize {
        passes * self.k
    }

    /// Lower bound on the state size implied by a lower bound of
    /// `communication` bits on the protocol cost.
    pub fn state_lower_bound(&self, communication: f64, passes: usize) -> f64 {
        communication / self.handoffs(passes) as f64
    }
}

fn blocks_of(instance: &DisjInstance) -> Vec<Vec<StreamUpdate>> {
    instance
        .rows()
        .iter()
        .map(|row| row.iter().map(|&i| StreamUpdate::insert(i)).collect())
        .collect()
}

fn check_instance(instance: &DisjInstance, k: usize, l: usize) -> Result<(), ReductionError> {
    if instance.k() != k || instance.l() != l {
        return Err(ReductionError::InstanceMismatch {
            k,
            l,
            got_k: instance.k(),
            got_l: instance.l(),
        });
    }
    Ok(())
}

/// `(k, l)` for the heavy-hitter reduction: `l = ⌈ε(4n)^{1/p}⌉`, `k = 2l`.
/// Requires `ε ∈ (n^{−1/p}, ½)` and `l ≥ 2`.
pub fn hh_params(n: usize, p: f64, eps: f64) -> Result<(usize, usize), ReductionError> {
    if n == 0 || p.is_nan() || p < 1.0 {
        return Err(ReductionError::InvalidParameters(format!(
            "need n ≥ 1 and p ≥ 1, got n = {n}, p = {p}"
        )));
    }
    let lo = (n as f64).powf(-1.0 / p);
    if !(eps > lo && eps < 0.5) {
        return Err(ReductionError::InvalidParameters(format!(
            "eps = {eps} must lie in ({lo}, 0.5)"
        )));
    }
    let l = ceil_param(eps * (4.0 * n as f64).powf(1.0 / p));
    if l < 2 {
        return Err(ReductionError::InvalidParameters(format!(
            "rounding gives l = {l} < 2"
        )));
    }
    Ok((2 * l, l))
}

/// Preloads `(0ⁿ, 1ⁿ)` on a universe of size `2n` and appends each row as
/// +1 updates on the first `n` coordinates.
pub fn to_hh_stream(
    instance: &DisjInstance,
    p: f64,
    eps: f64,
) -> Result<ReducedStream, ReductionError> {
    let n = instance.n();
    let (k, l) = hh_params(n, p, eps)?;
    check_instance(instance, k, l)?;
    let mut values = vec![0i64; 2 * n];
    values[n..].fill(1);
    Ok(ReducedStream {
        n,
        k,
        l,
        p,
        initial: FrequencyVector::from_values(values),
        blocks: blocks_of(instance),
        label: instance.label(),
        star: instance.star(),
    })
}

/// `(k, l) = (⌈2n^ζ⌉, ⌈n^ζ⌉)` for the power-law reduction.
pub fn powerlaw_params(n: usize, p: f64, zeta: f64) -> Result<(usize, usize), ReductionError> {
    if n == 0 || p.is_nan() || p < 1.0 {
        return Err(ReductionError::InvalidParameters(format!(
            "need n ≥ 1 and p ≥ 1, got n = {n}, p = {p}"
        )));
    }
    if !(zeta > 1.0 / p && zeta <= 1.0) {
        return Err(ReductionError::InvalidParameters(format!(
            "zeta = {zeta} must lie in (1/p, 1] = ({}, 1]",
            1.0 / p
        )));
    }
    let nz = (n as f64).powf(zeta);
    Ok((ceil_param(2.0 * nz), ceil_param(nz)))
}

/// Padding value `⌈2n^ζ·i^{−ζ}⌉` for padding rank `i ∈ [2, n+1]`.
pub fn powerlaw_padding(n: usize, zeta: f64, i: usize) -> i64 {
    ceil_param(2.0 * (n as f64).powf(zeta) * (i as f64).powf(-zeta)) as i64
}

/// Like [`to_hh_stream`] but the second half is preloaded with the
/// power-law padding: coordinate `n + (i − 2)` holds
/// [`powerlaw_padding`]`(i)` for `i = 2, …, n+1`.
pub fn to_powerlaw_stream(
    instance: &DisjInstance,
    p: f64,
    zeta: f64,
) -> Result<ReducedStream, ReductionError> {
    let n = instance.n();
    let (k, l) = powerlaw_params(n, p, zeta)?;
    check_instance(instance, k, l)?;
    let mut values = vec![0i64; 2 * n];
    for i in 2..=n + 1 {
        values[n + i - 2] = powerlaw_padding(n, zeta, i);
    }
    Ok(ReducedStream {
        n,
        k,
        l,
        p,
        initial: FrequencyVector::from_values(values),
        blocks: blocks_of(instance),
        label: instance.label(),
        star: instance.star(),
    })
}

/// `H_s = Σ_{i≥1} i^{−s}` for `s > 1`, by summing the first terms and
/// closing with an Euler–Maclaurin tail.
pub fn zeta_sum(s: f64) -> f64 {
    assert!(s > 1.0, "the series diverges for s ≤ 1");
    const N: usize = 1000;
    let head: f64 = (1..N).rev().map(|i| (i as f64).powf(-s)).sum();
    let nf = N as f64;
    let tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * nf.powf(-s - 3.0) / 720.0;
    head + tail
}

/// Threshold `1 / (2 + 2H_{pζ})` on `ε^p` below which the star of a YES
/// power-law stream is an ε-ℓp heavy hitter.
pub fn powerlaw_eps_p_bound(p: f64, zeta: f64) -> f64 {
    1.0 / (2.0 + 2.0 * zeta_sum(p * zeta))
}

/// `(k, l)` for F_p estimation: `l = ⌈(2n)^{1/p}⌉`, `k = 2l`, so that
/// `l^p ≥ 2n`.
pub fn fp_params(n: usize, p: f64) -> Result<(usize, usize), ReductionError> {
    if n == 0 || p.is_nan() || p < 1.0 {
        return Err(ReductionError::InvalidParameters(format!(
            "need n ≥ 1 and p ≥ 1, got n = {n}, p = {p}"
        )));
    }
    let mut l = ceil_param((2.0 * n as f64).powf(1.0 / p)).max(1);
    while (l as f64).powf(p) < 2.0 * n as f64 {
        l += 1;
    }
    Ok((2 * l, l))
}

/// Rows as +1 updates over `[n]` with no preload.
pub fn to_fp_stream(instance: &DisjInstance, p: f64) -> Result<ReducedStream, ReductionError> {
    let n = instance.n();
    let (k, l) = fp_params(n, p)?;
    check_instance(instance, k, l)?;
    Ok(ReducedStream {
        n,
        k,
        l,
        p,
        initial: FrequencyVector::zeros(n),
        blocks: blocks_of(instance),
        label: instance.label(),
        star: instance.star(),
    })
}

/// `F_p = Σ |f_i|^p`.
pub fn compute_fp(f: &FrequencyVector, p: f64) -> f64 {
    f.fp_moment(p)
}

/// Sorted magnitudes checked against a power law with exponent `zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawVector {
    pub zeta: f64,
    pub values: Vec<u64>,
}

/// A rank whose value falls outside the power-law envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawViolation {
    pub rank: usize,
    pub value: u64,
    pub low: f64,
    pub high: f64,
}

impl PowerLawVector {
    pub fn from_frequencies(f: &FrequencyVector, zeta: f64) -> Self {
        let mut values: Vec<u64> = f.values().iter().map(|v| v.unsigned_abs()).collect();
        values.sort_unstable_by(|a, b| b.cmp(a));
        PowerLawVector { zeta, values }
    }

    /// Checks every rank `i` (1-based) against
    /// `[c_lo·f₁·i^{−ζ} − a, c_hi·f₁·i^{−ζ} + a]`.
    pub fn check(&self) -> Result<(), PowerLawViolation> {
        let Some(&top) = self.values.first() else {
            return Ok(());
        };
        for (idx, &v) in self.values.iter().enumerate() {
            let scale = top as f64 * ((idx + 1) as f64).powf(-self.zeta);
            let low = POWER_LAW_C_LO * scale - POWER_LAW_ADDITIVE;
            let high = POWER_LAW_C_HI * scale + POWER_LAW_ADDITIVE;
            if (v as f64) < low || (v as f64) > high {
                return Err(PowerLawViolation {
                    rank: idx + 1,
                    value: v,
                    low,
                    high,
                });
            }
        }
        Ok(())
    }
}

/// Two nonnegative vectors a sketch `M` cannot tell apart although `istar`
/// is a ¼-ℓ₂ heavy hitter of `x1` and has frequency 0 in `x2`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryPair {
    pub istar: usize,
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
    /// Orthonormal basis of the row space of `M`, one basis vector per column.
    pub basis: DMatrix<f64>,
}

/// Builds the pair for an `r × n` sketch matrix with `r/n ≤ 0.29`.
///
/// With `P` the projection onto the row space of `M`, pick the coordinate
/// `i*` minimizing `‖P e_i‖`, set `v = e_{i*} − P e_{i*}`, `w_j = |v_j|` for
/// `j ≠ i*` and `w_{i*} = 0`; then `x1 = w + v` and `x2 = w`.
pub fn linear_sketch_adversary(m: &DMatrix<f64>) -> Result<AdversaryPair, ReductionError> {
    let (r, n) = m.shape();
    if n == 0 {
        return Err(ReductionError::InvalidParameters(
            "matrix has no columns".into(),
        ));
    }
    let ratio = r as f64 / n as f64;
    if ratio > ADVERSARY_MAX_RATIO {
        return Err(ReductionError::TooManyRows {
            ratio,
            max: ADVERSARY_MAX_RATIO,
        });
    }
    let basis = row_space_basis(m);
    let leverage: Vec<f64> = (0..n).map(|i| basis.row(i).norm_squared()).collect();
    let istar = (0..n)
        .min_by(|&a, &b| leverage[a].total_cmp(&leverage[b]).then(a.cmp(&b)))
        .expect("n ≥ 1");
    let projected = &basis * basis.row(istar).transpose();
    let mut v = -projected;
    v[istar] += 1.0;
    let mut w = v.map(f64::abs);
    w[istar] = 0.0;
    let x1 = &w + &v;
    Ok(AdversaryPair {
        istar,
        x1,
        x2: w,
        basis,
    })
}

/// Orthonormal basis of the row space, by QR of `Mᵀ`; directions with a
/// negligible diagonal entry in `R` are dropped.
fn row_space_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, n) = m.shape();
    if r == 0 {
        return DMatrix::zeros(n, 0);
    }
    let qr = m.transpose().qr();
    let q = qr.q();
    let rmat = qr.r();
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    let keep: Vec<usize> = (0..r.min(n))
        .filter(|&c| rmat[(c, c)].abs() > 1e-10 * scale)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, c| q[(i, keep[c])])
}

/// Random `r × n` matrix with orthonormal rows.
pub fn random_orthonormal_rows(r: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let g = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q().transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disj::{adversarial_no, adversarial_yes};

    #[test]
    fn hh_stream_shapes() {
        let (k, l) = hh_params(64, 2.0, 0.25).unwrap();
        assert_eq!((k, l), (8, 4));
        let yes = adversarial_yes(64, k, l, 1).unwrap();
        let s = to_hh_stream(&yes, 2.0, 0.25).unwrap();
        let f = s.final_vector();
        let star = s.star.unwrap();
        assert_eq!(f.get(star), 4);
        assert!(f.is_heavy_hitter(star, 0.25, 2.0));
        let no = adversarial_no(64, k, l, 1).unwrap();
        let f = to_hh_stream(&no, 2.0, 0.25).unwrap().final_vector();
        assert!(f.values()[..64].iter().all(|&v| v <= 1));
        assert!(f.fp_moment(2.0) >= 64.0);
        assert!(hh_params(64, 2.0, 0.1).is_err());
        assert!(hh_params(64, 2.0, 0.5).is_err());
    }

    #[test]
    fn empty_instance_leaves_preload() {
        let (k, l) = hh_params(16, 1.0, 0.2).unwrap();
        let inst = DisjInstance::new(16, k, l, vec![vec![]; k]).unwrap();
        let s = to_hh_stream(&inst, 1.0, 0.2).unwrap();
        assert_eq!(s.final_vector(), s.initial);
    }

    #[test]
    fn fp_parameters() {
        assert_eq!(fp_params(128, 2.0).unwrap(), (32, 16));
        let (_, l) = fp_params(100, 3.0).unwrap();
        assert!((l as f64).powi(3) >= 200.0);
        assert_eq!(compute_fp(&FrequencyVector::zeros(4), 2.0), 0.0);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta_sum(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert!((zeta_sum(1.5) - 2.612_375_348_685_488).abs() < 1e-12);
        assert!((zeta_sum(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-12);
    }

    #[test]
    fn powerlaw_padding_is_power_law() {
        let n = 256;
        let (k, l) = powerlaw_params(n, 2.0, 0.75).unwrap();
        assert_eq!((k, l), (128, 64));
        let inst = adversarial_no(n, k, l, 3).unwrap();
        let f = to_powerlaw_stream(&inst, 2.0, 0.75).unwrap().final_vector();
        assert!(PowerLawVector::from_frequencies(&f, 0.75).check().is_ok());
        assert!(powerlaw_params(n, 2.0, 0.5).is_err());
    }

    #[test]
    fn adversary_on_basis_rows() {
        let m = DMatrix::from_fn(3, 20, |i, j| (i == j) as u8 as f64);
        let pair = linear_sketch_adversary(&m).unwrap();
        assert_eq!(pair.istar, 3);
        let mut e = DVector::zeros(20);
        e[3] = 1.0;
        assert_eq!(pair.x1, e);
        assert_eq!(pair.x2, DVector::zeros(20));
        assert!(linear_sketch_adversary(&DMatrix::zeros(6, 20)).is_err());
    }

    #[test]
    fn adversary_on_random_rows() {
        let (r, n) = (8, 64);
        let m = random_orthonormal_rows(r, n, 5);
        assert!((&m * m.transpose() - DMatrix::identity(r, r)).norm() < 1e-10);
        let pair = linear_sketch_adversary(&m).unwrap();
        assert!(pair.x1.iter().all(|&x| x >= 0.0));
        assert!((&m * (&pair.x1 - &pair.x2)).norm() <= 1e-9);
        assert!(pair.x1[pair.istar].powi(2) >= 0.5);
        assert!(pair.x1.norm_squared() <= 4.0);
        assert_eq!(pair.x2[pair.istar], 0.0);
    }
}
