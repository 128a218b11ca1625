//! MostlyDISJ instances.
//!
//! `k` players each hold a subset of `[n]` (row `j` of a `k × n` bit
//! matrix). NO instances have every column sum at most 1. YES instances have
//! exactly one column, the star, summing to `l` and every other column at
//! most 1.

use crate::rng::seeded_rng;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "NO")]
    No,
    #[serde(rename = "YES")]
    Yes,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "YES",
            Label::No => "NO",
        }
    }

    pub fn is_yes(self) -> bool {
        self == Label::Yes
    }

    pub fn from_bool(yes: bool) -> Label {
        if yes {
            Label::Yes
        } else {
            Label::No
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "YES" => Ok(Label::Yes),
            "NO" => Ok(Label::No),
            _ => Err(format!("label must be YES or NO, got {s:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("{rows} rows given but k = {k}")]
    WrongRowCount { rows: usize, k: usize },
    #[error("player {player} holds element {element} outside [0, {n})")]
    ElementOutOfRange {
        player: usize,
        element: usize,
        n: usize,
    },
    #[error("player {player} lists element {element} twice")]
    DuplicateElement { player: usize, element: usize },
    #[error(transparent)]
    Promise(#[from] PromiseViolation),
    #[error("infeasible packing: {0}")]
    Infeasible(String),
}

/// Columns breaking the MostlyDISJ promise, as `(column, weight)` pairs.
#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
#[error("promise violated at columns {columns:?} (l = {l})")]
pub struct PromiseViolation {
    pub l: usize,
    pub columns: Vec<(usize, usize)>,
}

/// Outcome of a successful promise check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub label: Label,
    pub star: Option<usize>,
}

/// Column weights of the bit matrix given by `rows` over `[n]`.
/// Out-of-range elements are ignored.
pub fn column_sums(n: usize, rows: &[Vec<usize>]) -> Vec<usize> {
    let mut sums = vec![0usize; n];
    for row in rows {
        for &i in row {
            if i < n {
                sums[i] += 1;
            }
        }
    }
    sums
}

/// Recomputes column sums and classifies the matrix. When every column is
/// at most 1 the answer is NO, even for `l = 1`.
pub fn verify_promise(
    n: usize,
    l: usize,
    rows: &[Vec<usize>],
) -> Result<Verdict, PromiseViolation> {
    let sums = column_sums(n, rows);
    let heavy: Vec<(usize, usize)> = sums
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w >= 2)
        .map(|(i, &w)| (i, w))
        .collect();
    match heavy.as_slice() {
        [] => Ok(Verdict {
            label: Label::No,
            star: None,
        }),
        [(i, w)] if *w == l => Ok(Verdict {
            label: Label::Yes,
            star: Some(*i),
        }),
        _ => Err(PromiseViolation { l, columns: heavy }),
    }
}

/// A validated MostlyDISJ instance. Rows are sorted element lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct DisjInstance {
    n: usize,
    k: usize,
    l: usize,
    rows: Vec<Vec<usize>>,
    label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    star: Option<usize>,
}

#[derive(Deserialize)]
struct RawInstance {
    n: usize,
    k: usize,
    l: usize,
    rows: Vec<Vec<usize>>,
    label: Option<Label>,
}

impl TryFrom<RawInstance> for DisjInstance {
    type Error = InstanceError;
    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        let inst = DisjInstance::new(raw.n, raw.k, raw.l, raw.rows)?;
        match raw.label {
            Some(label) if label != inst.label => Err(InstanceError::InvalidParameters(format!(
                "stored label {label} disagrees with column sums ({})",
                inst.label
            ))),
            _ => Ok(inst),
        }
    }
}

impl DisjInstance {
    /// Validates shape and promise; the label and star are recomputed.
    pub fn new(
        n: usize,
        k: usize,
        l: usize,
        mut rows: Vec<Vec<usize>>,
    ) -> Result<Self, InstanceError> {
        check_params(n, k, l)?;
        if rows.len() != k {
            return Err(InstanceError::WrongRowCount {
                rows: rows.len(),
                k,
            });
        }
        for (player, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if let Some(&element) = row.iter().find(|&&e| e >= n) {
                return Err(InstanceError::ElementOutOfRange { player, element, n });
            }
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(InstanceError::DuplicateElement {
                    player,
                    element: w[0],
                });
            }
        }
        let verdict = verify_promise(n, l, &rows)?;
        Ok(DisjInstance {
            n,
            k,
            l,
            rows,
            label: verdict.label,
            star: verdict.star,
        })
    }

    /// Builds from a `k × n` bit matrix.
    pub fn from_bits(n: usize, l: usize, bits: &[Vec<bool>]) -> Result<Self, InstanceError> {
        let rows = bits
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Self::new(n, bits.len(), l, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, player: usize) -> &[usize] {
        &self.rows[player]
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn star(&self) -> Option<usize> {
        self.star
    }

    pub fn bit(&self, player: usize, element: usize) -> bool {
        self.rows[player].binary_search(&element).is_ok()
    }

    pub fn bits(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|row| {
                let mut b = vec![false; self.n];
                for &i in row {
                    b[i] = true;
                }
                b
            })
            .collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        column_sums(self.n, &self.rows)
    }

    pub fn verify_promise(&self) -> Result<Verdict, PromiseViolation> {
        verify_promise(self.n, self.l, &self.rows)
    }
}

fn check_params(n: usize, k: usize, l: usize) -> Result<(), InstanceError> {
    if n == 0 || k == 0 {
        return Err(InstanceError::InvalidParameters(format!(
            "need n ≥ 1 and k ≥ 1, got n = {n}, k = {k}"
        )));
    }
    if l == 0 || l > k {
        return Err(InstanceError::InvalidParameters(format!(
            "need 1 ≤ l ≤ k, got l = {l}, k = {k}"
        )));
    }
    Ok(())
}

/// `l = ⌈c·k⌉`.
pub fn popular_multiplicity(k: usize, c: f64) -> usize {
    ((c * k as f64) - 1e-9).ceil().max(1.0) as usize
}

/// A draw from the hard distribution together with its hidden variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardDistSample {
    pub instance: DisjInstance,
    /// `owners[i]` is the player `D_i` allowed to hold element `i`.
    pub owners: Vec<usize>,
    /// The special coordinate `I`.
    pub special: usize,
    /// The case bit `Z`.
    pub z: bool,
    /// The `l` players holding `I` when `z` is set.
    pub chosen: Option<Vec<usize>>,
}

/// Samples the hard distribution: every element `i` gets a uniform owner
/// `D_i` who holds it with probability ½; then a uniform coordinate `I` is
/// chosen and, when `z` is set, column `I` is overwritten so exactly a
/// uniform `l`-subset of players holds it.
///
/// `z = true` with `l = 1` is rejected because the result would be a NO
/// instance.
pub fn sample_eta(
    n: usize,
    k: usize,
    l: usize,
    z: bool,
    seed: u64,
) -> Result<HardDistSample, InstanceError> {
    check_params(n, k, l)?;
    if z && l < 2 {
        return Err(InstanceError::InvalidParameters(
            "a YES draw needs l ≥ 2".into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    let mut rows = vec![Vec::new(); k];
    let mut owners = Vec::with_capacity(n);
    for i in 0..n {
        let owner = rng.random_range(0..k);
        owners.push(owner);
        if rng.random::<bool>() {
            rows[owner].push(i);
        }
    }
    let special = rng.random_range(0..n);
    let chosen = if z {
        let mut s: Vec<usize> = (0..k).choose_multiple(&mut rng, l);
        s.sort_unstable();
        for row in rows.iter_mut() {
            row.retain(|&e| e != special);
        }
        for &j in &s {
            rows[j].push(special);
        }
        Some(s)
    } else {
        None
    };
    let instance = DisjInstance::new(n, k, l, rows)?;
    Ok(HardDistSample {
        instance,
        owners,
        special,
        z,
        chosen,
    })
}

/// A NO instance in which every element is held by exactly one player and
/// set sizes differ by at most one. Needs `n ≥ k` so every player holds
/// something.
pub fn adversarial_no(
    n: usize,
    k: usize,
    l: usize,
    seed: u64,
) -> Result<DisjInstance, InstanceError> {
    check_params(n, k, l)?;
    if n < k {
        return Err(InstanceError::Infeasible(format!(
            "{n} elements cannot give each of {k} players one"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut elements: Vec<usize> = (0..n).collect();
    elements.shuffle(&mut rng);
    let mut players: Vec<usize> = (0..k).collect();
    players.shuffle(&mut rng);
    let mut rows = vec![Vec::new(); k];
    for (t, e) in elements.into_iter().enumerate() {
        rows[players[t % k]].push(e);
    }
    DisjInstance::new(n, k, l, rows)
}

/// A YES instance: a random star held by `l` random players, and every other
/// element held by exactly one player, balancing set sizes. Needs
/// `n − 1 + l ≥ k` so every player holds something.
pub fn adversarial_yes(
    n: usize,
    k: usize,
    l: usize,
    seed: u64,
) -> Result<DisjInstance, InstanceError> {
    check_params(n, k, l)?;
    if l < 2 {
        return Err(InstanceError::InvalidParameters(
            "a YES instance needs l ≥ 2".into(),
        ));
    }
    if n - 1 + l < k {
        return Err(InstanceError::Infeasible(format!(
            "{} slots cannot give each of {k} players one element",
            n - 1 + l
        )));
    }
    let mut rng = seeded_rng(seed);
    let star = rng.random_range(0..n);
    let mut rows = vec![Vec::new(); k];
    let mut holders: Vec<usize> = (0..k).choose_multiple(&mut rng, l);
    holders.sort_unstable();
    for &j in &holders {
        rows[j].push(star);
    }
    let mut rest: Vec<usize> = (0..n).filter(|&e| e != star).collect();
    rest.shuffle(&mut rng);
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);
    for e in rest {
        let j = *order.iter().min_by_key(|&&j| rows[j].len()).expect("k ≥ 1");
        rows[j].push(e);
    }
    DisjInstance::new(n, k, l, rows)
}
