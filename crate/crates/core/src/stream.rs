//! Frequency vectors, ±1 updates and the stream file formats.
//!
//! Text format:
//!
//! ```text
//! n k l p label
//! # universe 16
//! # initial
//! 9 +1
//! # player 0
//! 3 +1
//! 5 -1
//! ```
//!
//! The header is followed by optional `# universe U` (default `2n`), then
//! update lines grouped by `# initial` and `# player j` markers. Updates
//! before any marker belong to a single anonymous block. `label` is `YES`,
//! `NO` or `-`.
//!
//! Binary format: the magic `DJS1`, the header fields (`n`, `k`, `l`, `universe`
//! as u32, `p` as f64, label as u8), the initial and block record counts,
//! then records of a little-endian u32 index and an i8 sign.

use crate::disj::Label;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("update index {index} outside universe of size {universe}")]
    IndexOutOfRange { index: usize, universe: usize },
    #[error("update delta must be +1 or -1, got {0}")]
    BadDelta(i64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("binary stream: {0}")]
    Binary(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A single `(index, ±1)` increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamUpdate {
    index: usize,
    delta: i8,
}

impl StreamUpdate {
    pub fn insert(index: usize) -> Self {
        StreamUpdate { index, delta: 1 }
    }

    pub fn delete(index: usize) -> Self {
        StreamUpdate { index, delta: -1 }
    }

    pub fn new(index: usize, delta: i64) -> Result<Self, StreamError> {
        match delta {
            1 => Ok(Self::insert(index)),
            -1 => Ok(Self::delete(index)),
            d => Err(StreamError::BadDelta(d)),
        }
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn delta(self) -> i64 {
        self.delta as i64
    }

    pub fn is_insertion(self) -> bool {
        self.delta > 0
    }
}

/// Signed integer frequencies over `[universe]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyVector {
    values: Vec<i64>,
}

impl FrequencyVector {
    pub fn zeros(universe: usize) -> Self {
        FrequencyVector {
            values: vec![0; universe],
        }
    }

    pub fn from_values(values: Vec<i64>) -> Self {
        FrequencyVector { values }
    }

    pub fn universe(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> i64 {
        self.values[index]
    }

    pub fn add(&mut self, index: usize, delta: i64) -> Result<(), StreamError> {
        let universe = self.values.len();
        let slot = self
            .values
            .get_mut(index)
            .ok_or(StreamError::IndexOutOfRange { index, universe })?;
        *slot += delta;
        Ok(())
    }

    pub fn apply(&mut self, update: StreamUpdate) -> Result<(), StreamError> {
        self.add(update.index, update.delta())
    }

    pub fn apply_all<'a>(
        &mut self,
        updates: impl IntoIterator<Item = &'a StreamUpdate>,
    ) -> Result<(), StreamError> {
        for &u in updates {
            self.apply(u)?;
        }
        Ok(())
    }

    /// Indices with nonzero frequency.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| self.values[i] != 0)
            .collect()
    }

    pub fn l1(&self) -> u64 {
        self.values.iter().map(|v| v.unsigned_abs()).sum()
    }

    pub fn l2_squared(&self) -> u128 {
        self.values
            .iter()
            .map(|&v| (v as i128 * v as i128) as u128)
            .sum()
    }

    pub fn l2(&self) -> f64 {
        (self.l2_squared() as f64).sqrt()
    }

    pub fn linf(&self) -> u64 {
        self.values
            .iter()
            .map(|v| v.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// `F_p = Σ |x_i|^p`.
    pub fn fp_moment(&self, p: f64) -> f64 {
        self.values
            .iter()
            .filter(|&&v| v != 0)
            .map(|&v| (v.unsigned_abs() as f64).powf(p))
            .sum()
    }

    /// Whether `index` is an ε-ℓp heavy hitter: `x_i ≠ 0` and
    /// `|x_i|^p ≥ ε^p · ‖x‖_p^p`.
    pub fn is_heavy_hitter(&self, index: usize, eps: f64, p: f64) -> bool {
        let v = self.values[index];
        v != 0 && (v.unsigned_abs() as f64).powf(p) >= eps.powf(p) * self.fp_moment(p)
    }

    /// All ε-ℓp heavy hitters, in increasing index order.
    pub fn heavy_hitters(&self, eps: f64, p: f64) -> Vec<usize> {
        let threshold = eps.powf(p) * self.fp_moment(p);
        (0..self.values.len())
            .filter(|&i| {
                let v = self.values[i];
                v != 0 && (v.unsigned_abs() as f64).powf(p) >= threshold
            })
            .collect()
    }

    /// Exact ε-ℓ₂ heavy hitters using integer arithmetic for the comparison
    /// `x_i² ≥ ε²‖x‖₂²`.
    pub fn l2_heavy_hitters(&self, eps: f64) -> Vec<usize> {
        let threshold = eps * eps * self.l2_squared() as f64;
        (0..self.values.len())
            .filter(|&i| {
                let v = self.values[i];
                v != 0 && ((v as i128 * v as i128) as f64) >= threshold
            })
            .collect()
    }
}

/// Metadata carried by a stream file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub p: f64,
    pub label: Option<Label>,
    pub universe: usize,
}

/// A stream split into an initial preload and per-player blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamFile {
    pub header: StreamHeader,
    pub initial: Vec<StreamUpdate>,
    pub blocks: Vec<Vec<StreamUpdate>>,
}

impl StreamFile {
    /// All updates in order: initial first, then each block.
    pub fn updates(&self) -> impl Iterator<Item = &StreamUpdate> {
        self.initial.iter().chain(self.blocks.iter().flatten())
    }

    pub fn len(&self) -> usize {
        self.initial.len() + self.blocks.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn final_vector(&self) -> Result<FrequencyVector, StreamError> {
        let mut f = FrequencyVector::zeros(self.header.universe);
        f.apply_all(self.updates())?;
        Ok(f)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        let h = &self.header;
        let label = match h.label {
            Some(l) => l.as_str(),
            None => "-",
        };
        writeln!(out, "{} {} {} {} {}", h.n, h.k, h.l, h.p, label)?;
        writeln!(out, "# universe {}", h.universe)?;
        let line = |out: &mut W, u: &StreamUpdate| {
            writeln!(
                out,
                "{} {}",
                u.index,
                if u.is_insertion() { "+1" } else { "-1" }
            )
        };
        if !self.initial.is_empty() {
            writeln!(out, "# initial")?;
            for u in &self.initial {
                line(&mut out, u)?;
            }
        }
        for (j, block) in self.blocks.iter().enumerate() {
            writeln!(out, "# player {j}")?;
            for u in block {
                line(&mut out, u)?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, StreamError> {
        let mut lines = input.lines().enumerate();
        let perr = |line: usize, message: String| StreamError::Parse {
            line: line + 1,
            message,
        };
        let (lineno, first) = match lines.next() {
            Some((i, l)) => (i, l?),
            None => return Err(perr(0, "empty stream file".into())),
        };
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(perr(
                lineno,
                format!("expected header `n k l p label`, got {first:?}"),
            ));
        }
        let num = |s: &str, what: &str| -> Result<usize, StreamError> {
            s.parse()
                .map_err(|_| perr(lineno, format!("bad {what}: {s:?}")))
        };
        let n = num(fields[0], "n")?;
        let k = num(fields[1], "k")?;
        let l = num(fields[2], "l")?;
        let p: f64 = fields[3]
            .parse()
            .map_err(|_| perr(lineno, format!("bad p: {:?}", fields[3])))?;
        let label = match fields[4] {
            "-" => None,
            s => Some(s.parse::<Label>().map_err(|e| perr(lineno, e))?),
        };
        let mut header = StreamHeader {
            n,
            k,
            l,
            p,
            label,
            universe: 2 * n,
        };
        let mut initial = Vec::new();
        let mut blocks: Vec<Vec<StreamUpdate>> = Vec::new();
        #[derive(PartialEq)]
        enum Target {
            Start,
            Initial,
            Block,
        }
        let mut target = Target::Start;
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let words: Vec<&str> = rest.split_whitespace().collect();
                match words.as_slice() {
                    ["universe", u] => {
                        header.universe = u
                            .parse()
                            .map_err(|_| perr(i, format!("bad universe {u:?}")))?
                    }
                    ["initial"] => target = Target::Initial,
                    ["player", _] => {
                        blocks.push(Vec::new());
                        target = Target::Block;
                    }
                    _ => {}
                }
                continue;
            }
            let mut parts = t.split_whitespace();
            let (Some(idx), Some(sign), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(perr(i, format!("expected `index ±1`, got {t:?}")));
            };
            let index: usize = idx
                .parse()
                .map_err(|_| perr(i, format!("bad index {idx:?}")))?;
            let update = match sign {
                "+1" | "1" => StreamUpdate::insert(index),
                "-1" => StreamUpdate::delete(index),
                s => return Err(perr(i, format!("bad sign {s:?}"))),
            };
            match target {
                Target::Initial => initial.push(update),
                Target::Block => blocks.last_mut().expect("block opened").push(update),
                Target::Start => {
                    blocks.push(vec![update]);
                    target = Target::Block;
                }
            }
        }
        let file = StreamFile {
            header,
            initial,
            blocks,
        };
        file.check_range()?;
        Ok(file)
    }

    fn check_range(&self) -> Result<(), StreamError> {
        let universe = self.header.universe;
        match self.updates().find(|u| u.index >= universe) {
            Some(u) => Err(StreamError::IndexOutOfRange {
                index: u.index,
                universe,
            }),
            None => Ok(()),
        }
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), StreamError> {
        let h = &self.header;
        let u32_of = |v: usize, what: &str| {
            u32::try_from(v)
                .map_err(|_| StreamError::Binary(format!("{what} = {v} does not fit in u32")))
        };
        out.write_all(b"DJS1")?;
        for (v, what) in [(h.n, "n"), (h.k, "k"), (h.l, "l"), (h.universe, "universe")] {
            out.write_all(&u32_of(v, what)?.to_le_bytes())?;
        }
        out.write_all(&h.p.to_le_bytes())?;
        out.write_all(&[match h.label {
            None => 0u8,
            Some(Label::No) => 1,
            Some(Label::Yes) => 2,
        }])?;
        out.write_all(&u32_of(self.initial.len(), "initial length")?.to_le_bytes())?;
        out.write_all(&u32_of(self.blocks.len(), "block count")?.to_le_bytes())?;
        for b in &self.blocks {
            out.write_all(&u32_of(b.len(), "block length")?.to_le_bytes())?;
        }
        for u in self.updates() {
            out.write_all(&u32_of(u.index, "index")?.to_le_bytes())?;
            out.write_all(&[u.delta as u8])?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, StreamError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != b"DJS1" {
            return Err(StreamError::Binary("missing DJS1 magic".into()));
        }
        let read_u32 = |input: &mut R| -> Result<usize, StreamError> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let n = read_u32(&mut input)?;
        let k = read_u32(&mut input)?;
        let l = read_u32(&mut input)?;
        let universe = read_u32(&mut input)?;
        let mut pb = [0u8; 8];
        input.read_exact(&mut pb)?;
        let p = f64::from_le_bytes(pb);
        let mut lb = [0u8; 1];
        input.read_exact(&mut lb)?;
        let label = match lb[0] {
            0 => None,
            1 => Some(Label::No),
            2 => Some(Label::Yes),
            b => return Err(StreamError::Binary(format!("bad label byte {b}"))),
        };
        let initial_len = read_u32(&mut input)?;
        let block_count = read_u32(&mut input)?;
        let mut block_lens = Vec::with_capacity(block_count.min(1 << 20));
        for _ in 0..block_count {
            block_lens.push(read_u32(&mut input)?);
        }
        let record = |input: &mut R| -> Result<StreamUpdate, StreamError> {
            let mut b = [0u8; 5];
            input.read_exact(&mut b)?;
            let index = u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
            StreamUpdate::new(index, b[4] as i8 as i64)
        };
        let mut initial = Vec::with_capacity(initial_len.min(1 << 24));
        for _ in 0..initial_len {
            initial.push(record(&mut input)?);
        }
        let mut blocks = Vec::with_capacity(block_lens.len());
        for len in block_lens {
            let mut block = Vec::with_capacity(len.min(1 << 24));
            for _ in 0..len {
                block.push(record(&mut input)?);
            }
            blocks.push(block);
        }
        let file = StreamFile {
            header: StreamHeader {
                n,
                k,
                l,
                p,
                label,
                universe,
            },
            initial,
            blocks,
        };
        file.check_range()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StreamFile {
        StreamFile {
            header: StreamHeader {
                n: 4,
                k: 2,
                l: 2,
                p: 2.0,
                label: Some(Label::Yes),
                universe: 8,
            },
            initial: vec![StreamUpdate::insert(5), StreamUpdate::insert(6)],
            blocks: vec![
                vec![StreamUpdate::insert(1), StreamUpdate::insert(2)],
                vec![StreamUpdate::insert(1), StreamUpdate::delete(3)],
            ],
        }
    }

    #[test]
    fn text_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("4 2 2 2 YES\n"));
        assert_eq!(StreamFile::read_text(&buf[..]).unwrap(), s);
    }

    #[test]
    fn binary_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(StreamFile::read_binary(&buf[..]).unwrap(), s);
    }

    #[test]
    fn text_without_markers_is_one_block() {
        let s = StreamFile::read_text("3 1 1 1 -\n0 +1\n2 -1\n".as_bytes()).unwrap();
        assert_eq!(s.header.universe, 6);
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.final_vector().unwrap().values(), &[1, 0, -1, 0, 0, 0]);
    }

    #[test]
    fn rejects_out_of_range_and_bad_signs() {
        assert!(StreamFile::read_text("1 1 1 1 NO\n# universe 2\n5 +1\n".as_bytes()).is_err());
        assert!(StreamFile::read_text("1 1 1 1 NO\n0 +2\n".as_bytes()).is_err());
        assert!(StreamUpdate::new(0, 3).is_err());
    }

    #[test]
    fn heavy_hitters_by_definition() {
        let f = FrequencyVector::from_values(vec![4, 1, 1, 0, -1]);
        // ‖f‖₂² = 19; 4² = 16 ≥ 0.25·19, 1 < 4.75
        assert_eq!(f.l2_heavy_hitters(0.5), vec![0]);
        assert_eq!(f.heavy_hitters(0.5, 2.0), vec![0]);
        assert_eq!(
            FrequencyVector::zeros(5).heavy_hitters(0.1, 2.0),
            Vec::<usize>::new()
        );
        assert_eq!(f.fp_moment(1.0), 7.0);
        assert_eq!(f.linf(), 4);
    }
}
