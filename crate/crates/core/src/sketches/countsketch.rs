use crate::rng::seeded_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

const MERSENNE_61: u64 = (1 << 61) - 1;

fn mod_mersenne(x: u128) -> u64 {
    let lo = (x as u64) & MERSENNE_61;
    let hi = (x >> 61) as u64;
    let mut r = lo + (hi & MERSENNE_61) + (hi >> 61);
    while r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct RowHash {
    a: u64,
    b: u64,
    c: u64,
    d: u64,
}

impl RowHash {
    fn bucket(&self, item: u64, width: usize) -> usize {
        (mod_mersenne(self.a as u128 * item as u128 + self.b as u128) % width as u64) as usize
    }

    fn sign(&self, item: u64) -> i64 {
        if mod_mersenne(self.c as u128 * item as u128 + self.d as u128) & 1 == 0 {
            1
        } else {
            -1
        }
    }
}

/// CountSketch with pairwise-independent bucket and sign hashes over the
/// Mersenne prime 2^61 − 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountSketch {
    width: usize,
    depth: usize,
    hashes: Vec<RowHash>,
    table: Vec<i64>,
}

impl CountSketch {
    /// Panics if `width` or `depth` is zero.
    pub fn new(width: usize, depth: usize, seed: u64) -> Self {
        assert!(
            width > 0 && depth > 0,
            "CountSketch needs positive width and depth"
        );
        let mut rng = seeded_rng(seed);
        let hashes = (0..depth)
            .map(|_| RowHash {
                a: rng.random_range(1..MERSENNE_61),
                b: rng.random_range(0..MERSENNE_61),
                c: rng.random_range(1..MERSENNE_61),
                d: rng.random_range(0..MERSENNE_61),
            })
            .collect();
        CountSketch {
            width,
            depth,
            hashes,
            table: vec![0; width * depth],
        }
    }

    /// Width `⌈6/ε²⌉` and depth `2⌈log₂(1/δ)⌉ + 1`, enough for additive
    /// error `ε‖x‖₂/2` per query with probability `1 − δ`.
    pub fn for_accuracy(eps: f64, failure: f64, seed: u64) -> Self {
        let width = (6.0 / (eps * eps)).ceil() as usize;
        let depth = 2 * (1.0 / failure).log2().ceil().max(1.0) as usize + 1;
        Self::new(width, depth, seed)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn update(&mut self, item: u64, delta: i64) {
        for (r, h) in self.hashes.iter().enumerate() {
            self.table[r * self.width + h.bucket(item, self.width)] += h.sign(item) * delta;
        }
    }

    /// Median over rows of the signed bucket value.
    pub fn estimate(&self, item: u64) -> f64 {
        let mut vals: Vec<i64> = self
            .hashes
            .iter()
            .enumerate()
            .map(|(r, h)| h.sign(item) * self.table[r * self.width + h.bucket(item, self.width)])
            .collect();
        median(&mut vals)
    }

    /// Median over rows of the row's sum of squares, square-rooted.
    pub fn l2_estimate(&self) -> f64 {
        let mut sums: Vec<f64> = self
            .table
            .chunks_exact(self.width)
            .map(|row| row.iter().map(|&v| (v as f64) * (v as f64)).sum())
            .collect();
        sums.sort_by(f64::total_cmp);
        let mid = sums.len() / 2;
        let m = if sums.len() % 2 == 1 {
            sums[mid]
        } else {
            0.5 * (sums[mid - 1] + sums[mid])
        };
        m.sqrt()
    }

    /// Items in `[universe]` whose estimate is at least `¾·ε` times the
    /// estimated norm.
    pub fn heavy_hitters(&self, universe: u64, eps: f64) -> Vec<u64> {
        let threshold = 0.75 * eps * self.l2_estimate();
        (0..universe)
            .filter(|&i| self.estimate(i).abs() >= threshold && self.estimate(i) != 0.0)
            .collect()
    }

    /// Machine words: the counter table plus four hash coefficients per row.
    pub fn words(&self) -> usize {
        self.width * self.depth + 4 * self.depth
    }
}

fn median(vals: &mut [i64]) -> f64 {
    vals.sort_unstable();
    let mid = vals.len() / 2;
    if vals.len() % 2 == 1 {
        vals[mid] as f64
    } else {
        0.5 * (vals[mid - 1] as f64 + vals[mid] as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mersenne_reduction() {
        for x in [
            0u128,
            1,
            MERSENNE_61 as u128,
            (MERSENNE_61 as u128) * (MERSENNE_61 as u128) - 1,
            u64::MAX as u128 * 12345,
        ] {
            assert_eq!(mod_mersenne(x) as u128, x % MERSENNE_61 as u128);
        }
    }

    #[test]
    fn recovers_a_dominant_item() {
        let mut cs = CountSketch::new(64, 7, 11);
        for i in 0..200u64 {
            cs.update(i, 1);
        }
        cs.update(5, 300);
        assert!((cs.estimate(5) - 301.0).abs() <= 30.0);
        assert_eq!(cs.heavy_hitters(200, 0.5), vec![5]);
    }

    #[test]
    fn linear_in_updates() {
        let mut cs = CountSketch::new(16, 5, 3);
        cs.update(4, 10);
        cs.update(4, -10);
        assert!(cs.table.iter().all(|&v| v == 0));
        assert_eq!(cs.l2_estimate(), 0.0);
    }
}
