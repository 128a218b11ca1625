use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("state holds {held} counters but capacity is {capacity}")]
    TooManyCounters { held: usize, capacity: usize },
    #[error("counter for item {0} is zero")]
    ZeroCounter(u64),
    #[error("counters sum to {sum} but only {processed} items were processed")]
    CountersExceedStream { sum: u64, processed: u64 },
    #[error("cannot merge summaries with capacities {0} and {1}")]
    CapacityMismatch(usize, usize),
}

/// Misra–Gries summary with at most `capacity` counters.
///
/// For every item `x̂ ≤ x ≤ x̂ + P/(capacity+1)` where `P` is the number of
/// processed items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MisraGriesState", into = "MisraGriesState")]
pub struct MisraGries {
    capacity: usize,
    processed: u64,
    counters: HashMap<u64, u64>,
}

/// Serialized form of [`MisraGries`]; counters sorted by item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisraGriesState {
    pub capacity: usize,
    pub processed: u64,
    pub counters: Vec<(u64, u64)>,
}

impl From<MisraGries> for MisraGriesState {
    fn from(mg: MisraGries) -> Self {
        MisraGriesState {
            capacity: mg.capacity,
            processed: mg.processed,
            counters: mg.sorted_counters(),
        }
    }
}

impl TryFrom<MisraGriesState> for MisraGries {
    type Error = SketchError;
    fn try_from(state: MisraGriesState) -> Result<Self, Self::Error> {
        if state.capacity == 0 {
            return Err(SketchError::ZeroCapacity);
        }
        if state.counters.len() > state.capacity {
            return Err(SketchError::TooManyCounters {
                held: state.counters.len(),
                capacity: state.capacity,
            });
        }
        let mut counters = HashMap::with_capacity(state.capacity);
        let mut sum = 0u64;
        for (item, count) in state.counters {
            if count == 0 {
                return Err(SketchError::ZeroCounter(item));
            }
            sum += count;
            counters.insert(item, count);
        }
        if sum > state.processed {
            return Err(SketchError::CountersExceedStream {
                sum,
                processed: state.processed,
            });
        }
        Ok(MisraGries {
            capacity: state.capacity,
            processed: state.processed,
            counters,
        })
    }
}

impl MisraGries {
    pub fn new(capacity: usize) -> Result<Self, SketchError> {
        if capacity == 0 {
            return Err(SketchError::ZeroCapacity);
        }
        Ok(MisraGries {
            capacity,
            processed: 0,
            counters: HashMap::with_capacity(capacity),
        })
    }

    /// Processes one occurrence of `item`.
    pub fn update(&mut self, item: u64) {
        self.processed += 1;
        if let Some(c) = self.counters.get_mut(&item) {
            *c += 1;
        } else if self.counters.len() < self.capacity {
            self.counters.insert(item, 1);
        } else {
            // Each such pass removes capacity + 1 units of mass, so the total
            // work over the stream is linear in its length.
            self.counters.retain(|_, c| {
                *c -= 1;
                *c > 0
            });
        }
    }

    pub fn estimate(&self, item: u64) -> u64 {
        self.counters.get(&item).copied().unwrap_or(0)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Maximum undercount `P / (capacity + 1)`.
    pub fn error_bound(&self) -> f64 {
        self.processed as f64 / (self.capacity as f64 + 1.0)
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counters.iter().map(|(&i, &c)| (i, c))
    }

    pub fn sorted_counters(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.iter().collect();
        v.sort_unstable();
        v
    }

    /// Merges another summary of the same capacity: counters are added and
    /// then reduced by the `(capacity+1)`-th largest value.
    pub fn merge(&mut self, other: &MisraGries) -> Result<(), SketchError> {
        if self.capacity != other.capacity {
            return Err(SketchError::CapacityMismatch(self.capacity, other.capacity));
        }
        for (item, c) in other.iter() {
            *self.counters.entry(item).or_insert(0) += c;
        }
        self.processed += other.processed;
        if self.counters.len() > self.capacity {
            let mut values: Vec<u64> = self.counters.values().copied().collect();
            values.sort_unstable_by(|a, b| b.cmp(a));
            let cut = values[self.capacity];
            self.counters.retain(|_, c| {
                *c = c.saturating_sub(cut);
                *c > 0
            });
        }
        Ok(())
    }

    /// Machine words held: two per counter slot plus capacity and length.
    pub fn words(&self) -> usize {
        2 * self.capacity + 2
    }
}
