//! Deterministic and randomized frequency summaries.

mod countsketch;
mod misra_gries;

pub use countsketch::CountSketch;
pub use misra_gries::{MisraGries, MisraGriesState, SketchError};
