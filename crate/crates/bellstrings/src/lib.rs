//! Simulation and statistics for parity strings in Bell-experiment
//! coincidence series.
//!
//! A series of coincidences at two polarizer stations decomposes into
//! *strings*: runs of same-parity outcomes terminated by the other parity.
//! For an indeterministic (i.i.d.) process the string-length histogram is
//! geometric, `n(k) = m·φ²·(1−φ)^k` with `φ = sin²(α−β)`; a deterministic
//! hidden-variable process can produce a measurably different histogram,
//! most visibly an excess of long strings at small angle differences.
//!
//! The crate provides:
//!
//! - [`predict`]: the closed-form expectations and the noise/entanglement
//!   lower bounds on φ, generic over the scalar type;
//! - [`simulate`]: an i.i.d. generator and a deterministic nonlocal
//!   hidden-variable engine (WQM) with per-detection efficiency;
//! - [`imperfections`]: dark-count injection and entanglement-deficit flips;
//! - [`strings`]: string-length extraction with the 45° convention switch;
//! - [`stats`]: chi-square distinguishability tests and the `φ_high` search;
//! - [`window`]: the feasibility window of a given experimental setup;
//! - [`ingest`]: time-tag parsing, coincidence pairing, and visibility.
//!
//! Every generator and transformation is deterministic for a fixed seed.

pub mod error;
pub mod imperfections;
pub mod ingest;
pub mod num;
pub mod outcome;
pub mod params;
pub mod predict;
pub mod series;
pub mod simulate;
pub mod stats;
pub mod strings;
pub mod window;

pub use error::{Error, Result};
pub use outcome::{parity_of, Gate, Outcome, Parity};
pub use params::ExperimentParams;
pub use series::{CoincidenceSeries, GeneratorTag, SeriesMeta};
pub use strings::{extract_strings, Convention, RunParity, StringsDistribution};

/// `f64` instantiation of the outcome-probability table.
pub type Probabilities = predict::CoincidenceProbabilities<f64>;
/// `f64` instantiation of the expected string distribution.
pub type ExpectedStrings = predict::ExpectedStrings<f64>;
/// `f64` instantiation of the hidden-variable engine.
pub type WqmEngine = simulate::Engine<f64>;
