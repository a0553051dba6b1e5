//! Deterministic corruption of tabular datasets.
//!
//! [`tabular`] loads and writes typed CSV data, [`error_model`] describes and
//! selects what to corrupt, [`injectors`] applies the five error families with
//! a replayable [`injectors::CorruptionManifest`], and [`preprocess`] prepares
//! datasets for learning.

pub mod error;
pub mod error_model;
pub mod injectors;
pub mod preprocess;
pub mod rng;
pub mod tabular;

pub use error::{Error, Result};
