//! Phoneme-level predictability of facial anthropometric measurements from
//! speech.
//!
//! Pipeline: audio and phoneme alignments become fixed-length log mel clips
//! ([`dsp`], [`segments`]); 3D landmarks become normalized measurements
//! ([`anthropometry`]); a small regressor per (phoneme, measurement) pair is
//! trained over repeated random splits ([`estimator`], [`experiment`]) and its
//! error ratio against a chance-level predictor is tested ([`stats`]).
//! [`synthgen`] builds datasets with known planted effects.

pub mod anthropometry;
pub mod dsp;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod segments;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
