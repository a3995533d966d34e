//! HSTF traffic detection toolkit.
//!
//! Reassembles HTTP flows from captures, extracts hierarchical
//! spatio-temporal features (per-packet raw matrices, packet-level and
//! flow-level statistical vectors), trains and runs the HSTF hybrid
//! CNN-LSTM classifier, and reproduces the evaluation protocol
//! (imbalance scenarios, ROC/AUC, timing benchmarks) at desk scale.

pub mod alloc_track;
pub mod error;
pub mod eval;
pub mod features;
pub mod flow;
pub mod model;
pub mod seed;
pub mod synth;

pub use error::{HstfError, Result};
