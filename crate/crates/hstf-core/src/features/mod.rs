//! Hierarchical feature extraction: per-message raw matrices, per-message
//! packet-level vectors, per-direction flow-level vectors.

mod extract;
pub mod normalize;
pub mod sample_io;

pub use extract::{build_raw_matrix, extract_fl, extract_pl, flow_to_sample};
pub use normalize::{normalize_stat, normalize_stat_scalar};
pub use sample_io::{BinSampleFile, MemSamples, SampleSource};

use serde::{Deserialize, Serialize};

use crate::error::{HstfError, Result};
use crate::flow::Label;

/// Packet-level vector length.
pub const PL_LEN: usize = 41;
/// Flow-level vector length, request direction.
pub const FL_REQ_LEN: usize = 57;
/// Flow-level vector length, response direction.
pub const FL_RES_LEN: usize = 58;
/// Header slots counted in the packet-level vector.
pub const PL_HEADER_SLOTS: usize = 18;
/// Byte-size sequence slots in a flow-level vector.
pub const FL_SEQ_SLOTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverflowPolicy {
    /// Keep the first `max_seq` messages of an oversized direction.
    Truncate,
    /// Reject the whole flow (dataset builds).
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub rows: usize,
    pub cols: usize,
    pub flow_size: usize,
    pub max_seq: usize,
    pub overflow_policy: OverflowPolicy,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            rows: 20,
            cols: 40,
            flow_size: 3,
            max_seq: FL_SEQ_SLOTS,
            overflow_policy: OverflowPolicy::Truncate,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 {
            return Err(HstfError::Config("matrix rows must be >= 3".into()));
        }
        if self.cols == 0 || self.flow_size == 0 {
            return Err(HstfError::Config("cols and flow_size must be positive".into()));
        }
        if self.max_seq > FL_SEQ_SLOTS {
            return Err(HstfError::Config(format!(
                "max_seq {} exceeds the {} sequence slots",
                self.max_seq, FL_SEQ_SLOTS
            )));
        }
        Ok(())
    }
}

/// Byte matrix of one message: row 0 start line, rows 1..rows-2 header
/// lines, last row payload; each byte stored as (b % 128) / 128.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl RawMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RawMatrix { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// Packet-level statistical vector (41 values): 0 type code, 1 url or
/// reason length, 2 protocol version code, 3 header-line count, 4-21
/// header-name lengths, 22-39 header-value lengths, 40 payload length.
#[derive(Debug, Clone, PartialEq)]
pub struct PlVector {
    pub values: Vec<f64>,
}

impl PlVector {
    pub fn zeros() -> Self {
        PlVector { values: vec![0.0; PL_LEN] }
    }
}

/// Flow-level statistical vector. Request direction (57): 0 packet count,
/// 1-4 get/post/head/options counts, 5 other methods, 6 mean wire size,
/// 7-56 wire-size sequence. Response direction (58): 0 count, 1-5 status
/// class 1XX-5XX counts, 6 other statuses, 7 mean, 8-57 sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlVector {
    pub values: Vec<f64>,
}

impl FlVector {
    pub fn zeros(len: usize) -> Self {
        FlVector { values: vec![0.0; len] }
    }
}

/// Model-ready bundle for one flow: the first `flow_size` messages per
/// direction as matrices + normalized packet vectors, plus normalized
/// flow vectors computed over the full direction sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub flow_id: u64,
    pub label: Label,
    pub req_matrices: Vec<RawMatrix>,
    pub res_matrices: Vec<RawMatrix>,
    pub req_pl: Vec<PlVector>,
    pub res_pl: Vec<PlVector>,
    pub req_fl: FlVector,
    pub res_fl: FlVector,
    /// True when an oversized direction was cut to `max_seq` messages.
    pub truncated: bool,
}

impl FlowSample {
    /// Validate shapes against a config; used before feeding the model.
    pub fn check_shapes(&self, cfg: &FeatureConfig) -> Result<()> {
        let n = cfg.flow_size;
        let cells = cfg.rows * cfg.cols;
        let ok = self.req_matrices.len() == n
            && self.res_matrices.len() == n
            && self.req_pl.len() == n
            && self.res_pl.len() == n
            && self.req_matrices.iter().chain(&self.res_matrices).all(|m| m.values.len() == cells)
            && self.req_pl.iter().chain(&self.res_pl).all(|p| p.values.len() == PL_LEN)
            && self.req_fl.values.len() == FL_REQ_LEN
            && self.res_fl.values.len() == FL_RES_LEN;
        if ok {
            Ok(())
        } else {
            Err(HstfError::CheckpointMismatch(format!(
                "sample shapes do not match rows={} cols={} flow_size={}",
                cfg.rows, cfg.cols, cfg.flow_size
            )))
        }
    }
}
