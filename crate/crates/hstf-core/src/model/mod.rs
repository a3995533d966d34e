//! The HSTF hybrid network: MLP feature encoders (raw, packet-level,
//! flow-level), a small CNN over each packet matrix, one LSTM per
//! direction over the packet feature sequence, and a fused dense head.

pub mod adam;
pub mod backward;
pub mod checkpoint;
pub mod forward;
pub mod params;
pub mod tensor;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, peek_dtype, save_checkpoint, CheckpointMeta};
pub use forward::{forward, Mode, TensorSample};
pub use params::{LstmParams, Params};
pub use tensor::{Mat, Scalar};
pub use train::{train, EpochStats, TrainOptions, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{HstfError, Result};
use crate::features::FeatureConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub rows: usize,
    pub cols: usize,
    pub flow_size: usize,
    pub conv_kernels: usize,
    pub conv_kh: usize,
    pub conv_kw: usize,
    pub conv_stride: usize,
    pub pool_h: usize,
    pub pool_w: usize,
    pub pool_stride: usize,
    pub lstm_hidden: usize,
    pub ep_out: usize,
    pub ef_out: usize,
    /// Raw-encoder hidden width; must equal `cols` (the default), which
    /// collapses the encoder to a single cols -> cols layer.
    pub er_hidden: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            rows: 20,
            cols: 40,
            flow_size: 3,
            conv_kernels: 2,
            conv_kh: 2,
            conv_kw: 8,
            conv_stride: 2,
            pool_h: 2,
            pool_w: 2,
            pool_stride: 1,
            lstm_hidden: 16,
            ep_out: 32,
            ef_out: 32,
            er_hidden: 40,
            head_hidden: 64,
            dropout: 0.3,
            lr: 1e-4,
            seed: 42,
        }
    }
}

impl ModelConfig {
    /// Shrink the matrix shape while keeping the rest of the defaults.
    pub fn with_shape(rows: usize, cols: usize, flow_size: usize) -> Self {
        ModelConfig { rows, cols, flow_size, er_hidden: cols, ..Default::default() }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            rows: self.rows,
            cols: self.cols,
            flow_size: self.flow_size,
            ..Default::default()
        }
    }

    /// Convolution output height/width: (dim - kernel) / stride + 1.
    pub fn conv_out(&self) -> (usize, usize) {
        (
            (self.rows - self.conv_kh) / self.conv_stride + 1,
            (self.cols - self.conv_kw) / self.conv_stride + 1,
        )
    }

    /// Max-pool output height/width.
    pub fn pool_out(&self) -> (usize, usize) {
        let (ch, cw) = self.conv_out();
        (
            (ch - self.pool_h) / self.pool_stride + 1,
            (cw - self.pool_w) / self.pool_stride + 1,
        )
    }

    /// Flattened spatial feature width per packet.
    pub fn conv_flat(&self) -> usize {
        let (ph, pw) = self.pool_out();
        self.conv_kernels * ph * pw
    }

    /// Per-packet LSTM input width: spatial features + packet-vector code.
    pub fn packet_feature_width(&self) -> usize {
        self.conv_flat() + self.ep_out
    }

    /// Fused vector width: both LSTM outputs + both flow-vector codes.
    pub fn fused_width(&self) -> usize {
        2 * self.lstm_hidden + 2 * self.ef_out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HstfError::Config(msg));
        if self.rows < 3 || self.cols == 0 || self.flow_size == 0 {
            return fail("rows must be >= 3, cols and flow_size positive".into());
        }
        if self.conv_kernels == 0 || self.conv_stride == 0 || self.pool_stride == 0 {
            return fail("kernel count and strides must be positive".into());
        }
        if self.conv_kh > self.rows || self.conv_kw > self.cols {
            return fail(format!(
                "conv kernel {}x{} exceeds matrix {}x{}",
                self.conv_kh, self.conv_kw, self.rows, self.cols
            ));
        }
        if (self.rows - self.conv_kh) % self.conv_stride != 0
            || (self.cols - self.conv_kw) % self.conv_stride != 0
        {
            return fail("conv output dims must be integral: (dim - kernel) % stride == 0".into());
        }
        let (ch, cw) = self.conv_out();
        if ch < self.pool_h || cw < self.pool_w {
            return fail(format!(
                "conv output {ch}x{cw} smaller than pool {}x{}",
                self.pool_h, self.pool_w
            ));
        }
        if (ch - self.pool_h) % self.pool_stride != 0 || (cw - self.pool_w) % self.pool_stride != 0
        {
            return fail("pool output dims must be integral".into());
        }
        if self.er_hidden != self.cols {
            return fail(format!(
                "er_hidden {} unsupported: the raw encoder is a single cols->cols layer (er_hidden must equal cols {})",
                self.er_hidden, self.cols
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.lr < 0.0 || !self.lr.is_finite() {
            return fail(format!("learning rate {} must be finite and >= 0", self.lr));
        }
        if self.lstm_hidden == 0 || self.ep_out == 0 || self.ef_out == 0 || self.head_hidden == 0 {
            return fail("layer widths must be positive".into());
        }
        Ok(())
    }
}

/// Two-way class probabilities; always sums to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_malicious: f64,
    pub p_benign: f64,
}

/// Threshold rule: malicious iff p_malicious strictly exceeds lambda.
pub fn classify(prediction: &Prediction, lambda: f64) -> crate::flow::Label {
    if prediction.p_malicious > lambda {
        crate::flow::Label::Malicious
    } else {
        crate::flow::Label::Benign
    }
}

/// Run one sample through a checkpointed model and apply the threshold.
pub fn predict<T: Scalar>(
    sample: &crate::features::FlowSample,
    params: &Params<T>,
    cfg: &ModelConfig,
    lambda: f64,
) -> Result<(crate::flow::Label, Prediction)> {
    let ts = TensorSample::from_sample(sample, cfg)?;
    let (pred, _) = forward(&ts, params, cfg, Mode::Infer)?;
    Ok((classify(&pred, lambda), pred))
}
