//! TOML config file: feature, model, and training sections, all optional
//! with defaults matching the library.

use anyhow::{Context, Result};
use serde::Deserialize;
use std::path::Path;

use hstf_core::features::{FeatureConfig, OverflowPolicy};
use hstf_core::model::{ModelConfig, TrainOptions};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub rows: usize,
    pub cols: usize,
    pub flow_size: usize,
    pub max_seq: usize,
    pub overflow_policy: String,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        FeaturesSection {
            rows: f.rows,
            cols: f.cols,
            flow_size: f.flow_size,
            max_seq: f.max_seq,
            overflow_policy: "truncate".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
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
    pub head_hidden: usize,
    pub dropout: f64,
    pub lr: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            conv_kernels: m.conv_kernels,
            conv_kh: m.conv_kh,
            conv_kw: m.conv_kw,
            conv_stride: m.conv_stride,
            pool_h: m.pool_h,
            pool_w: m.pool_w,
            pool_stride: m.pool_stride,
            lstm_hidden: m.lstm_hidden,
            ep_out: m.ep_out,
            ef_out: m.ef_out,
            head_hidden: m.head_hidden,
            dropout: m.dropout,
            lr: m.lr,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainOptions::default();
        TrainSection {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }

    pub fn feature_config(&self, policy_override: Option<OverflowPolicy>) -> Result<FeatureConfig> {
        let policy = match policy_override {
            Some(p) => p,
            None => match self.features.overflow_policy.as_str() {
                "truncate" => OverflowPolicy::Truncate,
                "discard" => OverflowPolicy::Discard,
                other => anyhow::bail!("unknown overflow_policy `{other}`"),
            },
        };
        Ok(FeatureConfig {
            rows: self.features.rows,
            cols: self.features.cols,
            flow_size: self.features.flow_size,
            max_seq: self.features.max_seq,
            overflow_policy: policy,
        })
    }

    pub fn model_config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            rows: self.features.rows,
            cols: self.features.cols,
            flow_size: self.features.flow_size,
            conv_kernels: self.model.conv_kernels,
            conv_kh: self.model.conv_kh,
            conv_kw: self.model.conv_kw,
            conv_stride: self.model.conv_stride,
            pool_h: self.model.pool_h,
            pool_w: self.model.pool_w,
            pool_stride: self.model.pool_stride,
            lstm_hidden: self.model.lstm_hidden,
            ep_out: self.model.ep_out,
            ef_out: self.model.ef_out,
            er_hidden: self.features.cols,
            head_hidden: self.model.head_hidden,
            dropout: self.model.dropout,
            lr: self.model.lr,
            seed,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            ..Default::default()
        }
    }
}
