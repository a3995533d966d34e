//! Checkpoint files: a single JSON document (`hstf-ckpt/v1`) holding the
//! config and all parameter arrays, or the same JSON plus a little-endian
//! f32 sidecar blob for the array data. Both forms load identically.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::Params;
use super::tensor::Scalar;
use super::ModelConfig;
use crate::error::{HstfError, Result};

pub const CKPT_SCHEMA: &str = "hstf-ckpt/v1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub epochs: usize,
    pub final_loss: f64,
    pub best_val_f1: f64,
    pub seed: u64,
    pub dtype: String,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    shape: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    data: Option<Vec<f64>>,
    /// Byte offset into the sidecar blob when data is externalized.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    offset: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    len: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct CkptFile {
    version: String,
    config: ModelConfig,
    params: BTreeMap<String, ParamEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    blob: Option<String>,
    meta: CheckpointMeta,
}

fn shapes_of(cfg: &ModelConfig) -> Vec<(&'static str, Vec<usize>)> {
    let p = Params::<f64>::zeros(cfg);
    let dims: BTreeMap<&'static str, Vec<usize>> = [
        ("er_w", vec![p.er_w.rows, p.er_w.cols]),
        ("ep_w", vec![p.ep_w.rows, p.ep_w.cols]),
        ("ef_req_w", vec![p.ef_req_w.rows, p.ef_req_w.cols]),
        ("ef_res_w", vec![p.ef_res_w.rows, p.ef_res_w.cols]),
        ("conv_w", vec![p.conv_w.rows, p.conv_w.cols]),
        ("head_w", vec![p.head_w.rows, p.head_w.cols]),
        ("out_w", vec![p.out_w.rows, p.out_w.cols]),
    ]
    .into_iter()
    .collect();
    let lstm_w = vec![cfg.lstm_hidden, cfg.lstm_hidden + cfg.packet_feature_width()];
    p.arrays()
        .into_iter()
        .map(|(name, arr)| {
            let shape = dims
                .get(name)
                .cloned()
                .or_else(|| {
                    (name.starts_with("lstm") && name.contains("_w_")).then(|| lstm_w.clone())
                })
                .unwrap_or_else(|| vec![arr.len()]);
            (name, shape)
        })
        .collect()
}

/// Save a checkpoint. With `sidecar` set, parameter data goes to
/// `<path>.bin` as little-endian f32 and the JSON carries offsets.
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    cfg: &ModelConfig,
    params: &Params<T>,
    meta: &CheckpointMeta,
    sidecar: bool,
) -> Result<()> {
    if sidecar && T::DTYPE != "f32" {
        return Err(HstfError::Config(
            "sidecar blobs store f32; save the full-precision checkpoint inline instead".into(),
        ));
    }
    let mut meta = meta.clone();
    meta.dtype = T::DTYPE.into();

    let shapes: BTreeMap<&'static str, Vec<usize>> = shapes_of(cfg).into_iter().collect();
    let mut entries = BTreeMap::new();
    let mut blob: Vec<u8> = Vec::new();
    for (name, arr) in params.arrays() {
        let shape = shapes.get(name).cloned().unwrap_or_else(|| vec![arr.len()]);
        let entry = if sidecar {
            let offset = blob.len() as u64;
            for v in arr {
                blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
            ParamEntry { shape, data: None, offset: Some(offset), len: Some(arr.len()) }
        } else {
            ParamEntry {
                shape,
                data: Some(arr.iter().map(|v| v.as_f64()).collect()),
                offset: None,
                len: None,
            }
        };
        entries.insert(name.to_string(), entry);
    }

    let blob_name = sidecar.then(|| {
        format!(
            "{}.bin",
            path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        )
    });
    let file = CkptFile {
        version: CKPT_SCHEMA.into(),
        config: cfg.clone(),
        params: entries,
        blob: blob_name.clone(),
        meta,
    };
    let mut out = std::fs::File::create(path)?;
    serde_json::to_writer(&mut out, &file)?;
    out.write_all(b"\n")?;
    if let Some(name) = blob_name {
        std::fs::write(path.with_file_name(name), &blob)?;
    }
    Ok(())
}

/// Dtype recorded in a checkpoint, for callers that dispatch on it.
pub fn peek_dtype(path: &Path) -> Result<String> {
    #[derive(Deserialize)]
    struct MetaOnly {
        meta: CheckpointMeta,
    }
    let text = std::fs::read_to_string(path)?;
    let m: MetaOnly = serde_json::from_str(&text)?;
    Ok(m.meta.dtype)
}

/// Load a checkpoint saved in either form. Shapes are validated against
/// the embedded config and the dtype must match `T`.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(ModelConfig, Params<T>, CheckpointMeta)> {
    let text = std::fs::read_to_string(path)?;
    let file: CkptFile = serde_json::from_str(&text)?;
    if file.version != CKPT_SCHEMA {
        return Err(HstfError::CheckpointMismatch(format!(
            "unknown checkpoint version `{}`",
            file.version
        )));
    }
    if file.meta.dtype != T::DTYPE {
        return Err(HstfError::CheckpointMismatch(format!(
            "checkpoint dtype {} but model expects {}",
            file.meta.dtype,
            T::DTYPE
        )));
    }
    file.config.validate()?;

    let blob: Option<Vec<u8>> = match &file.blob {
        Some(name) => {
            let mut bytes = Vec::new();
            std::fs::File::open(sidecar_path(path, name))?.read_to_end(&mut bytes)?;
            Some(bytes)
        }
        None => None,
    };

    let mut params = Params::<T>::zeros(&file.config);
    let expected_shapes: BTreeMap<&'static str, Vec<usize>> =
        shapes_of(&file.config).into_iter().collect();
    for (name, arr) in params.arrays_mut() {
        let entry = file
            .params
            .get(name)
            .ok_or_else(|| HstfError::CheckpointMismatch(format!("missing parameter `{name}`")))?;
        let expect = &expected_shapes[name];
        if &entry.shape != expect {
            return Err(HstfError::CheckpointMismatch(format!(
                "parameter `{name}` has shape {:?}, expected {:?}",
                entry.shape, expect
            )));
        }
        match (&entry.data, entry.offset) {
            (Some(data), _) => {
                if data.len() != arr.len() {
                    return Err(HstfError::CheckpointMismatch(format!(
                        "parameter `{name}` has {} values, expected {}",
                        data.len(),
                        arr.len()
                    )));
                }
                for (dst, &v) in arr.iter_mut().zip(data) {
                    *dst = T::from_f64(v);
                }
            }
            (None, Some(offset)) => {
                let blob = blob.as_ref().ok_or_else(|| {
                    HstfError::CheckpointMismatch("offset entry without a blob file".into())
                })?;
                let len = entry.len.unwrap_or(arr.len());
                if len != arr.len() {
                    return Err(HstfError::CheckpointMismatch(format!(
                        "parameter `{name}` has {len} values, expected {}",
                        arr.len()
                    )));
                }
                let start = offset as usize;
                let end = start + 4 * len;
                if blob.len() < end {
                    return Err(HstfError::CheckpointMismatch("sidecar blob too short".into()));
                }
                for (i, dst) in arr.iter_mut().enumerate() {
                    let b = &blob[start + 4 * i..start + 4 * i + 4];
                    *dst = T::from_f64(f32::from_le_bytes(b.try_into().unwrap()) as f64);
                }
            }
            (None, None) => {
                return Err(HstfError::CheckpointMismatch(format!(
                    "parameter `{name}` carries neither data nor an offset"
                )));
            }
        }
    }
    Ok((file.config, params, file.meta))
}

fn sidecar_path(ckpt: &Path, name: &str) -> PathBuf {
    ckpt.with_file_name(name)
}
