//! FlowSample serialization: a JSON-lines form (`hstf-sample/v1`) and a
//! fixed-record binary form used for streamed training.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureConfig, FlVector, FlowSample, PlVector, RawMatrix, FL_REQ_LEN, FL_RES_LEN, PL_LEN};
use crate::error::{HstfError, Result};
use crate::flow::Label;

pub const SAMPLE_SCHEMA: &str = "hstf-sample/v1";
const BIN_MAGIC: &[u8; 8] = b"HSTFBIN1";

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    schema: String,
    flow_id: u64,
    label: String,
    #[serde(default)]
    truncated: bool,
    req_matrices: Vec<Vec<f64>>,
    res_matrices: Vec<Vec<f64>>,
    req_pl: Vec<Vec<f64>>,
    res_pl: Vec<Vec<f64>>,
    req_fl: Vec<f64>,
    res_fl: Vec<f64>,
}

fn label_of_str(s: &str) -> Result<Label> {
    match s {
        "malicious" => Ok(Label::Malicious),
        "benign" => Ok(Label::Benign),
        "unlabeled" => Ok(Label::Unlabeled),
        other => Err(HstfError::Config(format!("unknown label `{other}`"))),
    }
}

impl SampleRecord {
    fn from_sample(s: &FlowSample) -> Self {
        SampleRecord {
            schema: SAMPLE_SCHEMA.into(),
            flow_id: s.flow_id,
            label: s.label.as_str().into(),
            truncated: s.truncated,
            req_matrices: s.req_matrices.iter().map(|m| m.values.clone()).collect(),
            res_matrices: s.res_matrices.iter().map(|m| m.values.clone()).collect(),
            req_pl: s.req_pl.iter().map(|p| p.values.clone()).collect(),
            res_pl: s.res_pl.iter().map(|p| p.values.clone()).collect(),
            req_fl: s.req_fl.values.clone(),
            res_fl: s.res_fl.values.clone(),
        }
    }

    fn into_sample(self, cfg: &FeatureConfig) -> Result<FlowSample> {
        if self.schema != SAMPLE_SCHEMA {
            return Err(HstfError::Config(format!("unknown sample schema `{}`", self.schema)));
        }
        let mat = |values: Vec<f64>| RawMatrix { rows: cfg.rows, cols: cfg.cols, values };
        let sample = FlowSample {
            flow_id: self.flow_id,
            label: label_of_str(&self.label)?,
            truncated: self.truncated,
            req_matrices: self.req_matrices.into_iter().map(mat).collect(),
            res_matrices: self.res_matrices.into_iter().map(mat).collect(),
            req_pl: self.req_pl.into_iter().map(|values| PlVector { values }).collect(),
            res_pl: self.res_pl.into_iter().map(|values| PlVector { values }).collect(),
            req_fl: FlVector { values: self.req_fl },
            res_fl: FlVector { values: self.res_fl },
        };
        sample.check_shapes(cfg)?;
        Ok(sample)
    }
}

/// Write samples as JSON lines.
pub fn write_samples_jsonl<W: Write>(w: &mut W, samples: &[FlowSample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut *w, &SampleRecord::from_sample(s))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a JSON-lines sample file, validating shapes against the config.
pub fn read_samples_jsonl<R: Read>(r: R, cfg: &FeatureConfig) -> Result<Vec<FlowSample>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line).map_err(|e| {
            HstfError::MalformedRecord { line: i + 1, reason: e.to_string() }
        })?;
        out.push(record.into_sample(cfg)?);
    }
    Ok(out)
}

/// Random-access sample provider. Training streams batches through this,
/// so memory stays proportional to the batch, not the corpus.
pub trait SampleSource {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn config(&self) -> &FeatureConfig;
    fn get(&mut self, idx: usize) -> Result<FlowSample>;
    /// Labels for every sample, cheap to hold (one byte-ish per sample).
    fn labels(&self) -> &[Label];
}

/// In-memory source for small corpora and tests.
pub struct MemSamples {
    cfg: FeatureConfig,
    samples: Vec<FlowSample>,
    labels: Vec<Label>,
}

impl MemSamples {
    pub fn new(cfg: FeatureConfig, samples: Vec<FlowSample>) -> Self {
        let labels = samples.iter().map(|s| s.label).collect();
        MemSamples { cfg, samples, labels }
    }
}

impl SampleSource for MemSamples {
    fn len(&self) -> usize {
        self.samples.len()
    }
    fn config(&self) -> &FeatureConfig {
        &self.cfg
    }
    fn get(&mut self, idx: usize) -> Result<FlowSample> {
        Ok(self.samples[idx].clone())
    }
    fn labels(&self) -> &[Label] {
        &self.labels
    }
}

fn f64s_to_f32_bytes(values: &[f64], out: &mut Vec<u8>) {
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct SectionLens {
    mats: usize,
    pls: usize,
}

fn section_lens(cfg: &FeatureConfig) -> SectionLens {
    SectionLens { mats: cfg.flow_size * cfg.rows * cfg.cols, pls: cfg.flow_size * PL_LEN }
}

fn record_len(cfg: &FeatureConfig) -> usize {
    let s = section_lens(cfg);
    // label + flow_id + truncated + 6 length-prefixed f32 sections
    4 + 8 + 1 + 6 * 4 + 4 * (2 * s.mats + 2 * s.pls + FL_REQ_LEN + FL_RES_LEN)
}

const BIN_HEADER_LEN: usize = 8 + 4 + 4 + 4 + 4 + 8;

/// Writer for the binary sample form. Records are fixed-size for a given
/// config; the sample count is patched into the header on finish.
pub struct BinSampleWriter {
    file: File,
    cfg: FeatureConfig,
    count: u64,
}

impl BinSampleWriter {
    pub fn create(path: &Path, cfg: &FeatureConfig) -> Result<Self> {
        let mut file = File::create(path)?;
        file.write_all(BIN_MAGIC)?;
        file.write_all(&1u32.to_le_bytes())?;
        file.write_all(&(cfg.rows as u32).to_le_bytes())?;
        file.write_all(&(cfg.cols as u32).to_le_bytes())?;
        file.write_all(&(cfg.flow_size as u32).to_le_bytes())?;
        file.write_all(&0u64.to_le_bytes())?;
        Ok(BinSampleWriter { file, cfg: cfg.clone(), count: 0 })
    }

    pub fn append(&mut self, sample: &FlowSample) -> Result<()> {
        sample.check_shapes(&self.cfg)?;
        let mut buf = Vec::with_capacity(record_len(&self.cfg));
        let label_code: u32 = match sample.label {
            Label::Benign => 0,
            Label::Malicious => 1,
            Label::Unlabeled => 2,
        };
        buf.extend_from_slice(&label_code.to_le_bytes());
        buf.extend_from_slice(&sample.flow_id.to_le_bytes());
        buf.push(sample.truncated as u8);
        let flat_mats = |mats: &[RawMatrix]| -> Vec<f64> {
            mats.iter().flat_map(|m| m.values.iter().copied()).collect()
        };
        let flat_pls = |pls: &[PlVector]| -> Vec<f64> {
            pls.iter().flat_map(|p| p.values.iter().copied()).collect()
        };
        f64s_to_f32_bytes(&flat_mats(&sample.req_matrices), &mut buf);
        f64s_to_f32_bytes(&flat_mats(&sample.res_matrices), &mut buf);
        f64s_to_f32_bytes(&flat_pls(&sample.req_pl), &mut buf);
        f64s_to_f32_bytes(&flat_pls(&sample.res_pl), &mut buf);
        f64s_to_f32_bytes(&sample.req_fl.values, &mut buf);
        f64s_to_f32_bytes(&sample.res_fl.values, &mut buf);
        debug_assert_eq!(buf.len(), record_len(&self.cfg));
        self.file.write_all(&buf)?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.file.seek(SeekFrom::Start((BIN_HEADER_LEN - 8) as u64))?;
        self.file.write_all(&self.count.to_le_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Random-access reader over the binary sample form.
pub struct BinSampleFile {
    file: File,
    cfg: FeatureConfig,
    count: usize,
    record_len: usize,
    labels: Vec<Label>,
}

impl BinSampleFile {
    pub fn open(path: &Path, policy_cfg: &FeatureConfig) -> Result<Self> {
        let mut file = File::open(path)?;
        let mut header = [0u8; BIN_HEADER_LEN];
        file.read_exact(&mut header)
            .map_err(|_| HstfError::MalformedCapture("binary sample file too short".into()))?;
        if &header[0..8] != BIN_MAGIC {
            return Err(HstfError::MalformedCapture("bad binary sample magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        if u32_at(8) != 1 {
            return Err(HstfError::MalformedCapture("unknown binary sample version".into()));
        }
        let cfg = FeatureConfig {
            rows: u32_at(12) as usize,
            cols: u32_at(16) as usize,
            flow_size: u32_at(20) as usize,
            max_seq: policy_cfg.max_seq,
            overflow_policy: policy_cfg.overflow_policy,
        };
        let count = u64::from_le_bytes(header[24..32].try_into().unwrap()) as usize;
        let record_len = record_len(&cfg);

        // One pass to collect labels; cheap relative to sample payloads.
        let mut labels = Vec::with_capacity(count);
        for idx in 0..count {
            file.seek(SeekFrom::Start((BIN_HEADER_LEN + idx * record_len) as u64))?;
            let mut code = [0u8; 4];
            file.read_exact(&mut code)?;
            labels.push(match u32::from_le_bytes(code) {
                0 => Label::Benign,
                1 => Label::Malicious,
                _ => Label::Unlabeled,
            });
        }
        Ok(BinSampleFile { file, cfg, count, record_len, labels })
    }
}

fn read_section(buf: &[u8], pos: &mut usize, expect: usize) -> Result<Vec<f64>> {
    let n = u32::from_le_bytes(buf[*pos..*pos + 4].try_into().unwrap()) as usize;
    *pos += 4;
    if n != expect {
        return Err(HstfError::MalformedCapture(format!(
            "binary section length {n}, expected {expect}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = f32::from_le_bytes(buf[*pos..*pos + 4].try_into().unwrap());
        *pos += 4;
        out.push(v as f64);
    }
    Ok(out)
}

impl SampleSource for BinSampleFile {
    fn len(&self) -> usize {
        self.count
    }

    fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    fn get(&mut self, idx: usize) -> Result<FlowSample> {
        let offset = BIN_HEADER_LEN + idx * self.record_len;
        self.file.seek(SeekFrom::Start(offset as u64))?;
        let mut buf = vec![0u8; self.record_len];
        self.file.read_exact(&mut buf)?;

        let label = match u32::from_le_bytes(buf[0..4].try_into().unwrap()) {
            0 => Label::Benign,
            1 => Label::Malicious,
            _ => Label::Unlabeled,
        };
        let flow_id = u64::from_le_bytes(buf[4..12].try_into().unwrap());
        let truncated = buf[12] != 0;
        let mut pos = 13;
        let lens = section_lens(&self.cfg);
        let req_m = read_section(&buf, &mut pos, lens.mats)?;
        let res_m = read_section(&buf, &mut pos, lens.mats)?;
        let req_p = read_section(&buf, &mut pos, lens.pls)?;
        let res_p = read_section(&buf, &mut pos, lens.pls)?;
        let req_fl = read_section(&buf, &mut pos, FL_REQ_LEN)?;
        let res_fl = read_section(&buf, &mut pos, FL_RES_LEN)?;

        let cells = self.cfg.rows * self.cfg.cols;
        let split_mats = |flat: Vec<f64>| -> Vec<RawMatrix> {
            flat.chunks(cells)
                .map(|c| RawMatrix { rows: self.cfg.rows, cols: self.cfg.cols, values: c.to_vec() })
                .collect()
        };
        let split_pls = |flat: Vec<f64>| -> Vec<PlVector> {
            flat.chunks(PL_LEN).map(|c| PlVector { values: c.to_vec() }).collect()
        };
        Ok(FlowSample {
            flow_id,
            label,
            truncated,
            req_matrices: split_mats(req_m),
            res_matrices: split_mats(res_m),
            req_pl: split_pls(req_p),
            res_pl: split_pls(res_p),
            req_fl: FlVector { values: req_fl },
            res_fl: FlVector { values: res_fl },
        })
    }

    fn labels(&self) -> &[Label] {
        &self.labels
    }
}
