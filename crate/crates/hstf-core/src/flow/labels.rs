//! Label map: CSV of `key,label` where key is a server host or a flow id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use super::{Flow, Label};
use crate::error::{HstfError, Result};

#[derive(Debug, Clone, Default)]
pub struct LabelMap {
    map: HashMap<String, Label>,
}

impl LabelMap {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| HstfError::LabelMap(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty()
                || trimmed.starts_with('#')
                || trimmed.eq_ignore_ascii_case("key,label")
            {
                continue;
            }
            let (key, label) = trimmed.split_once(',').ok_or_else(|| {
                HstfError::LabelMap(format!("line {}: expected `key,label`", i + 1))
            })?;
            let label = match label.trim().to_ascii_lowercase().as_str() {
                "malicious" => Label::Malicious,
                "benign" => Label::Benign,
                other => {
                    return Err(HstfError::LabelMap(format!(
                        "line {}: unknown label `{other}` (expected malicious or benign)",
                        i + 1
                    )))
                }
            };
            map.insert(key.trim().to_string(), label);
        }
        Ok(LabelMap { map })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            HstfError::LabelMap(format!("cannot open {}: {e}", path.display()))
        })?;
        Self::from_reader(file)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Look up a flow: an exact flow-id match wins over the server host.
    pub fn lookup(&self, flow_id: u64, server_host: &str) -> Label {
        if let Some(&l) = self.map.get(&flow_id.to_string()) {
            return l;
        }
        self.map.get(server_host).copied().unwrap_or(Label::Unlabeled)
    }
}

/// Label every flow; flows without a map entry become Unlabeled. Flow ids
/// are sequence positions, matching the grouped flow-jsonl output.
pub fn load_labels(flows: &mut [Flow], map: &LabelMap) {
    for (id, flow) in flows.iter_mut().enumerate() {
        flow.label = map.lookup(id as u64, &flow.key.server.host);
    }
}
