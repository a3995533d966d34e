//! Brute-force feature oracle for the acceptance suite: a direct
//! transcription of the matrix fill and the packet/flow vector position
//! tables, independent of the library's extraction code.

use hstf_core::features::{normalize_stat, FeatureConfig, FlowSample, FL_REQ_LEN, FL_RES_LEN, PL_LEN};
use hstf_core::flow::{Direction, Flow, HttpMessage};

fn scale(b: u8) -> f64 {
    ((b % 128) as f64) / 128.0
}

fn matrix(msg: &HttpMessage, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    let mut put = |row: usize, bytes: &[u8]| {
        for (c, &b) in bytes.iter().enumerate().take(cols) {
            out[row * cols + c] = scale(b);
        }
    };
    put(0, &msg.start_line);
    for (i, (name, value)) in msg.header_lines.iter().enumerate() {
        if i >= rows - 2 {
            break;
        }
        let mut line = name.clone();
        line.extend_from_slice(b": ");
        line.extend_from_slice(value);
        put(1 + i, &line);
    }
    put(rows - 1, &msg.payload);
    out
}

fn method_code(m: &[u8]) -> f64 {
    match m.to_ascii_uppercase().as_slice() {
        b"GET" => 1.0,
        b"POST" => 2.0,
        b"HEAD" => 3.0,
        b"OPTIONS" => 4.0,
        b"PUT" => 5.0,
        b"DELETE" => 6.0,
        _ => 7.0,
    }
}

fn version_code(v: &[u8]) -> f64 {
    match v.to_ascii_uppercase().as_slice() {
        b"HTTP/1.0" => 10.0,
        b"HTTP/1.1" => 11.0,
        b"HTTP/2" | b"HTTP/2.0" => 20.0,
        _ => 0.0,
    }
}

fn pl(msg: &HttpMessage) -> Vec<f64> {
    let mut v = vec![0.0; PL_LEN];
    let line = String::from_utf8_lossy(&msg.start_line).to_string();
    let parts: Vec<&str> = line.split(' ').collect();
    match msg.direction {
        Direction::Request => {
            v[0] = method_code(parts[0].as_bytes());
            if parts.len() >= 3 {
                v[1] = parts[1..parts.len() - 1].join(" ").len() as f64;
            }
            v[2] = version_code(parts[parts.len() - 1].as_bytes());
        }
        Direction::Response => {
            v[0] = parts.get(1).and_then(|s| s.parse::<f64>().ok()).unwrap_or(0.0);
            if parts.len() >= 3 {
                v[1] = parts[2..].join(" ").len() as f64;
            }
            v[2] = version_code(parts[0].as_bytes());
        }
    }
    v[3] = msg.header_lines.len() as f64;
    for i in 0..18usize {
        if let Some((name, value)) = msg.header_lines.get(i) {
            v[4 + i] = name.len() as f64;
            v[22 + i] = value.len() as f64;
        }
    }
    v[40] = msg.payload.len() as f64;
    v
}

fn fl(msgs: &[&HttpMessage], direction: Direction) -> Vec<f64> {
    let (len, base) = match direction {
        Direction::Request => (FL_REQ_LEN, 7usize),
        Direction::Response => (FL_RES_LEN, 8usize),
    };
    let mut v = vec![0.0; len];
    v[0] = msgs.len() as f64;
    for m in msgs {
        match direction {
            Direction::Request => {
                let method = m.start_line.split(|&b| b == b' ').next().unwrap_or(b"");
                match method_code(method) as u32 {
                    c @ 1..=4 => v[c as usize] += 1.0,
                    _ => v[5] += 1.0,
                }
            }
            Direction::Response => {
                let line = String::from_utf8_lossy(&m.start_line).to_string();
                let status: Option<u32> = line.split(' ').nth(1).and_then(|s| s.parse().ok());
                match status {
                    Some(s) if (100..600).contains(&s) => v[(s / 100) as usize] += 1.0,
                    _ => v[6] += 1.0,
                }
            }
        }
    }
    if !msgs.is_empty() {
        let sum: f64 = msgs.iter().map(|m| m.wire_size as f64).sum();
        v[base - 1] = sum / msgs.len() as f64;
    }
    for (i, m) in msgs.iter().enumerate() {
        v[base + i] = m.wire_size as f64;
    }
    v
}

pub struct OracleSample {
    pub req_matrices: Vec<Vec<f64>>,
    pub res_matrices: Vec<Vec<f64>>,
    pub req_pl: Vec<Vec<f64>>,
    pub res_pl: Vec<Vec<f64>>,
    pub req_fl: Vec<f64>,
    pub res_fl: Vec<f64>,
}

pub fn oracle_sample(flow: &Flow, cfg: &FeatureConfig) -> OracleSample {
    let reqs: Vec<&HttpMessage> =
        flow.messages.iter().filter(|m| m.direction == Direction::Request).collect();
    let ress: Vec<&HttpMessage> =
        flow.messages.iter().filter(|m| m.direction == Direction::Response).collect();
    let reqs = &reqs[..reqs.len().min(cfg.max_seq)];
    let ress = &ress[..ress.len().min(cfg.max_seq)];

    let mats = |msgs: &[&HttpMessage]| -> Vec<Vec<f64>> {
        (0..cfg.flow_size)
            .map(|i| match msgs.get(i) {
                Some(m) => matrix(m, cfg.rows, cfg.cols),
                None => vec![0.0; cfg.rows * cfg.cols],
            })
            .collect()
    };
    let pls = |msgs: &[&HttpMessage]| -> Vec<Vec<f64>> {
        (0..cfg.flow_size)
            .map(|i| match msgs.get(i) {
                Some(m) => normalize_stat(&pl(m)),
                None => vec![0.0; PL_LEN],
            })
            .collect()
    };
    OracleSample {
        req_matrices: mats(reqs),
        res_matrices: mats(ress),
        req_pl: pls(reqs),
        res_pl: pls(ress),
        req_fl: normalize_stat(&fl(reqs, Direction::Request)),
        res_fl: normalize_stat(&fl(ress, Direction::Response)),
    }
}

/// Element-identical comparison; panics with the first mismatch site.
pub fn assert_identical(flow_idx: usize, got: &FlowSample, want: &OracleSample) {
    for (i, m) in got.req_matrices.iter().enumerate() {
        assert_eq!(m.values, want.req_matrices[i], "flow {flow_idx} req matrix {i}");
    }
    for (i, m) in got.res_matrices.iter().enumerate() {
        assert_eq!(m.values, want.res_matrices[i], "flow {flow_idx} res matrix {i}");
    }
    for (i, p) in got.req_pl.iter().enumerate() {
        assert_eq!(p.values, want.req_pl[i], "flow {flow_idx} req pl {i}");
    }
    for (i, p) in got.res_pl.iter().enumerate() {
        assert_eq!(p.values, want.res_pl[i], "flow {flow_idx} res pl {i}");
    }
    assert_eq!(got.req_fl.values, want.req_fl, "flow {flow_idx} req fl");
    assert_eq!(got.res_fl.values, want.res_fl, "flow {flow_idx} res fl");
}
