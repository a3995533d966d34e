//! Oracle equivalence: an independent brute-force transcription of the
//! feature layouts (matrix fill, packet vector positions, flow vector
//! positions) must agree element-for-element with the library extractor
//! on a large seeded corpus. The oracle below is written directly from
//! the layout tables and shares no code with the optimized path.

use hstf_core::features::{
    flow_to_sample, normalize_stat, FeatureConfig, FlowSample, FL_REQ_LEN, FL_RES_LEN, PL_LEN,
};
use hstf_core::flow::{Direction, Flow, HttpMessage};
use hstf_core::synth::{generate, GenProfile, Separability};

// ---------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------

fn oracle_scale(b: u8) -> f64 {
    ((b % 128) as f64) / 128.0
}

/// Row 0: start line. Rows 1..=rows-2: header lines as "name: value".
/// Last row: payload. Cell = (byte % 128) / 128, zero padded.
fn oracle_matrix(msg: &HttpMessage, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    let mut put = |row: usize, bytes: &[u8]| {
        for (c, &b) in bytes.iter().enumerate() {
            if c >= cols {
                break;
            }
            out[row * cols + c] = oracle_scale(b);
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

fn oracle_method_code(m: &[u8]) -> f64 {
    let u = m.to_ascii_uppercase();
    match u.as_slice() {
        b"GET" => 1.0,
        b"POST" => 2.0,
        b"HEAD" => 3.0,
        b"OPTIONS" => 4.0,
        b"PUT" => 5.0,
        b"DELETE" => 6.0,
        _ => 7.0,
    }
}

fn oracle_version_code(v: &[u8]) -> f64 {
    let u = v.to_ascii_uppercase();
    match u.as_slice() {
        b"HTTP/1.0" => 10.0,
        b"HTTP/1.1" => 11.0,
        b"HTTP/2" | b"HTTP/2.0" => 20.0,
        _ => 0.0,
    }
}

/// Positions: 0 type, 1 url/reason length, 2 version, 3 header-line
/// count, 4..=21 name lengths, 22..=39 value lengths, 40 payload length.
fn oracle_pl(msg: &HttpMessage) -> Vec<f64> {
    let mut v = vec![0.0; PL_LEN];
    let line = String::from_utf8_lossy(&msg.start_line).to_string();
    let parts: Vec<&str> = line.split(' ').collect();
    match msg.direction {
        Direction::Request => {
            v[0] = oracle_method_code(parts[0].as_bytes());
            if parts.len() >= 3 {
                let url = parts[1..parts.len() - 1].join(" ");
                v[1] = url.len() as f64;
            }
            v[2] = oracle_version_code(parts[parts.len() - 1].as_bytes());
        }
        Direction::Response => {
            v[0] = parts.get(1).and_then(|s| s.parse::<f64>().ok()).unwrap_or(0.0);
            if parts.len() >= 3 {
                v[1] = parts[2..].join(" ").len() as f64;
            }
            v[2] = oracle_version_code(parts[0].as_bytes());
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

/// Request: 0 count, 1 get, 2 post, 3 head, 4 options, 5 other, 6 mean
/// size, 7.. sizes. Response: 0 count, 1..=5 status 1XX..5XX, 6 other,
/// 7 mean, 8.. sizes.
fn oracle_fl(msgs: &[&HttpMessage], direction: Direction) -> Vec<f64> {
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
                match oracle_method_code(method) as u32 {
                    1 => v[1] += 1.0,
                    2 => v[2] += 1.0,
                    3 => v[3] += 1.0,
                    4 => v[4] += 1.0,
                    _ => v[5] += 1.0,
                }
            }
            Direction::Response => {
                let line = String::from_utf8_lossy(&m.start_line).to_string();
                let status: Option<u32> =
                    line.split(' ').nth(1).and_then(|s| s.parse().ok());
                match status {
                    Some(s) if (100..200).contains(&s) => v[1] += 1.0,
                    Some(s) if (200..300).contains(&s) => v[2] += 1.0,
                    Some(s) if (300..400).contains(&s) => v[3] += 1.0,
                    Some(s) if (400..500).contains(&s) => v[4] += 1.0,
                    Some(s) if (500..600).contains(&s) => v[5] += 1.0,
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

/// Full per-flow oracle: direction split in arrival order, first 50 kept,
/// first `flow_size` messages to matrices and packet vectors, zero pads.
fn oracle_sample(flow: &Flow, cfg: &FeatureConfig) -> OracleSample {
    let reqs: Vec<&HttpMessage> =
        flow.messages.iter().filter(|m| m.direction == Direction::Request).collect();
    let ress: Vec<&HttpMessage> =
        flow.messages.iter().filter(|m| m.direction == Direction::Response).collect();
    let reqs = &reqs[..reqs.len().min(cfg.max_seq)];
    let ress = &ress[..ress.len().min(cfg.max_seq)];

    let mats = |msgs: &[&HttpMessage]| -> Vec<Vec<f64>> {
        (0..cfg.flow_size)
            .map(|i| match msgs.get(i) {
                Some(m) => oracle_matrix(m, cfg.rows, cfg.cols),
                None => vec![0.0; cfg.rows * cfg.cols],
            })
            .collect()
    };
    let pls = |msgs: &[&HttpMessage]| -> Vec<Vec<f64>> {
        (0..cfg.flow_size)
            .map(|i| match msgs.get(i) {
                Some(m) => normalize_stat(&oracle_pl(m)),
                None => vec![0.0; PL_LEN],
            })
            .collect()
    };
    OracleSample {
        req_matrices: mats(reqs),
        res_matrices: mats(ress),
        req_pl: pls(reqs),
        res_pl: pls(ress),
        req_fl: normalize_stat(&oracle_fl(reqs, Direction::Request)),
        res_fl: normalize_stat(&oracle_fl(ress, Direction::Response)),
    }
}

struct OracleSample {
    req_matrices: Vec<Vec<f64>>,
    res_matrices: Vec<Vec<f64>>,
    req_pl: Vec<Vec<f64>>,
    res_pl: Vec<Vec<f64>>,
    req_fl: Vec<f64>,
    res_fl: Vec<f64>,
}

fn assert_identical(flow_idx: usize, got: &FlowSample, want: &OracleSample) {
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

#[test]
fn extractor_matches_brute_force_oracle_on_seeded_corpus() {
    let cfg = FeatureConfig::default();
    let mut flows = Vec::new();
    for (seed, sep) in [(101u64, Separability::High), (102, Separability::Medium), (103, Separability::Low)] {
        flows.extend(generate(&GenProfile::trojan(sep, seed), 170));
        flows.extend(generate(&GenProfile::benign(sep, seed + 50), 170));
    }
    assert!(flows.len() >= 1000);
    let started = std::time::Instant::now();
    for (i, flow) in flows.iter().enumerate() {
        let got = flow_to_sample(flow, &cfg, i as u64).expect("sample");
        let want = oracle_sample(flow, &cfg);
        assert_identical(i, &got, &want);
    }
    assert!(started.elapsed().as_secs() < 30, "oracle sweep too slow");
}

#[test]
fn oracle_agrees_on_nondefault_shapes() {
    let cfg = FeatureConfig { rows: 20, cols: 20, flow_size: 6, ..Default::default() };
    let flows = generate(&GenProfile::benign(Separability::Medium, 9), 100);
    for (i, flow) in flows.iter().enumerate() {
        let got = flow_to_sample(flow, &cfg, i as u64).expect("sample");
        let want = oracle_sample(flow, &cfg);
        assert_identical(i, &got, &want);
    }
}
