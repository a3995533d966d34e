//! Feature extraction operations.

use super::normalize::normalize_stat;
use super::{
    FeatureConfig, FlVector, FlowSample, OverflowPolicy, PlVector, RawMatrix, FL_REQ_LEN,
    FL_RES_LEN, FL_SEQ_SLOTS, PL_HEADER_SLOTS, PL_LEN,
};
use crate::flow::{Direction, Flow, HttpMessage};

fn scale_byte(b: u8) -> f64 {
    f64::from(b % 128) / 128.0
}

fn fill_row(values: &mut [f64], row: usize, cols: usize, bytes: &[u8]) {
    for (c, &b) in bytes.iter().take(cols).enumerate() {
        values[row * cols + c] = scale_byte(b);
    }
}

/// Build the raw byte matrix of one message. Row 0 holds the start line,
/// rows 1..rows-2 successive header lines in `name: value` form, the last
/// row the payload; short rows and missing lines stay zero.
pub fn build_raw_matrix(msg: &HttpMessage, rows: usize, cols: usize) -> RawMatrix {
    debug_assert!(rows >= 3);
    let mut m = RawMatrix::zeros(rows, cols);
    fill_row(&mut m.values, 0, cols, &msg.start_line);
    let header_rows = rows - 2;
    for (i, (name, value)) in msg.header_lines.iter().take(header_rows).enumerate() {
        let mut line = Vec::with_capacity(name.len() + 2 + value.len());
        line.extend_from_slice(name);
        line.extend_from_slice(b": ");
        line.extend_from_slice(value);
        fill_row(&mut m.values, 1 + i, cols, &line);
    }
    fill_row(&mut m.values, rows - 1, cols, &msg.payload);
    m
}

fn method_code(method: &[u8]) -> f64 {
    const CODES: [(&[u8], f64); 6] = [
        (b"GET", 1.0),
        (b"POST", 2.0),
        (b"HEAD", 3.0),
        (b"OPTIONS", 4.0),
        (b"PUT", 5.0),
        (b"DELETE", 6.0),
    ];
    for (name, code) in CODES {
        if method.eq_ignore_ascii_case(name) {
            return code;
        }
    }
    7.0
}

fn version_code(token: Option<&[u8]>) -> f64 {
    match token {
        Some(t) if t.eq_ignore_ascii_case(b"HTTP/1.0") => 10.0,
        Some(t) if t.eq_ignore_ascii_case(b"HTTP/1.1") => 11.0,
        Some(t) if t.eq_ignore_ascii_case(b"HTTP/2") || t.eq_ignore_ascii_case(b"HTTP/2.0") => 20.0,
        _ => 0.0,
    }
}

/// Extract the raw (un-normalized) packet-level vector of one message.
pub fn extract_pl(msg: &HttpMessage) -> PlVector {
    let mut v = vec![0.0; PL_LEN];
    match msg.direction {
        Direction::Request => {
            v[0] = msg.method().map(method_code).unwrap_or(7.0);
            v[1] = msg.url().map(|u| u.len()).unwrap_or(0) as f64;
        }
        Direction::Response => {
            v[0] = msg.status_code().map(f64::from).unwrap_or(0.0);
            v[1] = msg.reason_phrase().len() as f64;
        }
    }
    v[2] = version_code(msg.version_token());
    v[3] = msg.header_lines.len() as f64;
    for (i, (name, value)) in msg.header_lines.iter().take(PL_HEADER_SLOTS).enumerate() {
        v[4 + i] = name.len() as f64;
        v[22 + i] = value.len() as f64;
    }
    v[40] = msg.payload.len() as f64;
    PlVector { values: v }
}

fn status_class_slot(status: Option<u32>) -> usize {
    // Slots 1..=5 hold 1XX..5XX; slot 6 is everything else.
    match status {
        Some(s) if (100..600).contains(&s) => (s / 100) as usize,
        _ => 6,
    }
}

/// Extract the raw (un-normalized) flow-level vector over one direction's
/// messages (already capped at `FL_SEQ_SLOTS` by the caller).
pub fn extract_fl(msgs: &[&HttpMessage], direction: Direction) -> FlVector {
    debug_assert!(msgs.len() <= FL_SEQ_SLOTS);
    debug_assert!(msgs.iter().all(|m| m.direction == direction));
    let (len, seq_base) = match direction {
        Direction::Request => (FL_REQ_LEN, 7),
        Direction::Response => (FL_RES_LEN, 8),
    };
    let mut v = vec![0.0; len];
    v[0] = msgs.len() as f64;
    for msg in msgs {
        match direction {
            Direction::Request => {
                let code = msg.method().map(method_code).unwrap_or(7.0);
                // Slots 1..=4 are get/post/head/options; 5 is other.
                let slot = if (1.0..=4.0).contains(&code) { code as usize } else { 5 };
                v[slot] += 1.0;
            }
            Direction::Response => {
                v[status_class_slot(msg.status_code())] += 1.0;
            }
        }
    }
    let mean_slot = seq_base - 1;
    if !msgs.is_empty() {
        let total: f64 = msgs.iter().map(|m| m.wire_size as f64).sum();
        v[mean_slot] = total / msgs.len() as f64;
    }
    for (i, msg) in msgs.iter().enumerate() {
        v[seq_base + i] = msg.wire_size as f64;
    }
    FlVector { values: v }
}

/// Convert a flow into a model-ready sample. Returns None when a direction
/// exceeds `max_seq` messages under the discard policy.
pub fn flow_to_sample(flow: &Flow, cfg: &FeatureConfig, flow_id: u64) -> Option<FlowSample> {
    let reqs: Vec<&HttpMessage> = flow.requests().collect();
    let ress: Vec<&HttpMessage> = flow.responses().collect();

    let overflow = reqs.len() > cfg.max_seq || ress.len() > cfg.max_seq;
    if overflow && cfg.overflow_policy == OverflowPolicy::Discard {
        return None;
    }
    let reqs_capped = &reqs[..reqs.len().min(cfg.max_seq)];
    let ress_capped = &ress[..ress.len().min(cfg.max_seq)];

    let req_fl = FlVector { values: normalize_stat(&extract_fl(reqs_capped, Direction::Request).values) };
    let res_fl = FlVector { values: normalize_stat(&extract_fl(ress_capped, Direction::Response).values) };

    let per_packet = |msgs: &[&HttpMessage]| -> (Vec<RawMatrix>, Vec<PlVector>) {
        let mut mats = Vec::with_capacity(cfg.flow_size);
        let mut pls = Vec::with_capacity(cfg.flow_size);
        for slot in 0..cfg.flow_size {
            match msgs.get(slot) {
                Some(msg) => {
                    mats.push(build_raw_matrix(msg, cfg.rows, cfg.cols));
                    pls.push(PlVector { values: normalize_stat(&extract_pl(msg).values) });
                }
                None => {
                    mats.push(RawMatrix::zeros(cfg.rows, cfg.cols));
                    pls.push(PlVector::zeros());
                }
            }
        }
        (mats, pls)
    };
    let (req_matrices, req_pl) = per_packet(reqs_capped);
    let (res_matrices, res_pl) = per_packet(ress_capped);

    Some(FlowSample {
        flow_id,
        label: flow.label,
        req_matrices,
        res_matrices,
        req_pl,
        res_pl,
        req_fl,
        res_fl,
        truncated: overflow,
    })
}
