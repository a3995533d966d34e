//! Byte-level HTTP/1.x message parsing shared by the pcap and jsonl readers.

use super::{Direction, HttpMessage};

/// Stored payload bytes are capped here; lengths are still counted over
/// the full body.
pub const PAYLOAD_CAP: usize = 64 * 1024;

/// A header block larger than this without a terminator is treated as
/// undecodable.
pub const MAX_HEADER_BLOCK: usize = 1024 * 1024;

/// Classify a start line by shape alone: responses begin with "HTTP/",
/// requests are `METHOD SP target SP HTTP/x`.
pub fn direction_of_start_line(line: &[u8]) -> Option<Direction> {
    if line.starts_with(b"HTTP/") {
        return Some(Direction::Response);
    }
    let mut parts = line.split(|&b| b == b' ');
    let method = parts.next()?;
    if method.is_empty() || !method.iter().all(|&b| is_token_byte(b)) {
        return None;
    }
    let target = parts.next()?;
    if target.is_empty() {
        return None;
    }
    let version = parts.next_back()?;
    if version.starts_with(b"HTTP/") {
        Some(Direction::Request)
    } else {
        None
    }
}

fn is_token_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b"!#$%&'*+-.^_`|~".contains(&b)
}

/// Locate the end of the header block (the byte just past the blank
/// line). Accepts CRLF and bare-LF line endings.
pub fn find_header_end(buf: &[u8]) -> Option<usize> {
    let mut i = 0;
    while i < buf.len() {
        if buf[i] == b'\n' {
            if i + 1 < buf.len() && buf[i + 1] == b'\n' {
                return Some(i + 2);
            }
            if i + 2 < buf.len() && buf[i + 1] == b'\r' && buf[i + 2] == b'\n' {
                return Some(i + 3);
            }
        }
        i += 1;
    }
    None
}

/// Header block split into its start line and (name, value) pairs.
/// Values are trimmed of leading SP/HT; names keep their on-wire bytes.
pub struct HeaderBlock {
    pub start_line: Vec<u8>,
    pub headers: Vec<(Vec<u8>, Vec<u8>)>,
    pub direction: Direction,
}

/// Parse the header block bytes (everything before the blank line).
pub fn parse_header_block(block: &[u8]) -> Option<HeaderBlock> {
    let mut lines = block.split(|&b| b == b'\n').map(|l| match l.last() {
        Some(b'\r') => &l[..l.len() - 1],
        _ => l,
    });
    let start_line = lines.next()?;
    let direction = direction_of_start_line(start_line)?;
    let mut headers = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let colon = line.iter().position(|&b| b == b':')?;
        let name = &line[..colon];
        let mut value = &line[colon + 1..];
        while let Some((&first, rest)) = value.split_first() {
            if first == b' ' || first == b'\t' {
                value = rest;
            } else {
                break;
            }
        }
        headers.push((name.to_vec(), value.to_vec()));
    }
    Some(HeaderBlock {
        start_line: start_line.to_vec(),
        headers,
        direction,
    })
}

fn header_value<'a>(headers: &'a [(Vec<u8>, Vec<u8>)], name: &[u8]) -> Option<&'a [u8]> {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_slice())
}

/// Declared body framing of a header block.
pub enum BodyFraming {
    Length(usize),
    Chunked,
    None,
}

pub fn body_framing(headers: &[(Vec<u8>, Vec<u8>)]) -> BodyFraming {
    if let Some(te) = header_value(headers, b"transfer-encoding") {
        if te.eq_ignore_ascii_case(b"chunked") {
            return BodyFraming::Chunked;
        }
    }
    if let Some(cl) = header_value(headers, b"content-length") {
        if let Ok(s) = std::str::from_utf8(cl) {
            if let Ok(n) = s.trim().parse::<usize>() {
                return BodyFraming::Length(n);
            }
        }
    }
    BodyFraming::None
}

/// Try to decode a chunked body from `buf`. Returns (decoded payload,
/// bytes consumed) when the terminating zero chunk is present.
pub fn decode_chunked(buf: &[u8]) -> Option<(Vec<u8>, usize)> {
    let mut payload = Vec::new();
    let mut pos = 0usize;
    loop {
        let line_end = buf[pos..].windows(2).position(|w| w == b"\r\n")? + pos;
        let size_str = std::str::from_utf8(&buf[pos..line_end]).ok()?;
        let size = usize::from_str_radix(size_str.trim(), 16).ok()?;
        pos = line_end + 2;
        if size == 0 {
            // No trailer support: expect the final CRLF immediately.
            if buf.len() < pos + 2 || &buf[pos..pos + 2] != b"\r\n" {
                return None;
            }
            return Some((payload, pos + 2));
        }
        if buf.len() < pos + size + 2 {
            return None;
        }
        payload.extend_from_slice(&buf[pos..pos + size]);
        pos += size;
        if &buf[pos..pos + 2] != b"\r\n" {
            return None;
        }
        pos += 2;
    }
}

/// Parse one complete message from a standalone byte record (the jsonl
/// path): the payload is everything after the header block.
pub fn parse_message_bytes(raw: &[u8], timestamp_us: u64) -> Option<HttpMessage> {
    let header_end = find_header_end(raw)?;
    let block = parse_header_block(&raw[..header_end])?;
    let body = &raw[header_end..];
    let mut payload = body.to_vec();
    payload.truncate(PAYLOAD_CAP);
    Some(HttpMessage {
        direction: block.direction,
        start_line: block.start_line,
        header_lines: block.headers,
        payload,
        timestamp_us,
        wire_size: raw.len(),
    })
}

/// Canonical wire form of a message: start line, header lines joined as
/// `name: value`, blank line, payload.
pub fn serialize_message(msg: &HttpMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.wire_size.max(64));
    out.extend_from_slice(&msg.start_line);
    out.extend_from_slice(b"\r\n");
    for (name, value) in &msg.header_lines {
        out.extend_from_slice(name);
        out.extend_from_slice(b": ");
        out.extend_from_slice(value);
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(b"\r\n");
    out.extend_from_slice(&msg.payload);
    out
}
