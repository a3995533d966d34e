//! Traffic ingest: parse captures into HTTP messages and reassemble them
//! into full-duplex flows keyed by the connection tuple.

pub mod http;
pub mod jsonl;
pub mod labels;
pub mod pcap;
mod reassembly;

pub use labels::{load_labels, LabelMap};
pub use reassembly::reassemble;

use serde::{Deserialize, Serialize};

use crate::error::{HstfError, Result};

/// One side of a connection. The host is an opaque token: an IP literal,
/// a hashed host string, or anything else the capture carries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
}

impl Endpoint {
    pub fn new(host: impl Into<String>, port: u16) -> Result<Self> {
        let host = host.into();
        if host.is_empty() {
            return Err(HstfError::Config("endpoint host must be non-empty".into()));
        }
        Ok(Endpoint { host, port })
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.host, self.port)
    }
}

/// Canonical flow key. The client is the endpoint that sent the first
/// request-direction message, so the ordering is stable no matter which
/// direction a record was captured in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub client: Endpoint,
    pub server: Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Request,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
    Unlabeled,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Malicious => "malicious",
            Label::Benign => "benign",
            Label::Unlabeled => "unlabeled",
        }
    }
}

/// One complete HTTP request or response: start line, header lines in
/// on-wire order, and payload bytes (capped at [`http::PAYLOAD_CAP`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpMessage {
    pub direction: Direction,
    pub start_line: Vec<u8>,
    pub header_lines: Vec<(Vec<u8>, Vec<u8>)>,
    pub payload: Vec<u8>,
    /// Microseconds since epoch.
    pub timestamp_us: u64,
    /// Bytes the message occupied on the wire (headers + full body,
    /// before the payload cap).
    pub wire_size: usize,
}

impl HttpMessage {
    /// Method token of a request start line.
    pub fn method(&self) -> Option<&[u8]> {
        if self.direction != Direction::Request {
            return None;
        }
        self.start_line.split(|&b| b == b' ').next()
    }

    /// Request-target bytes (between the method and the version token).
    pub fn url(&self) -> Option<&[u8]> {
        if self.direction != Direction::Request {
            return None;
        }
        let first = self.start_line.iter().position(|&b| b == b' ')?;
        let last = self.start_line.iter().rposition(|&b| b == b' ')?;
        if last <= first {
            return None;
        }
        Some(&self.start_line[first + 1..last])
    }

    /// Numeric status code of a response start line, if parseable.
    pub fn status_code(&self) -> Option<u32> {
        if self.direction != Direction::Response {
            return None;
        }
        let mut parts = self.start_line.split(|&b| b == b' ');
        let _version = parts.next()?;
        let code = parts.next()?;
        std::str::from_utf8(code).ok()?.parse().ok()
    }

    /// Reason phrase of a response start line (may be empty).
    pub fn reason_phrase(&self) -> &[u8] {
        if self.direction != Direction::Response {
            return b"";
        }
        let mut spaces = 0usize;
        for (i, &b) in self.start_line.iter().enumerate() {
            if b == b' ' {
                spaces += 1;
                if spaces == 2 {
                    return &self.start_line[i + 1..];
                }
            }
        }
        b""
    }

    /// Protocol version token ("HTTP/1.1" etc.) from either direction.
    pub fn version_token(&self) -> Option<&[u8]> {
        match self.direction {
            Direction::Response => self.start_line.split(|&b| b == b' ').next(),
            Direction::Request => {
                let last = self.start_line.iter().rposition(|&b| b == b' ')?;
                Some(&self.start_line[last + 1..])
            }
        }
    }
}

/// Full-duplex, time-ordered group of messages sharing one connection tuple.
#[derive(Debug, Clone)]
pub struct Flow {
    pub key: FlowKey,
    pub messages: Vec<HttpMessage>,
    pub label: Label,
    pub first_ts: u64,
    pub last_ts: u64,
}

impl Flow {
    pub fn requests(&self) -> impl Iterator<Item = &HttpMessage> {
        self.messages.iter().filter(|m| m.direction == Direction::Request)
    }

    pub fn responses(&self) -> impl Iterator<Item = &HttpMessage> {
        self.messages.iter().filter(|m| m.direction == Direction::Response)
    }
}

/// Connection tuple of a single captured message, as seen on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TupleFragment {
    pub src: Endpoint,
    pub dst: Endpoint,
}

/// A parsed message together with its wire tuple.
#[derive(Debug, Clone)]
pub struct ParsedMessage {
    pub tuple: TupleFragment,
    pub message: HttpMessage,
}

/// Counters kept while parsing a capture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    /// Messages successfully parsed.
    pub messages: usize,
    /// Frames that were not HTTP-over-TCP (UDP, non-IPv4, ...).
    pub skipped_non_http: usize,
    /// Records or stream fragments that could not be decoded as an
    /// HTTP message.
    pub skipped_undecodable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureFormat {
    Pcap,
    FlowJsonl,
}

/// Parse a capture byte stream into (tuple, message) pairs.
///
/// A malformed capture header is fatal; individual truncated or
/// undecodable messages are skipped and counted in [`ParseStats`].
pub fn parse_capture<R: std::io::Read>(
    reader: R,
    format: CaptureFormat,
) -> Result<(Vec<ParsedMessage>, ParseStats)> {
    match format {
        CaptureFormat::Pcap => pcap::parse_pcap(reader),
        CaptureFormat::FlowJsonl => jsonl::parse_jsonl(reader),
    }
}
