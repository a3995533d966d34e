//! flow-jsonl: one JSON object per message. This is the canonical
//! intermediate format, so tests and tools never have to craft pcap bytes.

use std::io::{BufRead, BufReader, Read, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{http, Endpoint, Flow, ParsedMessage, ParseStats, TupleFragment};
use crate::error::{HstfError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub src_host: String,
    pub src_port: u16,
    pub dst_host: String,
    pub dst_port: u16,
    pub direction: String,
    pub ts_us: u64,
    pub raw_b64: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub flow_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
}

/// Parse a flow-jsonl stream. Undecodable lines are skipped and counted;
/// a stream with content but zero parseable records is a malformed capture.
pub fn parse_jsonl<R: Read>(reader: R) -> Result<(Vec<ParsedMessage>, ParseStats)> {
    let mut out = Vec::new();
    let mut stats = ParseStats::default();
    let mut saw_content = false;
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        saw_content = true;
        let record: JsonlRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                stats.skipped_undecodable += 1;
                continue;
            }
        };
        let raw = match B64.decode(&record.raw_b64) {
            Ok(b) => b,
            Err(_) => {
                stats.skipped_undecodable += 1;
                continue;
            }
        };
        // Direction comes from the start-line shape, not the record field.
        let message = match http::parse_message_bytes(&raw, record.ts_us) {
            Some(m) => m,
            None => {
                stats.skipped_undecodable += 1;
                continue;
            }
        };
        if record.src_host.is_empty() || record.dst_host.is_empty() {
            stats.skipped_undecodable += 1;
            continue;
        }
        stats.messages += 1;
        out.push(ParsedMessage {
            tuple: TupleFragment {
                src: Endpoint { host: record.src_host, port: record.src_port },
                dst: Endpoint { host: record.dst_host, port: record.dst_port },
            },
            message,
        });
    }
    if saw_content && out.is_empty() {
        return Err(HstfError::MalformedCapture(
            "no parseable flow-jsonl records in input".into(),
        ));
    }
    Ok((out, stats))
}

fn record_for(flow: &Flow, msg: &super::HttpMessage, flow_id: Option<u64>) -> JsonlRecord {
    let (src, dst) = match msg.direction {
        super::Direction::Request => (&flow.key.client, &flow.key.server),
        super::Direction::Response => (&flow.key.server, &flow.key.client),
    };
    JsonlRecord {
        src_host: src.host.clone(),
        src_port: src.port,
        dst_host: dst.host.clone(),
        dst_port: dst.port,
        direction: match msg.direction {
            super::Direction::Request => "request".into(),
            super::Direction::Response => "response".into(),
        },
        ts_us: msg.timestamp_us,
        raw_b64: B64.encode(http::serialize_message(msg)),
        flow_id,
        label: None,
    }
}

/// Write flows as ungrouped flow-jsonl (no flow_id).
pub fn write_jsonl<W: Write>(w: &mut W, flows: &[Flow]) -> Result<()> {
    for flow in flows {
        for msg in &flow.messages {
            let rec = record_for(flow, msg, None);
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Write flows in grouped form: every record carries its flow_id
/// (sequence position) and the flow label when known.
pub fn write_grouped<W: Write>(w: &mut W, flows: &[Flow]) -> Result<()> {
    for (id, flow) in flows.iter().enumerate() {
        for msg in &flow.messages {
            let mut rec = record_for(flow, msg, Some(id as u64));
            if flow.label != super::Label::Unlabeled {
                rec.label = Some(flow.label.as_str().into());
            }
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{reassemble, CaptureFormat, Direction, Label};
    use std::time::Duration;

    fn sample_line(src: &str, sport: u16, dst: &str, dport: u16, ts: u64, raw: &[u8]) -> String {
        serde_json::to_string(&JsonlRecord {
            src_host: src.into(),
            src_port: sport,
            dst_host: dst.into(),
            dst_port: dport,
            direction: "request".into(),
            ts_us: ts,
            raw_b64: B64.encode(raw),
            flow_id: None,
            label: None,
        })
        .unwrap()
    }

    #[test]
    fn parses_and_counts() {
        let mut input = String::new();
        input.push_str(&sample_line("10.0.0.1", 1111, "10.0.0.2", 80, 0, b"GET /a HTTP/1.1\r\n\r\n"));
        input.push('\n');
        input.push_str("not json\n");
        input.push_str(&sample_line("10.0.0.2", 80, "10.0.0.1", 1111, 5, b"HTTP/1.1 200 OK\r\n\r\n"));
        input.push('\n');
        let (msgs, stats) = parse_jsonl(input.as_bytes()).unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(stats.messages, 2);
        assert_eq!(stats.skipped_undecodable, 1);
        assert_eq!(msgs[0].message.direction, Direction::Request);
        assert_eq!(msgs[1].message.direction, Direction::Response);
    }

    #[test]
    fn unparseable_stream_is_fatal() {
        let err = parse_jsonl(&b"garbage\nmore garbage\n"[..]).unwrap_err();
        assert!(matches!(err, HstfError::MalformedCapture(_)));
    }

    #[test]
    fn empty_stream_is_ok() {
        let (msgs, stats) = parse_jsonl(&b""[..]).unwrap();
        assert!(msgs.is_empty());
        assert_eq!(stats, ParseStats::default());
    }

    #[test]
    fn roundtrip_through_grouped_form() {
        let mut input = String::new();
        input.push_str(&sample_line("10.0.0.1", 1111, "10.0.0.2", 80, 0, b"GET /a HTTP/1.1\r\nHost: h\r\n\r\n"));
        input.push('\n');
        input.push_str(&sample_line("10.0.0.2", 80, "10.0.0.1", 1111, 5, b"HTTP/1.1 200 OK\r\n\r\n"));
        input.push('\n');
        let (msgs, _) = crate::flow::parse_capture(input.as_bytes(), CaptureFormat::FlowJsonl).unwrap();
        let mut flows = reassemble(msgs, Duration::from_secs(120));
        flows[0].label = Label::Benign;

        let mut buf = Vec::new();
        write_grouped(&mut buf, &flows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"flow_id\":0"));
        assert!(text.contains("\"label\":\"benign\""));

        let (msgs2, _) = parse_jsonl(&buf[..]).unwrap();
        let flows2 = reassemble(msgs2, Duration::from_secs(120));
        assert_eq!(flows2.len(), 1);
        assert_eq!(flows2[0].messages.len(), 2);
        assert_eq!(flows2[0].key, flows[0].key);
    }
}
