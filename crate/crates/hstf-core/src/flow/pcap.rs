//! Minimal libpcap file support: Ethernet/IPv4/TCP frames in, HTTP
//! messages out. The writer exists so the ingest round trip can be
//! exercised without external fixtures.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::Ipv4Addr;

use super::{http, Endpoint, ParsedMessage, ParseStats, TupleFragment};
use crate::error::{HstfError, Result};

const MAGIC_US_LE: u32 = 0xa1b2_c3d4;
const MAGIC_US_BE: u32 = 0xd4c3_b2a1;
const MAGIC_NS_LE: u32 = 0xa1b2_3c4d;
const MAGIC_NS_BE: u32 = 0x4d3c_b2a1;

struct Frame {
    ts_us: u64,
    data: Vec<u8>,
}

fn read_exact_opt<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(HstfError::MalformedCapture("truncated pcap record".into()));
        }
        filled += n;
    }
    Ok(true)
}

fn read_frames<R: Read>(mut r: R) -> Result<Vec<Frame>> {
    let mut header = [0u8; 24];
    let mut got = 0;
    while got < header.len() {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            return Err(HstfError::MalformedCapture("capture shorter than pcap global header".into()));
        }
        got += n;
    }
    let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
    let (big_endian, nanos) = match magic {
        MAGIC_US_LE => (false, false),
        MAGIC_NS_LE => (false, true),
        MAGIC_US_BE => (true, false),
        MAGIC_NS_BE => (true, true),
        _ => return Err(HstfError::MalformedCapture(format!("unknown pcap magic {magic:#010x}"))),
    };
    let u32_at = |b: &[u8]| -> u32 {
        let arr: [u8; 4] = b.try_into().unwrap();
        if big_endian { u32::from_be_bytes(arr) } else { u32::from_le_bytes(arr) }
    };
    let linktype = u32_at(&header[20..24]);
    if linktype != 1 {
        return Err(HstfError::MalformedCapture(format!("unsupported linktype {linktype}, expected Ethernet")));
    }

    let mut frames = Vec::new();
    loop {
        let mut rec = [0u8; 16];
        if !read_exact_opt(&mut r, &mut rec)? {
            break;
        }
        let ts_sec = u32_at(&rec[0..4]) as u64;
        let ts_frac = u32_at(&rec[4..8]) as u64;
        let incl_len = u32_at(&rec[8..12]) as usize;
        if incl_len > 256 * 1024 * 1024 {
            return Err(HstfError::MalformedCapture(format!("implausible record length {incl_len}")));
        }
        let mut data = vec![0u8; incl_len];
        if !read_exact_opt(&mut r, &mut data)? && incl_len > 0 {
            return Err(HstfError::MalformedCapture("truncated pcap record".into()));
        }
        let ts_us = ts_sec * 1_000_000 + if nanos { ts_frac / 1_000 } else { ts_frac };
        frames.push(Frame { ts_us, data });
    }
    Ok(frames)
}

struct TcpSegment {
    src: Endpoint,
    dst: Endpoint,
    ts_us: u64,
    payload: Vec<u8>,
}

/// Decode Ethernet/IPv4/TCP. Returns None for anything else.
fn decode_frame(frame: &Frame) -> Option<TcpSegment> {
    let d = &frame.data;
    if d.len() < 14 {
        return None;
    }
    let ethertype = u16::from_be_bytes([d[12], d[13]]);
    if ethertype != 0x0800 {
        return None;
    }
    let ip = &d[14..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return None;
    }
    let ihl = ((ip[0] & 0x0f) as usize) * 4;
    if ihl < 20 || ip.len() < ihl {
        return None;
    }
    let total_len = u16::from_be_bytes([ip[2], ip[3]]) as usize;
    if ip[9] != 6 || total_len < ihl || ip.len() < total_len {
        return None;
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let tcp = &ip[ihl..total_len];
    if tcp.len() < 20 {
        return None;
    }
    let src_port = u16::from_be_bytes([tcp[0], tcp[1]]);
    let dst_port = u16::from_be_bytes([tcp[2], tcp[3]]);
    let data_off = ((tcp[12] >> 4) as usize) * 4;
    if data_off < 20 || tcp.len() < data_off {
        return None;
    }
    Some(TcpSegment {
        src: Endpoint { host: src_ip.to_string(), port: src_port },
        dst: Endpoint { host: dst_ip.to_string(), port: dst_port },
        ts_us: frame.ts_us,
        payload: tcp[data_off..].to_vec(),
    })
}

#[derive(Default)]
struct StreamBuf {
    buf: Vec<u8>,
    /// Timestamp for the message currently being assembled.
    msg_ts: u64,
}

/// Pull complete HTTP messages off the front of a directional stream.
fn drain_messages(
    stream: &mut StreamBuf,
    tuple: &TupleFragment,
    out: &mut Vec<ParsedMessage>,
    stats: &mut ParseStats,
) {
    loop {
        let Some(header_end) = http::find_header_end(&stream.buf) else {
            if stream.buf.len() > http::MAX_HEADER_BLOCK {
                stats.skipped_undecodable += 1;
                stream.buf.clear();
            }
            return;
        };
        let Some(block) = http::parse_header_block(&stream.buf[..header_end]) else {
            // Not an HTTP message; drop this stream's pending bytes.
            stats.skipped_undecodable += 1;
            stream.buf.clear();
            return;
        };
        let (payload, consumed) = match http::body_framing(&block.headers) {
            http::BodyFraming::Length(n) => {
                if stream.buf.len() < header_end + n {
                    return; // body incomplete, wait for more segments
                }
                let mut p = stream.buf[header_end..header_end + n].to_vec();
                p.truncate(http::PAYLOAD_CAP);
                (p, header_end + n)
            }
            http::BodyFraming::Chunked => {
                match http::decode_chunked(&stream.buf[header_end..]) {
                    Some((mut p, used)) => {
                        p.truncate(http::PAYLOAD_CAP);
                        (p, header_end + used)
                    }
                    None => return, // chunks incomplete
                }
            }
            // No declared framing: treat as header-only. Bodies delimited
            // by connection close are out of scope for this reader.
            http::BodyFraming::None => (Vec::new(), header_end),
        };
        out.push(ParsedMessage {
            tuple: tuple.clone(),
            message: super::HttpMessage {
                direction: block.direction,
                start_line: block.start_line,
                header_lines: block.headers,
                payload,
                timestamp_us: stream.msg_ts,
                wire_size: consumed,
            },
        });
        stats.messages += 1;
        stream.buf.drain(..consumed);
    }
}

/// Parse a pcap byte stream into HTTP messages.
pub fn parse_pcap<R: Read>(reader: R) -> Result<(Vec<ParsedMessage>, ParseStats)> {
    let frames = read_frames(reader)?;
    let mut stats = ParseStats::default();
    let mut streams: HashMap<(Endpoint, Endpoint), StreamBuf> = HashMap::new();
    let mut out = Vec::new();

    for frame in &frames {
        let Some(seg) = decode_frame(frame) else {
            stats.skipped_non_http += 1;
            continue;
        };
        if seg.payload.is_empty() {
            continue; // control segments carry no message data
        }
        let key = (seg.src.clone(), seg.dst.clone());
        let tuple = TupleFragment { src: seg.src, dst: seg.dst };
        let stream = streams.entry(key).or_default();
        if stream.buf.is_empty() {
            stream.msg_ts = seg.ts_us;
        }
        stream.buf.extend_from_slice(&seg.payload);
        drain_messages(stream, &tuple, &mut out, &mut stats);
    }

    // Anything left over is a truncated or undecodable message.
    for (_, stream) in streams {
        if !stream.buf.is_empty() {
            stats.skipped_undecodable += 1;
        }
    }
    Ok((out, stats))
}

fn ipv4_of_host(host: &str) -> Ipv4Addr {
    host.parse().unwrap_or_else(|_| {
        // Deterministic fallback for non-IP host tokens.
        let mut h: u32 = 2166136261;
        for b in host.bytes() {
            h ^= b as u32;
            h = h.wrapping_mul(16777619);
        }
        Ipv4Addr::new(10, (h >> 16) as u8, (h >> 8) as u8, h as u8)
    })
}

/// Write a pcap file carrying one TCP segment per message payload, with
/// synthetic Ethernet/IPv4/TCP framing.
pub fn write_pcap<W: Write>(w: &mut W, messages: &[(TupleFragment, u64, Vec<u8>)]) -> Result<()> {
    let mut header = Vec::with_capacity(24);
    header.extend_from_slice(&MAGIC_US_LE.to_le_bytes());
    header.extend_from_slice(&2u16.to_le_bytes()); // version major
    header.extend_from_slice(&4u16.to_le_bytes()); // version minor
    header.extend_from_slice(&0u32.to_le_bytes()); // thiszone
    header.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
    header.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
    header.extend_from_slice(&1u32.to_le_bytes()); // linktype Ethernet
    w.write_all(&header)?;

    for (tuple, ts_us, payload) in messages {
        let ip_len = 20 + 20 + payload.len();
        let mut frame = Vec::with_capacity(14 + ip_len);
        frame.extend_from_slice(&[0u8; 12]); // MACs
        frame.extend_from_slice(&0x0800u16.to_be_bytes());
        // IPv4 header, no options.
        frame.push(0x45);
        frame.push(0);
        frame.extend_from_slice(&(ip_len as u16).to_be_bytes());
        frame.extend_from_slice(&[0, 0, 0, 0]); // id, flags
        frame.push(64); // ttl
        frame.push(6); // TCP
        frame.extend_from_slice(&[0, 0]); // checksum (not validated by readers here)
        frame.extend_from_slice(&ipv4_of_host(&tuple.src.host).octets());
        frame.extend_from_slice(&ipv4_of_host(&tuple.dst.host).octets());
        // TCP header, no options.
        frame.extend_from_slice(&tuple.src.port.to_be_bytes());
        frame.extend_from_slice(&tuple.dst.port.to_be_bytes());
        frame.extend_from_slice(&[0u8; 8]); // seq, ack
        frame.push(0x50); // data offset 5
        frame.push(0x18); // PSH|ACK
        frame.extend_from_slice(&1024u16.to_be_bytes()); // window
        frame.extend_from_slice(&[0, 0, 0, 0]); // checksum, urgent
        frame.extend_from_slice(payload);

        let mut rec = Vec::with_capacity(16);
        rec.extend_from_slice(&((ts_us / 1_000_000) as u32).to_le_bytes());
        rec.extend_from_slice(&((ts_us % 1_000_000) as u32).to_le_bytes());
        rec.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        rec.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        w.write_all(&rec)?;
        w.write_all(&frame)?;
    }
    Ok(())
}
