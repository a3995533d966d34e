//! Deterministic synthetic HTTP-flow generator. Produces benign-like and
//! Trojan-like flows with controllable class separability so the whole
//! pipeline runs and is testable without external datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::http::parse_message_bytes;
use crate::flow::{Endpoint, Flow, FlowKey, HttpMessage, Label};
use crate::seed::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficClass {
    Benign,
    Trojan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separability {
    High,
    Medium,
    Low,
}

impl Separability {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Some(Separability::High),
            "medium" => Some(Separability::Medium),
            "low" => Some(Separability::Low),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenProfile {
    pub class: TrafficClass,
    /// Inclusive request-target byte-length range.
    pub url_len: (usize, usize),
    pub header_count: (usize, usize),
    /// Method draw weights.
    pub method_weights: Vec<(&'static str, u32)>,
    /// Request payload length range (POST only).
    pub payload_len: (usize, usize),
    /// Requests per flow.
    pub msgs_per_flow: (usize, usize),
    /// 1.0 = perfectly periodic beaconing, 0.0 = fully jittered.
    pub beacon_regularity: f64,
    pub separability: Separability,
    pub seed: u64,
}

impl GenProfile {
    pub fn trojan(separability: Separability, seed: u64) -> Self {
        let (url_len, header_count, msgs) = match separability {
            Separability::High => ((48, 80), (3, 3), (1, 2)),
            Separability::Medium => ((30, 60), (3, 5), (1, 3)),
            Separability::Low => ((5, 60), (3, 10), (1, 5)),
        };
        GenProfile {
            class: TrafficClass::Trojan,
            url_len,
            header_count,
            method_weights: vec![("GET", 5), ("POST", 5)],
            payload_len: (8, 24),
            msgs_per_flow: msgs,
            beacon_regularity: match separability {
                Separability::High => 0.95,
                Separability::Medium => 0.7,
                Separability::Low => 0.4,
            },
            separability,
            seed,
        }
    }

    pub fn benign(separability: Separability, seed: u64) -> Self {
        let (url_len, header_count, msgs) = match separability {
            Separability::High => ((5, 28), (6, 12), (2, 6)),
            Separability::Medium => ((5, 45), (4, 10), (1, 5)),
            Separability::Low => ((5, 60), (3, 10), (1, 5)),
        };
        GenProfile {
            class: TrafficClass::Benign,
            url_len,
            header_count,
            method_weights: vec![("GET", 14), ("POST", 3), ("HEAD", 2), ("OPTIONS", 1)],
            payload_len: (50, 1500),
            msgs_per_flow: msgs,
            beacon_regularity: 0.1,
            separability,
            seed,
        }
    }
}

const BASE_TS_US: u64 = 1_700_000_000_000_000;

fn hex_token(rng: &mut ChaCha8Rng, len: usize) -> String {
    const HEX: &[u8] = b"0123456789abcdef";
    (0..len).map(|_| HEX[rng.random_range(0..16)] as char).collect()
}

fn pick_weighted<'a>(rng: &mut ChaCha8Rng, weights: &'a [(&'static str, u32)]) -> &'a str {
    let total: u32 = weights.iter().map(|(_, w)| w).sum();
    let mut roll = rng.random_range(0..total);
    for (name, w) in weights {
        if roll < *w {
            return name;
        }
        roll -= w;
    }
    weights[0].0
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn make_url(rng: &mut ChaCha8Rng, class: TrafficClass, target_len: usize) -> String {
    let mut url = match class {
        // Token-bearing check-in path.
        TrafficClass::Trojan => format!("/c/{}?id=", hex_token(rng, 6)),
        TrafficClass::Benign => {
            const PAGES: [&str; 6] = ["/index", "/news", "/img", "/s", "/doc", "/a"];
            PAGES[rng.random_range(0..PAGES.len())].to_string()
        }
    };
    if url.len() < target_len {
        let fill = target_len - url.len();
        url.push_str(&hex_token(rng, fill));
    }
    url.truncate(target_len.max(1));
    url
}

const BENIGN_HEADER_POOL: [(&str, &str); 11] = [
    ("Accept", "text/html,application/xhtml+xml,*/*;q=0.8"),
    ("Accept-Language", "en-US,en;q=0.5"),
    ("Accept-Encoding", "gzip, deflate"),
    ("Cache-Control", "max-age=0"),
    ("Upgrade-Insecure-Requests", "1"),
    ("DNT", "1"),
    ("Referer", "/"),
    ("Cookie", "sid="),
    ("X-Requested-With", "XMLHttpRequest"),
    ("Pragma", "no-cache"),
    ("Origin", "null"),
];

fn request_bytes(rng: &mut ChaCha8Rng, profile: &GenProfile, host_token: &str) -> Vec<u8> {
    let method = pick_weighted(rng, &profile.method_weights);
    let target_len = sample_range(rng, profile.url_len);
    let url = make_url(rng, profile.class, target_len);
    let mut raw = format!("{method} {url} HTTP/1.1\r\n").into_bytes();

    let header_count = sample_range(rng, profile.header_count);
    raw.extend_from_slice(format!("Host: {host_token}\r\n").as_bytes());
    let ua = match profile.class {
        TrafficClass::Trojan => "Mozilla/4.0 (compatible; MSIE 6.0; Windows NT 5.1)".to_string(),
        TrafficClass::Benign => {
            format!("Mozilla/5.0 (X11; rv:{}.0) Gecko", rng.random_range(60..120))
        }
    };
    raw.extend_from_slice(format!("User-Agent: {ua}\r\n").as_bytes());
    raw.extend_from_slice(b"Connection: keep-alive\r\n");
    if header_count > 3 {
        for k in 0..header_count - 3 {
            let (name, value) = BENIGN_HEADER_POOL[k % BENIGN_HEADER_POOL.len()];
            let pad = rng.random_range(0..8);
            let value = format!("{value}{}", hex_token(rng, pad));
            raw.extend_from_slice(format!("{name}: {value}\r\n").as_bytes());
        }
    }

    let payload = if method == "POST" {
        let len = sample_range(rng, profile.payload_len);
        hex_token(rng, len).into_bytes()
    } else {
        Vec::new()
    };
    if !payload.is_empty() {
        raw.extend_from_slice(format!("Content-Length: {}\r\n", payload.len()).as_bytes());
    }
    raw.extend_from_slice(b"\r\n");
    raw.extend_from_slice(&payload);
    raw
}

fn response_bytes(rng: &mut ChaCha8Rng, profile: &GenProfile) -> Vec<u8> {
    let (status, reason) = match profile.class {
        TrafficClass::Trojan => (200, "OK"),
        TrafficClass::Benign => {
            const STATUSES: [(u32, &str, u32); 5] = [
                (200, "OK", 12),
                (301, "Moved Permanently", 2),
                (302, "Found", 2),
                (404, "Not Found", 3),
                (500, "Internal Server Error", 1),
            ];
            let total: u32 = STATUSES.iter().map(|s| s.2).sum();
            let mut roll = rng.random_range(0..total);
            let mut chosen = (STATUSES[0].0, STATUSES[0].1);
            for (code, phrase, w) in STATUSES {
                if roll < w {
                    chosen = (code, phrase);
                    break;
                }
                roll -= w;
            }
            chosen
        }
    };
    let payload = match profile.class {
        TrafficClass::Trojan => {
            let len = rng.random_range(4..32);
            hex_token(rng, len).into_bytes()
        }
        TrafficClass::Benign => {
            let n = rng.random_range(100..2000);
            let mut body = Vec::with_capacity(n);
            while body.len() < n {
                body.extend_from_slice(b"<html>lorem ipsum dolor sit amet</html>");
            }
            body.truncate(n);
            body
        }
    };
    let mut raw = format!("HTTP/1.1 {status} {reason}\r\n").into_bytes();
    raw.extend_from_slice(b"Server: nginx\r\n");
    raw.extend_from_slice(b"Content-Type: text/html\r\n");
    raw.extend_from_slice(format!("Content-Length: {}\r\n", payload.len()).as_bytes());
    raw.extend_from_slice(b"\r\n");
    raw.extend_from_slice(&payload);
    raw
}

fn message_of(raw: &[u8], ts: u64) -> HttpMessage {
    parse_message_bytes(raw, ts).expect("generated message must parse")
}

/// Generate `count` labeled flows. The same profile and seed produce
/// byte-identical corpora; flows have unique connection tuples.
pub fn generate(profile: &GenProfile, count: usize) -> Vec<Flow> {
    let class_tag = match profile.class {
        TrafficClass::Benign => 0u64,
        TrafficClass::Trojan => 1u64,
    };
    (0..count)
        .map(|idx| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(profile.seed, &[3, class_tag, idx as u64]));
            generate_flow(profile, idx, &mut rng)
        })
        .collect()
}

fn generate_flow(profile: &GenProfile, idx: usize, rng: &mut ChaCha8Rng) -> Flow {
    let (client, server, host_token) = match profile.class {
        TrafficClass::Trojan => (
            Endpoint {
                host: format!("10.1.{}.{}", (idx >> 8) & 0xff, idx & 0xff),
                port: 40000 + (idx % 20000) as u16,
            },
            Endpoint {
                host: format!("203.0.113.{}", 1 + idx % 40),
                port: if idx % 3 == 0 { 8080 } else { 80 },
            },
            format!("h{}.example", hex_token(rng, 10)),
        ),
        TrafficClass::Benign => (
            Endpoint {
                host: format!("10.2.{}.{}", (idx >> 8) & 0xff, idx & 0xff),
                port: 40000 + (idx % 20000) as u16,
            },
            Endpoint { host: format!("198.51.100.{}", 1 + idx % 200), port: 80 },
            format!("w{}.example", hex_token(rng, 8)),
        ),
    };

    let n_req = sample_range(rng, profile.msgs_per_flow);
    let flow_start = BASE_TS_US + (idx as u64) * 1_000_000;
    let mut messages = Vec::with_capacity(n_req * 2);
    let mut t = flow_start;
    for _ in 0..n_req {
        let req_raw = request_bytes(rng, profile, &host_token);
        messages.push(message_of(&req_raw, t));
        let res_raw = response_bytes(rng, profile);
        messages.push(message_of(&res_raw, t + rng.random_range(10_000..400_000)));

        // Next beacon: regular interval with jitter scaled by
        // (1 - beacon_regularity).
        let base_interval = 5_000_000.0;
        let jitter_span = base_interval * (1.0 - profile.beacon_regularity);
        let jitter = rng.random_range(-0.5..0.5) * jitter_span;
        t += (base_interval + jitter).max(600_000.0) as u64;
    }
    messages.sort_by_key(|m| m.timestamp_us);

    let first_ts = messages.first().map(|m| m.timestamp_us).unwrap_or(flow_start);
    let last_ts = messages.last().map(|m| m.timestamp_us).unwrap_or(flow_start);
    Flow {
        key: FlowKey { client, server },
        messages,
        label: match profile.class {
            TrafficClass::Trojan => Label::Malicious,
            TrafficClass::Benign => Label::Benign,
        },
        first_ts,
        last_ts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{flow_to_sample, FeatureConfig};
    use crate::flow::{jsonl, parse_capture, reassemble, CaptureFormat};
    use std::time::Duration;

    #[test]
    fn same_seed_same_corpus() {
        let p = GenProfile::trojan(Separability::High, 7);
        let a = generate(&p, 20);
        let b = generate(&p, 20);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        jsonl::write_jsonl(&mut buf_a, &a).unwrap();
        jsonl::write_jsonl(&mut buf_b, &b).unwrap();
        assert_eq!(buf_a, buf_b);

        let p2 = GenProfile::trojan(Separability::High, 8);
        let c = generate(&p2, 20);
        let mut buf_c = Vec::new();
        jsonl::write_jsonl(&mut buf_c, &c).unwrap();
        assert_ne!(buf_a, buf_c);
    }

    #[test]
    fn label_balance_is_exact() {
        let t = generate(&GenProfile::trojan(Separability::Medium, 1), 31);
        let b = generate(&GenProfile::benign(Separability::Medium, 2), 17);
        assert_eq!(t.len(), 31);
        assert!(t.iter().all(|f| f.label == Label::Malicious));
        assert_eq!(b.len(), 17);
        assert!(b.iter().all(|f| f.label == Label::Benign));
    }

    #[test]
    fn single_request_profile() {
        let mut p = GenProfile::trojan(Separability::High, 3);
        p.msgs_per_flow = (1, 1);
        let flows = generate(&p, 25);
        assert!(flows.iter().all(|f| f.requests().count() == 1));
    }

    #[test]
    fn closure_under_ingest_and_extraction() {
        // Every generated flow must survive serialize -> parse ->
        // reassemble -> feature extraction, flow for flow.
        let mut flows = generate(&GenProfile::trojan(Separability::High, 4), 30);
        flows.extend(generate(&GenProfile::benign(Separability::High, 5), 30));
        let mut buf = Vec::new();
        jsonl::write_jsonl(&mut buf, &flows).unwrap();
        let (msgs, stats) = parse_capture(&buf[..], CaptureFormat::FlowJsonl).unwrap();
        assert_eq!(stats.skipped_undecodable, 0);
        let reassembled = reassemble(msgs, Duration::from_secs(120));
        assert_eq!(reassembled.len(), flows.len());
        let cfg = FeatureConfig::default();
        for (i, f) in reassembled.iter().enumerate() {
            let s = flow_to_sample(f, &cfg, i as u64).expect("extractable");
            s.check_shapes(&cfg).unwrap();
        }
    }

    #[test]
    fn url_length_alone_separates_high_corpus() {
        // Brute-force the best single threshold on raw url length; the
        // high-separability generator must clear 0.9 accuracy.
        let trojan = generate(&GenProfile::trojan(Separability::High, 6), 1000);
        let benign = generate(&GenProfile::benign(Separability::High, 7), 1000);
        let len_of = |f: &Flow| -> usize {
            f.requests().next().and_then(|m| m.url()).map(|u| u.len()).unwrap_or(0)
        };
        let t_lens: Vec<usize> = trojan.iter().map(len_of).collect();
        let b_lens: Vec<usize> = benign.iter().map(len_of).collect();
        let mut best_acc = 0.0f64;
        for threshold in 0..=120usize {
            let correct = t_lens.iter().filter(|&&l| l >= threshold).count()
                + b_lens.iter().filter(|&&l| l < threshold).count();
            best_acc = best_acc.max(correct as f64 / 2000.0);
        }
        assert!(best_acc >= 0.9, "best single-feature accuracy {best_acc}");
    }

    #[test]
    fn low_separability_overlaps() {
        let trojan = generate(&GenProfile::trojan(Separability::Low, 8), 300);
        let benign = generate(&GenProfile::benign(Separability::Low, 9), 300);
        let len_of = |f: &Flow| -> usize {
            f.requests().next().and_then(|m| m.url()).map(|u| u.len()).unwrap_or(0)
        };
        let t_lens: Vec<usize> = trojan.iter().map(len_of).collect();
        let b_lens: Vec<usize> = benign.iter().map(len_of).collect();
        let mut best_acc = 0.0f64;
        for threshold in 0..=120usize {
            let correct = t_lens.iter().filter(|&&l| l >= threshold).count()
                + b_lens.iter().filter(|&&l| l < threshold).count();
            best_acc = best_acc.max(correct as f64 / 600.0);
        }
        assert!(best_acc < 0.9, "low separability should overlap, got {best_acc}");
    }
}
