//! Group parsed messages into full-duplex flows.

use std::collections::HashMap;
use std::time::Duration;

use super::{Direction, Endpoint, Flow, FlowKey, HttpMessage, Label, ParsedMessage, TupleFragment};

/// Unordered endpoint pair: equal for a tuple and its reversal.
#[derive(PartialEq, Eq, Hash, Clone)]
struct PairKey {
    lo: Endpoint,
    hi: Endpoint,
}

impl PairKey {
    fn of(tuple: &TupleFragment) -> Self {
        let a = &tuple.src;
        let b = &tuple.dst;
        if (&a.host, a.port) <= (&b.host, b.port) {
            PairKey { lo: a.clone(), hi: b.clone() }
        } else {
            PairKey { lo: b.clone(), hi: a.clone() }
        }
    }
}

struct OpenFlow {
    entries: Vec<(TupleFragment, HttpMessage)>,
    last_ts: u64,
    opened_seq: usize,
}

impl OpenFlow {
    fn finalize(mut self) -> Flow {
        self.entries.sort_by_key(|(_, m)| m.timestamp_us);
        // Client = sender of the first request; if the capture holds only
        // responses, the client is whoever received the first message.
        let (client, server) = self
            .entries
            .iter()
            .find(|(_, m)| m.direction == Direction::Request)
            .map(|(t, _)| (t.src.clone(), t.dst.clone()))
            .unwrap_or_else(|| {
                let t = &self.entries[0].0;
                (t.dst.clone(), t.src.clone())
            });
        let first_ts = self.entries.first().map(|(_, m)| m.timestamp_us).unwrap_or(0);
        let last_ts = self.entries.last().map(|(_, m)| m.timestamp_us).unwrap_or(0);
        Flow {
            key: FlowKey { client, server },
            messages: self.entries.into_iter().map(|(_, m)| m).collect(),
            label: Label::Unlabeled,
            first_ts,
            last_ts,
        }
    }
}

/// Group messages whose tuples are equal or direction-reversed into flows.
/// A gap greater than `idle_timeout` on a key starts a new flow. Flows are
/// emitted in completion order; whatever is still open when the input ends
/// is emitted in order of first appearance.
pub fn reassemble(messages: Vec<ParsedMessage>, idle_timeout: Duration) -> Vec<Flow> {
    let timeout_us = idle_timeout.as_micros().min(u64::MAX as u128) as u64;
    let mut open: HashMap<PairKey, OpenFlow> = HashMap::new();
    let mut done = Vec::new();
    let mut seq = 0usize;

    for pm in messages {
        let key = PairKey::of(&pm.tuple);
        let ts = pm.message.timestamp_us;
        if let Some(existing) = open.get_mut(&key) {
            if ts.saturating_sub(existing.last_ts) > timeout_us {
                let closed = open.remove(&key).unwrap();
                done.push(closed.finalize());
            }
        }
        let entry = open.entry(key).or_insert_with(|| {
            seq += 1;
            OpenFlow { entries: Vec::new(), last_ts: ts, opened_seq: seq }
        });
        entry.last_ts = entry.last_ts.max(ts);
        entry.entries.push((pm.tuple, pm.message));
    }

    let mut rest: Vec<OpenFlow> = open.into_values().collect();
    rest.sort_by_key(|f| f.opened_seq);
    done.extend(rest.into_iter().map(OpenFlow::finalize));
    done
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::http::parse_message_bytes;

    fn msg(raw: &[u8], ts: u64) -> HttpMessage {
        parse_message_bytes(raw, ts).unwrap()
    }

    fn ep(host: &str, port: u16) -> Endpoint {
        Endpoint { host: host.into(), port }
    }

    fn pm(src: Endpoint, dst: Endpoint, message: HttpMessage) -> ParsedMessage {
        ParsedMessage { tuple: TupleFragment { src, dst }, message }
    }

    #[test]
    fn request_response_pair_is_one_flow() {
        let flows = reassemble(
            vec![
                pm(ep("a", 1000), ep("b", 80), msg(b"GET / HTTP/1.1\r\n\r\n", 0)),
                pm(ep("b", 80), ep("a", 1000), msg(b"HTTP/1.1 200 OK\r\n\r\n", 1)),
            ],
            Duration::from_secs(120),
        );
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].messages.len(), 2);
        assert_eq!(flows[0].key.client, ep("a", 1000));
        assert_eq!(flows[0].key.server, ep("b", 80));
    }

    #[test]
    fn idle_timeout_splits_reused_tuple() {
        let flows = reassemble(
            vec![
                pm(ep("a", 1000), ep("b", 80), msg(b"GET /1 HTTP/1.1\r\n\r\n", 0)),
                pm(ep("a", 1000), ep("b", 80), msg(b"GET /2 HTTP/1.1\r\n\r\n", 300_000_000)),
            ],
            Duration::from_secs(120),
        );
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].messages[0].url(), Some(&b"/1"[..]));
        assert_eq!(flows[1].messages[0].url(), Some(&b"/2"[..]));
    }

    #[test]
    fn interleaved_tuples_group_like_brute_force() {
        // Three distinct tuples interleaved in time.
        let tuples = [
            (ep("a", 1), ep("s", 80)),
            (ep("b", 2), ep("s", 80)),
            (ep("c", 3), ep("s", 80)),
        ];
        let mut msgs = Vec::new();
        for round in 0..3u64 {
            for (i, (src, dst)) in tuples.iter().enumerate() {
                let ts = round * 10 + i as u64;
                msgs.push(pm(src.clone(), dst.clone(), msg(b"GET / HTTP/1.1\r\n\r\n", ts)));
            }
        }

        // Brute-force oracle: bucket by unordered endpoint pair.
        let mut expected: std::collections::HashMap<String, Vec<u64>> = Default::default();
        for m in &msgs {
            let mut names = [m.tuple.src.to_string(), m.tuple.dst.to_string()];
            names.sort();
            expected
                .entry(format!("{}|{}", names[0], names[1]))
                .or_default()
                .push(m.message.timestamp_us);
        }

        let flows = reassemble(msgs, Duration::from_secs(120));
        assert_eq!(flows.len(), 3);
        for flow in &flows {
            let mut names = [flow.key.client.to_string(), flow.key.server.to_string()];
            names.sort();
            let key = format!("{}|{}", names[0], names[1]);
            let got: Vec<u64> = flow.messages.iter().map(|m| m.timestamp_us).collect();
            assert_eq!(&got, expected.get(&key).unwrap());
            assert!(got.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn direction_reversal_does_not_change_grouping() {
        let forward = vec![
            pm(ep("a", 1), ep("s", 80), msg(b"GET / HTTP/1.1\r\n\r\n", 0)),
            pm(ep("s", 80), ep("a", 1), msg(b"HTTP/1.1 200 OK\r\n\r\n", 1)),
        ];
        let reversed = vec![
            pm(ep("a", 1), ep("s", 80), msg(b"GET / HTTP/1.1\r\n\r\n", 0)),
            // Same response record with src/dst permuted.
            pm(ep("a", 1), ep("s", 80), msg(b"HTTP/1.1 200 OK\r\n\r\n", 1)),
        ];
        let f1 = reassemble(forward, Duration::from_secs(120));
        let f2 = reassemble(reversed, Duration::from_secs(120));
        assert_eq!(f1.len(), 1);
        assert_eq!(f2.len(), 1);
        assert_eq!(f1[0].key, f2[0].key);
        assert_eq!(f1[0].messages.len(), f2[0].messages.len());
    }

    #[test]
    fn response_only_flow_picks_receiver_as_client() {
        let flows = reassemble(
            vec![pm(ep("s", 80), ep("a", 1), msg(b"HTTP/1.1 200 OK\r\n\r\n", 0))],
            Duration::from_secs(120),
        );
        assert_eq!(flows[0].key.client, ep("a", 1));
        assert_eq!(flows[0].key.server, ep("s", 80));
    }
}
