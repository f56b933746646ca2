//! Plain-text edge list.
//!
//! ```text
//! # kind ring_bidirectional
//! # label ring_bidirectional n=3
//! # jammed 1 2
//! 3 1
//! src 1 0.3333333333333333
//! edge 1 3 0.5
//! ```
//!
//! The header line is `n λ_e`. `src` and `edge` lines follow in any order.
//! Comment lines starting with `#` carry metadata; unknown comments are
//! ignored. Numbers are written in shortest round-trip form, so reading back
//! a written network reproduces it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{Network, NodeId, TopologyError, TopologyKind};

fn parse_err(line: usize, msg: impl Into<String>) -> TopologyError {
    TopologyError::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(
    line: usize,
    tok: Option<&str>,
    what: &str,
) -> Result<T, TopologyError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

impl Network {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kind {}", self.kind);
        let _ = writeln!(out, "# label {}", self.label);
        for (i, j) in &self.jammed {
            let _ = writeln!(out, "# jammed {i} {j}");
        }
        let _ = writeln!(out, "{} {}", self.n, self.self_update_rate);
        for (k, r) in self.source_rates.iter().enumerate() {
            let _ = writeln!(out, "src {} {}", k + 1, r);
        }
        for (i, j, r) in self.edges() {
            let _ = writeln!(out, "edge {i} {j} {r}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        let mut kind = TopologyKind::Arbitrary;
        let mut label = None;
        let mut jammed = BTreeSet::new();
        let mut header: Option<(usize, f64)> = None;
        let mut sources: Vec<Option<f64>> = Vec::new();
        let mut edges: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let ln = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                let (tag, rest) = meta.split_once(' ').unwrap_or((meta, ""));
                match tag {
                    "kind" => kind = rest.trim().parse()?,
                    "label" => label = Some(rest.trim().to_string()),
                    "jammed" => {
                        let mut it = rest.split_whitespace();
                        let i: NodeId = field(ln, it.next(), "node")?;
                        let j: NodeId = field(ln, it.next(), "node")?;
                        jammed.insert((i.min(j), i.max(j)));
                    }
                    _ => {}
                }
                continue;
            }
            let mut it = line.split_whitespace();
            match header {
                None => {
                    let n: usize = field(ln, it.next(), "node count")?;
                    let e: f64 = field(ln, it.next(), "self-update rate")?;
                    header = Some((n, e));
                    sources = vec![None; n];
                }
                Some((n, _)) => match it.next() {
                    Some("src") => {
                        let i: NodeId = field(ln, it.next(), "node")?;
                        let r: f64 = field(ln, it.next(), "rate")?;
                        if i == 0 || i > n {
                            return Err(TopologyError::NodeOutOfRange(i, n));
                        }
                        if sources[i - 1].replace(r).is_some() {
                            return Err(parse_err(ln, format!("duplicate src for node {i}")));
                        }
                    }
                    Some("edge") => {
                        let i: NodeId = field(ln, it.next(), "node")?;
                        let j: NodeId = field(ln, it.next(), "node")?;
                        let r: f64 = field(ln, it.next(), "rate")?;
                        if edges.insert((i, j), r).is_some() {
                            return Err(parse_err(ln, format!("duplicate edge {i} {j}")));
                        }
                    }
                    other => return Err(parse_err(ln, format!("unexpected token {other:?}"))),
                },
            }
            if it.next().is_some() {
                return Err(parse_err(ln, "trailing tokens"));
            }
        }
        let (n, e) = header.ok_or_else(|| parse_err(0, "missing header"))?;
        let sources = sources.into_iter().map(|r| r.unwrap_or(0.0)).collect();
        let label = label.unwrap_or_else(|| kind.to_string());
        let mut net = Network::assemble(n, e, sources, edges, kind, label)?;
        net.jammed = jammed;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{ClusterLayout, IntraCluster, JammerPlan, Placement, Rates};

    #[test]
    fn round_trips_generated_networks() {
        let kinds = [
            (TopologyKind::FullyConnected, 7),
            (TopologyKind::RingBidirectional, 9),
            (TopologyKind::Grid, 16),
            (TopologyKind::GeneralizedRing { f: 3 }, 11),
            (
                TopologyKind::Clustered(ClusterLayout {
                    clusters: 2,
                    cluster_size: 3,
                    intra: IntraCluster::FullyConnected,
                    head_rate: 0.7,
                    head_ring_rate: Some(0.3),
                }),
                8,
            ),
        ];
        for (kind, n) in kinds {
            let net = Network::build(kind, n, Rates::new(1.3, 0.7, 2.1)).unwrap();
            let back = Network::from_text(&net.to_text()).unwrap();
            assert_eq!(back, net);
        }
        let ring = Network::build(TopologyKind::RingBidirectional, 12, Rates::unit()).unwrap();
        let jammed = ring
            .apply_jammers(&JammerPlan::new(3, Placement::Equidistant))
            .unwrap();
        assert_eq!(Network::from_text(&jammed.to_text()).unwrap(), jammed);
    }

    #[test]
    fn reads_hand_written_file() {
        let net = Network::from_text("2 1\nsrc 1 1\nedge 1 2 2\n").unwrap();
        assert_eq!(net.n(), 2);
        assert_eq!(net.source_rate(2), 0.0);
        assert_eq!(net.gossip_rate(1, 2), 2.0);
        assert_eq!(net.kind(), &TopologyKind::Arbitrary);
    }

    #[test]
    fn reports_bad_lines() {
        assert!(matches!(
            Network::from_text("2 1\nsrc 1 x\n"),
            Err(TopologyError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Network::from_text("2 1\nedge 1 2 1\nedge 1 2 1\n"),
            Err(TopologyError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            Network::from_text("2 1\nnode 1\n"),
            Err(TopologyError::Parse { .. })
        ));
        assert!(matches!(
            Network::from_text("# only a comment\n"),
            Err(TopologyError::Parse { line: 0, .. })
        ));
    }
}
