use std::collections::BTreeMap;

use super::{ClusterLayout, IntraCluster, Network, NodeId, TopologyError, TopologyKind};

/// Rate parameters shared by every generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Total outgoing gossip rate per node, `λ`.
    pub gossip: f64,
    /// Total source rate, split over the directly updated nodes.
    pub source: f64,
    /// Source self-update rate `λ_e`.
    pub self_update: f64,
}

impl Rates {
    pub fn new(gossip: f64, source: f64, self_update: f64) -> Self {
        Self {
            gossip,
            source,
            self_update,
        }
    }

    /// All three rates equal to one.
    pub fn unit() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

type EdgeMap = BTreeMap<(NodeId, NodeId), f64>;

fn add(edges: &mut EdgeMap, i: NodeId, j: NodeId, rate: f64) {
    *edges.entry((i, j)).or_insert(0.0) += rate;
}

/// Splits `total` equally over `targets` from `i`, accumulating repeated
/// targets (a 2-node bidirectional ring lists its neighbor twice).
fn split(
    edges: &mut EdgeMap,
    i: NodeId,
    targets: &[NodeId],
    total: f64,
) -> Result<(), TopologyError> {
    if targets.is_empty() {
        return Err(TopologyError::ZeroNeighbors(i));
    }
    let each = total / targets.len() as f64;
    for &j in targets {
        add(edges, i, j, each);
    }
    Ok(())
}

fn ring_next(i: NodeId, n: usize, step: usize) -> NodeId {
    (i - 1 + step) % n + 1
}

fn ring_prev(i: NodeId, n: usize, step: usize) -> NodeId {
    (i - 1 + n - step % n) % n + 1
}

pub(super) fn isqrt(n: usize) -> Option<usize> {
    let mut k = (n as f64).sqrt() as usize;
    while k * k > n {
        k -= 1;
    }
    while (k + 1) * (k + 1) <= n {
        k += 1;
    }
    (k * k == n).then_some(k)
}

fn flat_neighbors(kind: &TopologyKind, n: usize, i: NodeId) -> Result<Vec<NodeId>, TopologyError> {
    Ok(match kind {
        TopologyKind::FullyConnected => (1..=n).filter(|&j| j != i).collect(),
        TopologyKind::RingBidirectional => {
            if n < 2 {
                Vec::new()
            } else {
                vec![ring_prev(i, n, 1), ring_next(i, n, 1)]
            }
        }
        TopologyKind::RingUnidirectional => {
            if n < 2 {
                Vec::new()
            } else {
                vec![ring_next(i, n, 1)]
            }
        }
        TopologyKind::Line => [
            i.checked_sub(1).filter(|&j| j >= 1),
            Some(i + 1).filter(|&j| j <= n),
        ]
        .into_iter()
        .flatten()
        .collect(),
        TopologyKind::Grid => {
            let k = isqrt(n).ok_or(TopologyError::NonSquareGrid(n))?;
            let (r, c) = ((i - 1) / k, (i - 1) % k);
            let mut out = Vec::with_capacity(4);
            if r > 0 {
                out.push(i - k);
            }
            if c > 0 {
                out.push(i - 1);
            }
            if c + 1 < k {
                out.push(i + 1);
            }
            if r + 1 < k {
                out.push(i + k);
            }
            out
        }
        TopologyKind::GeneralizedRing { f } => {
            let f = *f;
            if f == 0 || 2 * f >= n {
                return Err(TopologyError::GeneralizedRingSpan { n, f });
            }
            let mut out: Vec<NodeId> = (1..=f)
                .flat_map(|d| [ring_prev(i, n, d), ring_next(i, n, d)])
                .collect();
            out.sort_unstable();
            out
        }
        TopologyKind::Clustered(_) | TopologyKind::Arbitrary => unreachable!("not a flat kind"),
    })
}

fn rates_ok(rates: &Rates) -> Result<(), TopologyError> {
    for (what, v) in [
        ("λ", rates.gossip),
        ("λ_source", rates.source),
        ("λ_e", rates.self_update),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(TopologyError::BadRate {
                what: what.into(),
                value: v,
            });
        }
    }
    Ok(())
}

fn clustered(layout: &ClusterLayout, rates: &Rates) -> Result<(Vec<f64>, EdgeMap), TopologyError> {
    let &ClusterLayout {
        clusters: k,
        cluster_size: m,
        intra,
        head_rate,
        head_ring_rate,
    } = layout;
    if k == 0 || m == 0 {
        return Err(TopologyError::ClusterLayout(format!(
            "need k >= 1 and m >= 1, got k={k}, m={m}"
        )));
    }
    for (what, v) in [("λ_c", Some(head_rate)), ("λ_h", head_ring_rate)] {
        if let Some(v) = v {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TopologyError::BadRate {
                    what: what.into(),
                    value: v,
                });
            }
        }
    }
    let n = layout.node_count();
    let mut source = vec![0.0; n];
    let mut edges = EdgeMap::new();
    for head in 1..=k {
        source[head - 1] = rates.source / k as f64;
        let first = k + (head - 1) * m + 1;
        let members: Vec<NodeId> = (first..first + m).collect();
        split(&mut edges, head, &members, head_rate)?;
        let local = match intra {
            IntraCluster::FullyConnected => Some(TopologyKind::FullyConnected),
            IntraCluster::Ring => Some(TopologyKind::RingBidirectional),
            IntraCluster::Disconnected => None,
        };
        if let (Some(local), true) = (local, m > 1) {
            for (a, &i) in members.iter().enumerate() {
                let targets: Vec<NodeId> = flat_neighbors(&local, m, a + 1)?
                    .into_iter()
                    .map(|b| members[b - 1])
                    .collect();
                split(&mut edges, i, &targets, rates.gossip)?;
            }
        }
    }
    if let (Some(lh), true) = (head_ring_rate, k > 1) {
        for head in 1..=k {
            let targets = flat_neighbors(&TopologyKind::RingBidirectional, k, head)?;
            split(&mut edges, head, &targets, lh)?;
        }
    }
    Ok((source, edges))
}

impl Network {
    /// Builds a generated topology with `n` user nodes.
    ///
    /// Flat kinds split `rates.source` equally over all nodes and each node's
    /// `rates.gossip` equally over its neighbors. For clustered layouts `n`
    /// must equal `k(m+1)`; only heads receive source updates.
    pub fn build(kind: TopologyKind, n: usize, rates: Rates) -> Result<Self, TopologyError> {
        rates_ok(&rates)?;
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        let label = format!("{kind} n={n}");
        let (source, edges) = match &kind {
            TopologyKind::Arbitrary => return Err(TopologyError::ArbitraryNeedsRates),
            TopologyKind::Clustered(layout) => {
                if layout.node_count() != n {
                    return Err(TopologyError::ClusterLayout(format!(
                        "k(m+1) = {} does not match n = {n}",
                        layout.node_count()
                    )));
                }
                clustered(layout, &rates)?
            }
            flat => {
                let mut edges = EdgeMap::new();
                if n > 1 || rates.gossip > 0.0 {
                    for i in 1..=n {
                        split(&mut edges, i, &flat_neighbors(flat, n, i)?, rates.gossip)?;
                    }
                }
                (vec![rates.source / n as f64; n], edges)
            }
        };
        Network::assemble(n, rates.self_update, source, edges, kind, label)
    }
}
