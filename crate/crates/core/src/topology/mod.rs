//! Rate graphs consumed by every other module.
//!
//! A [`Network`] holds the gossip rates `λ_ij` between user nodes, the
//! source rates `λ_0i`, and the source self-update rate `λ_00`. Networks are
//! immutable once built; perturbations such as jamming return a new value.

mod build;
mod format;
mod jam;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use build::Rates;
pub use jam::{JammerPlan, Placement};

/// User node index in `1..=n`. The source is node `0`.
pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("grid requires a perfect-square node count, got {0}")]
    NonSquareGrid(usize),
    #[error("generalized ring needs 1 <= f < n/2, got f={f} for n={n}")]
    GeneralizedRingSpan { n: usize, f: usize },
    #[error("node {0} has no neighbors to gossip with")]
    ZeroNeighbors(NodeId),
    #[error("clustered layout: {0}")]
    ClusterLayout(String),
    #[error("rate {what} must be finite and non-negative, got {value}")]
    BadRate { what: String, value: f64 },
    #[error("node index {0} outside 1..={1}")]
    NodeOutOfRange(NodeId, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("network must have at least one node")]
    Empty,
    #[error("{count} jammers requested but only {links} links exist")]
    TooManyJammers { count: usize, links: usize },
    #[error("link ({0}, {1}) does not exist in the network")]
    MissingLink(NodeId, NodeId),
    #[error("placement {placement} is not defined for {kind} networks")]
    UnsupportedPlacement { placement: String, kind: String },
    #[error("arbitrary networks are built from explicit rates")]
    ArbitraryNeedsRates,
    #[error("unknown topology kind `{0}`")]
    UnknownKind(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// How cluster members gossip among themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntraCluster {
    FullyConnected,
    Ring,
    Disconnected,
}

/// Layout of a clustered network: `clusters` heads, each updating
/// `cluster_size` members.
///
/// Heads are nodes `1..=clusters`; members of cluster `c` (0-based) are
/// `clusters + c*cluster_size + 1 ..= clusters + (c+1)*cluster_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterLayout {
    pub clusters: usize,
    pub cluster_size: usize,
    pub intra: IntraCluster,
    /// Combined rate `λ_c` at which a head updates its members.
    pub head_rate: f64,
    /// When set, heads form a bidirectional ring gossiping at this total rate.
    pub head_ring_rate: Option<f64>,
}

impl ClusterLayout {
    pub fn node_count(&self) -> usize {
        self.clusters * (self.cluster_size + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    FullyConnected,
    RingBidirectional,
    RingUnidirectional,
    Line,
    /// Non-wrapping `sqrt(n) x sqrt(n)` lattice.
    Grid,
    /// Ring where every node gossips with `f` nodes on each side.
    GeneralizedRing {
        f: usize,
    },
    Clustered(ClusterLayout),
    /// Explicit rates.
    Arbitrary,
}

impl TopologyKind {
    /// Whether every user node receives source updates directly.
    pub fn is_flat(&self) -> bool {
        !matches!(self, TopologyKind::Clustered(_) | TopologyKind::Arbitrary)
    }

    pub fn is_ring(&self) -> bool {
        matches!(
            self,
            TopologyKind::RingBidirectional | TopologyKind::RingUnidirectional
        )
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::FullyConnected => write!(f, "fully_connected"),
            TopologyKind::RingBidirectional => write!(f, "ring_bidirectional"),
            TopologyKind::RingUnidirectional => write!(f, "ring_unidirectional"),
            TopologyKind::Line => write!(f, "line"),
            TopologyKind::Grid => write!(f, "grid"),
            TopologyKind::GeneralizedRing { f: span } => write!(f, "generalized_ring:f={span}"),
            TopologyKind::Clustered(c) => {
                let intra = match c.intra {
                    IntraCluster::FullyConnected => "fully_connected",
                    IntraCluster::Ring => "ring",
                    IntraCluster::Disconnected => "disconnected",
                };
                write!(
                    f,
                    "clustered:k={},m={},intra={},head_rate={}",
                    c.clusters, c.cluster_size, intra, c.head_rate
                )?;
                if let Some(h) = c.head_ring_rate {
                    write!(f, ",head_ring={h}")?;
                }
                Ok(())
            }
            TopologyKind::Arbitrary => write!(f, "arbitrary"),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    /// Parses the form produced by `Display`, e.g. `generalized_ring:f=3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || TopologyError::UnknownKind(s.to_string());
        let (name, params) = match s.split_once(':') {
            Some((name, params)) => (name.trim(), params.trim()),
            None => (s.trim(), ""),
        };
        let mut kv = BTreeMap::new();
        for part in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(unknown)?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| kv.get(key).ok_or_else(unknown);
        let num = |key: &str| -> Result<usize, TopologyError> {
            get(key)?.parse().map_err(|_| unknown())
        };
        let real =
            |key: &str| -> Result<f64, TopologyError> { get(key)?.parse().map_err(|_| unknown()) };
        Ok(match name {
            "fully_connected" => TopologyKind::FullyConnected,
            "ring_bidirectional" | "ring" => TopologyKind::RingBidirectional,
            "ring_unidirectional" => TopologyKind::RingUnidirectional,
            "line" => TopologyKind::Line,
            "grid" => TopologyKind::Grid,
            "generalized_ring" => TopologyKind::GeneralizedRing { f: num("f")? },
            "clustered" => {
                let intra = match get("intra")?.as_str() {
                    "fully_connected" => IntraCluster::FullyConnected,
                    "ring" => IntraCluster::Ring,
                    "disconnected" => IntraCluster::Disconnected,
                    _ => return Err(unknown()),
                };
                let head_ring_rate = match kv.get("head_ring") {
                    Some(v) => Some(v.parse().map_err(|_| unknown())?),
                    None => None,
                };
                TopologyKind::Clustered(ClusterLayout {
                    clusters: num("k")?,
                    cluster_size: num("m")?,
                    intra,
                    head_rate: real("head_rate")?,
                    head_ring_rate,
                })
            }
            "arbitrary" => TopologyKind::Arbitrary,
            _ => return Err(unknown()),
        })
    }
}

/// Weighted directed rate graph plus source rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    self_update_rate: f64,
    /// `source_rates[k]` is `λ_0,(k+1)`.
    source_rates: Vec<f64>,
    gossip_rates: BTreeMap<(NodeId, NodeId), f64>,
    /// Undirected links removed by jammers, stored as `(min, max)`.
    jammed: BTreeSet<(NodeId, NodeId)>,
    kind: TopologyKind,
    label: String,
}

fn check_rate(what: impl FnOnce() -> String, value: f64) -> Result<(), TopologyError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(TopologyError::BadRate {
            what: what(),
            value,
        })
    }
}

impl Network {
    /// Builds a network from explicit rates. The result has kind
    /// [`TopologyKind::Arbitrary`].
    pub fn from_rates(
        n: usize,
        self_update_rate: f64,
        source_rates: Vec<f64>,
        gossip: impl IntoIterator<Item = ((NodeId, NodeId), f64)>,
    ) -> Result<Self, TopologyError> {
        let mut edges = BTreeMap::new();
        for ((i, j), rate) in gossip {
            *edges.entry((i, j)).or_insert(0.0) += rate;
        }
        Self::assemble(
            n,
            self_update_rate,
            source_rates,
            edges,
            TopologyKind::Arbitrary,
            "arbitrary".into(),
        )
    }

    pub(crate) fn assemble(
        n: usize,
        self_update_rate: f64,
        source_rates: Vec<f64>,
        gossip_rates: BTreeMap<(NodeId, NodeId), f64>,
        kind: TopologyKind,
        label: String,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if source_rates.len() != n {
            return Err(TopologyError::Parse {
                line: 0,
                msg: format!("expected {n} source rates, got {}", source_rates.len()),
            });
        }
        check_rate(|| "λ_00".into(), self_update_rate)?;
        for (k, &r) in source_rates.iter().enumerate() {
            check_rate(|| format!("λ_0{}", k + 1), r)?;
        }
        for (&(i, j), &r) in &gossip_rates {
            for v in [i, j] {
                if v == 0 || v > n {
                    return Err(TopologyError::NodeOutOfRange(v, n));
                }
            }
            if i == j {
                return Err(TopologyError::SelfLoop(i));
            }
            check_rate(|| format!("λ_{i},{j}"), r)?;
        }
        Ok(Self {
            n,
            self_update_rate,
            source_rates,
            gossip_rates,
            jammed: BTreeSet::new(),
            kind,
            label,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> std::ops::RangeInclusive<NodeId> {
        1..=self.n
    }

    /// `λ_00`, also written `λ_e`.
    pub fn self_update_rate(&self) -> f64 {
        self.self_update_rate
    }

    pub fn source_rate(&self, i: NodeId) -> f64 {
        self.source_rates[i - 1]
    }

    /// Source rates indexed by node minus one.
    pub fn source_rates(&self) -> &[f64] {
        &self.source_rates
    }

    pub fn total_source_rate(&self) -> f64 {
        self.source_rates.iter().sum()
    }

    /// `λ_ij`, zero when absent.
    pub fn gossip_rate(&self, i: NodeId, j: NodeId) -> f64 {
        self.gossip_rates.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Directed edges in lexicographic order, including explicit zero-rate
    /// entries.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.gossip_rates.iter().map(|(&(i, j), &r)| (i, j, r))
    }

    /// Positive-rate out-neighbors of `i`, ascending.
    pub fn out_neighbors(&self, i: NodeId) -> Vec<(NodeId, f64)> {
        self.gossip_rates
            .range((i, 0)..=(i, usize::MAX))
            .filter(|(_, &r)| r > 0.0)
            .map(|(&(_, j), &r)| (j, r))
            .collect()
    }

    /// Total outgoing gossip rate of `i`.
    pub fn out_rate(&self, i: NodeId) -> f64 {
        self.out_neighbors(i).iter().map(|(_, r)| r).sum()
    }

    /// Sum of all gossip rates, the network's gossip capacity `B`.
    pub fn total_gossip_rate(&self) -> f64 {
        self.gossip_rates.values().sum()
    }

    pub fn kind(&self) -> &TopologyKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn jammed_links(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.jammed
    }

    /// Copy with the source rates replaced.
    pub fn with_source_rates(&self, rates: Vec<f64>) -> Result<Self, TopologyError> {
        let mut net = Self::assemble(
            self.n,
            self.self_update_rate,
            rates,
            self.gossip_rates.clone(),
            self.kind.clone(),
            self.label.clone(),
        )?;
        net.jammed = self.jammed.clone();
        Ok(net)
    }

    /// Copy with `λ_00` replaced.
    pub fn with_self_update_rate(&self, rate: f64) -> Result<Self, TopologyError> {
        check_rate(|| "λ_00".into(), rate)?;
        let mut net = self.clone();
        net.self_update_rate = rate;
        Ok(net)
    }

    /// Undirected links `(min, max)` carrying positive rate in either direction.
    pub fn undirected_links(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.gossip_rates
            .iter()
            .filter(|(_, &r)| r > 0.0)
            .map(|(&(i, j), _)| (i.min(j), i.max(j)))
            .collect()
    }

    /// Connected components of the undirected gossip graph, each sorted,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.n + 1];
        for (i, j) in self.undirected_links() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n + 1];
        let mut out = Vec::new();
        for start in 1..=self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Reachability and rate report. Never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut reached = vec![false; self.n + 1];
        let mut queue = VecDeque::new();
        for i in self.nodes() {
            if self.source_rate(i) > 0.0 {
                reached[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(u) = queue.pop_front() {
            for (v, _) in self.out_neighbors(u) {
                if !reached[v] {
                    reached[v] = true;
                    queue.push_back(v);
                }
            }
        }
        let mut incoming = vec![0.0; self.n + 1];
        for (_, j, r) in self.edges() {
            incoming[j] += r;
        }
        let unreachable: Vec<NodeId> = self.nodes().filter(|&i| !reached[i]).collect();
        let zero_rate: Vec<NodeId> = self
            .nodes()
            .filter(|&i| self.source_rate(i) == 0.0 && incoming[i] == 0.0)
            .collect();
        let out_rate_sums: Vec<f64> = self.nodes().map(|i| self.out_rate(i)).collect();
        let isolated = if self.n > 1 {
            self.nodes()
                .filter(|&i| incoming[i] == 0.0 && out_rate_sums[i - 1] == 0.0)
                .collect()
        } else {
            Vec::new()
        };
        ValidationReport {
            ok: unreachable.is_empty(),
            unreachable,
            zero_rate,
            isolated,
            out_rate_sums,
        }
    }
}

/// Output of [`Network::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// True iff every node is reachable from the source over positive rates.
    pub ok: bool,
    pub unreachable: Vec<NodeId>,
    /// Nodes with no positive incoming rate at all.
    pub zero_rate: Vec<NodeId>,
    /// Nodes that neither send nor receive gossip. They are still reachable
    /// when the source feeds them directly.
    pub isolated: Vec<NodeId>,
    /// Total outgoing gossip rate, indexed by node minus one.
    pub out_rate_sums: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_strings_round_trip() {
        let kinds = [
            TopologyKind::FullyConnected,
            TopologyKind::RingBidirectional,
            TopologyKind::RingUnidirectional,
            TopologyKind::Line,
            TopologyKind::Grid,
            TopologyKind::GeneralizedRing { f: 3 },
            TopologyKind::Clustered(ClusterLayout {
                clusters: 4,
                cluster_size: 5,
                intra: IntraCluster::Ring,
                head_rate: 1.5,
                head_ring_rate: Some(2.0),
            }),
            TopologyKind::Arbitrary,
        ];
        for k in kinds {
            assert_eq!(k.to_string().parse::<TopologyKind>().unwrap(), k);
        }
        assert!(matches!(
            "torus".parse::<TopologyKind>(),
            Err(TopologyError::UnknownKind(_))
        ));
    }

    #[test]
    fn rejects_bad_rates_and_loops() {
        assert!(matches!(
            Network::from_rates(2, 1.0, vec![1.0, 0.0], [((1, 1), 1.0)]),
            Err(TopologyError::SelfLoop(1))
        ));
        assert!(matches!(
            Network::from_rates(2, 1.0, vec![1.0, -1.0], []),
            Err(TopologyError::BadRate { .. })
        ));
        assert!(matches!(
            Network::from_rates(2, f64::INFINITY, vec![1.0, 1.0], []),
            Err(TopologyError::BadRate { .. })
        ));
        assert!(matches!(
            Network::from_rates(2, 1.0, vec![1.0, 1.0], [((1, 3), 1.0)]),
            Err(TopologyError::NodeOutOfRange(3, 2))
        ));
    }

    #[test]
    fn validate_flags_broken_line() {
        // 0 -> 1 -> 2 with λ_12 = 0
        let net = Network::from_rates(2, 1.0, vec![1.0, 0.0], [((1, 2), 0.0)]).unwrap();
        let report = net.validate();
        assert!(!report.ok);
        assert_eq!(report.unreachable, vec![2]);
        assert_eq!(report.zero_rate, vec![2]);
    }
}
