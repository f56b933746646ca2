//! Discrete-event Monte Carlo simulator.
//!
//! Every directed edge, every source link and the source itself own an
//! independent clock. Clocks sit in a time-ordered heap; equal times fire in
//! clock-index order (self-update, source links by node, unreliable source
//! links, edges lexicographically, then per-node clocks), so a run is a pure
//! function of its seed.
//!
//! Ages are integrated exactly: version age is piecewise constant, AoI is
//! piecewise linear, so each node's integral is flushed only when its packet
//! changes (and for every node at a source self-update).

mod clock;
mod metrics;
mod sim;

use rayon::prelude::*;
use thiserror::Error;

use crate::protocols::{Metric, ProtocolError, ProtocolSpec};
use crate::topology::{Network, NodeId, TopologyError};

pub use clock::InterArrival;
pub use metrics::{trace_csv, Metrics, RunMetrics, TraceRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("horizon {horizon} must exceed warm-up {warmup} >= 0")]
    Horizon { horizon: f64, warmup: f64 },
    #[error("moment order {0} outside 1..=4")]
    MomentOrder(usize),
    #[error("tracked subset is empty or names a node outside 1..={0}")]
    Subset(usize),
    #[error("at least two replications are needed for a standard error, got {0}")]
    TooFewReplications(usize),
    #[error("replication seeds must be distinct; {0} repeats")]
    DuplicateSeed(u64),
    #[error("invalid inter-arrival distribution {0}")]
    BadDistribution(String),
    #[error("distribution {0} has no finite second moment")]
    InfiniteMoment(String),
    #[error("renewal line needs at least one hop")]
    EmptyLine,
    #[error("version age on a renewal line needs a source update distribution")]
    MissingSourceClock,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// What a clock drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClockKind {
    SelfUpdate,
    Source(NodeId),
    Unreliable(NodeId),
    Gossip(NodeId, NodeId),
    /// Per-node clock of the dynamic-rate schemes; targets are drawn in
    /// proportion to the node's edge rates.
    Node(NodeId),
    /// End of an active window in the fully distributed scheme.
    Expiry(NodeId),
}

impl ClockKind {
    pub fn label(&self) -> &'static str {
        match self {
            ClockKind::SelfUpdate => "self",
            ClockKind::Source(_) => "source",
            ClockKind::Unreliable(_) => "unreliable",
            ClockKind::Gossip(..) | ClockKind::Node(_) => "gossip",
            ClockKind::Expiry(_) => "expiry",
        }
    }
}

/// Run parameters shared by every replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    /// Discarded prefix; `None` means 10% of the horizon.
    pub warmup: Option<f64>,
    /// Highest moment accumulated, `1..=4`.
    pub max_moment: usize,
    pub trace: bool,
    pub clock_counts: bool,
    /// Subsets whose minimum version age is integrated.
    pub tracked_subsets: Vec<Vec<NodeId>>,
}

impl SimConfig {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            warmup: None,
            max_moment: 1,
            trace: false,
            clock_counts: false,
            tracked_subsets: Vec::new(),
        }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = Some(warmup);
        self
    }

    pub fn with_moments(mut self, m: usize) -> Self {
        self.max_moment = m;
        self
    }

    pub fn warmup(&self) -> f64 {
        self.warmup.unwrap_or(0.1 * self.horizon)
    }

    fn validate(&self, n: usize) -> Result<(), EngineError> {
        let w = self.warmup();
        if !(self.horizon.is_finite() && w.is_finite() && w >= 0.0 && self.horizon > w) {
            return Err(EngineError::Horizon {
                horizon: self.horizon,
                warmup: w,
            });
        }
        if !(1..=4).contains(&self.max_moment) {
            return Err(EngineError::MomentOrder(self.max_moment));
        }
        for s in &self.tracked_subsets {
            if s.is_empty() || s.iter().any(|&i| i == 0 || i > n) {
                return Err(EngineError::Subset(n));
            }
        }
        Ok(())
    }
}

/// Simulates one replication.
pub fn run(
    net: &Network,
    proto: &ProtocolSpec,
    cfg: &SimConfig,
    seed: u64,
) -> Result<RunMetrics, EngineError> {
    cfg.validate(net.n())?;
    proto.validate(net.n())?;
    Ok(sim::Sim::new(net, proto, cfg, seed, None).run())
}

fn check_seeds(seeds: &[u64]) -> Result<(), EngineError> {
    if seeds.len() < 2 {
        return Err(EngineError::TooFewReplications(seeds.len()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(EngineError::DuplicateSeed(w[0]));
    }
    Ok(())
}

/// Runs one replication per seed in parallel. Results keep seed order.
pub fn run_replications(
    net: &Network,
    proto: &ProtocolSpec,
    cfg: &SimConfig,
    seeds: &[u64],
) -> Result<Metrics, EngineError> {
    check_seeds(seeds)?;
    cfg.validate(net.n())?;
    proto.validate(net.n())?;
    let runs = seeds
        .par_iter()
        .map(|&s| sim::Sim::new(net, proto, cfg, s, None).run())
        .collect();
    Ok(Metrics { runs })
}

/// Multi-hop line `0 -> 1 -> ... -> n` whose hops fire as ordinary renewal
/// processes. For version age the source updates itself at the epochs of
/// `source`; for AoI `source` is ignored.
pub fn run_renewal_line(
    hops: &[InterArrival],
    source: Option<InterArrival>,
    metric: Metric,
    cfg: &SimConfig,
    seed: u64,
) -> Result<RunMetrics, EngineError> {
    let (net, dists) = renewal_line(hops, source, metric)?;
    cfg.validate(net.n())?;
    Ok(sim::Sim::new(
        &net,
        &ProtocolSpec::Baseline(metric),
        cfg,
        seed,
        Some(&dists),
    )
    .run())
}

/// Replicated [`run_renewal_line`].
pub fn run_renewal_line_replications(
    hops: &[InterArrival],
    source: Option<InterArrival>,
    metric: Metric,
    cfg: &SimConfig,
    seeds: &[u64],
) -> Result<Metrics, EngineError> {
    check_seeds(seeds)?;
    let (net, dists) = renewal_line(hops, source, metric)?;
    cfg.validate(net.n())?;
    let proto = ProtocolSpec::Baseline(metric);
    let runs = seeds
        .par_iter()
        .map(|&s| sim::Sim::new(&net, &proto, cfg, s, Some(&dists)).run())
        .collect();
    Ok(Metrics { runs })
}

fn renewal_line(
    hops: &[InterArrival],
    source: Option<InterArrival>,
    metric: Metric,
) -> Result<(Network, sim::ClockDists), EngineError> {
    if hops.is_empty() {
        return Err(EngineError::EmptyLine);
    }
    let finite = |d: &InterArrival| -> Result<f64, EngineError> {
        d.validate()?;
        d.second_moment()
            .ok_or_else(|| EngineError::InfiniteMoment(format!("{d:?}")))?;
        d.mean()
            .ok_or_else(|| EngineError::InfiniteMoment(format!("{d:?}")))
    };
    let hop_means = hops.iter().map(finite).collect::<Result<Vec<_>, _>>()?;
    let source = match metric {
        Metric::Version => {
            let s = source.ok_or(EngineError::MissingSourceClock)?;
            finite(&s)?;
            Some(s)
        }
        Metric::Aoi => None,
    };
    let n = hops.len();
    let mut src = vec![0.0; n];
    src[0] = 1.0 / hop_means[0];
    let edges = (1..n).map(|i| ((i, i + 1), 1.0 / hop_means[i]));
    let self_rate = source.and_then(|s| s.mean()).map_or(0.0, |m| 1.0 / m);
    let net = Network::from_rates(n, self_rate, src, edges)?;
    let mut dists = sim::ClockDists::new();
    dists.insert(ClockKind::Source(1), hops[0]);
    for i in 1..n {
        dists.insert(ClockKind::Gossip(i, i + 1), hops[i]);
    }
    if let Some(s) = source {
        dists.insert(ClockKind::SelfUpdate, s);
    }
    Ok((net, dists))
}

#[cfg(test)]
mod tests;
