use std::fmt::Write as _;

use crate::stats::Estimate;
use crate::topology::NodeId;

use super::ClockKind;

/// One line of the optional event trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub kind: &'static str,
    pub i: NodeId,
    pub j: NodeId,
    /// Receiver's version age around the event; empty for events without a
    /// single receiver.
    pub before: Option<u64>,
    pub after: Option<u64>,
}

/// Renders trace rows as `time,kind,i,j,X_j_before,X_j_after`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("time,kind,i,j,X_j_before,X_j_after\n");
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.time,
            r.kind,
            r.i,
            r.j,
            opt(r.before),
            opt(r.after)
        );
    }
    out
}

/// Time averages from a single run over `(warmup, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    /// Averaging window length, `horizon - warmup`.
    pub window: f64,
    /// `version_moments[i][m-1]` is the time average of `X_{i+1}^m`.
    pub version_moments: Vec<Vec<f64>>,
    /// `aoi_moments[i][m-1]` is the time average of `Δ_{i+1}^m`.
    pub aoi_moments: Vec<Vec<f64>>,
    /// Time average of the fraction of nodes holding unreliable packets.
    pub frac_unreliable: f64,
    /// Time average of the fraction of nodes holding the truth.
    pub frac_truth: f64,
    /// Time average of the minimum version age right after each source
    /// self-update, held until the next one.
    pub epoch_min_version: f64,
    /// Time average of `min_{i in S} X_i` for each tracked subset.
    pub subset_min_version: Vec<f64>,
    /// Events fired over `(0, horizon]`.
    pub events: u64,
    pub clock_counts: Option<Vec<(ClockKind, u64)>>,
    /// Nodes the source cannot reach; their ages grow without bound.
    pub diverged: Vec<NodeId>,
    pub trace: Option<Vec<TraceRow>>,
}

impl RunMetrics {
    pub fn n(&self) -> usize {
        self.version_moments.len()
    }

    pub fn version(&self, i: NodeId) -> f64 {
        self.version_moments[i - 1][0]
    }

    pub fn aoi(&self, i: NodeId) -> f64 {
        self.aoi_moments[i - 1][0]
    }

    pub fn version_average(&self) -> f64 {
        self.version_moments.iter().map(|m| m[0]).sum::<f64>() / self.n() as f64
    }

    pub fn aoi_average(&self) -> f64 {
        self.aoi_moments.iter().map(|m| m[0]).sum::<f64>() / self.n() as f64
    }

    pub fn version_worst(&self) -> f64 {
        self.version_moments
            .iter()
            .map(|m| m[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Replication summary. Estimates use the spread across runs, in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub runs: Vec<RunMetrics>,
}

impl Metrics {
    pub fn replications(&self) -> usize {
        self.runs.len()
    }

    pub fn n(&self) -> usize {
        self.runs[0].n()
    }

    /// Mean and standard error of any per-run statistic.
    pub fn estimate(&self, f: impl Fn(&RunMetrics) -> f64) -> Estimate {
        let xs: Vec<f64> = self.runs.iter().map(f).collect();
        Estimate::from_samples(&xs)
    }

    pub fn version(&self, i: NodeId) -> Estimate {
        self.estimate(|r| r.version(i))
    }

    pub fn aoi(&self, i: NodeId) -> Estimate {
        self.estimate(|r| r.aoi(i))
    }

    pub fn version_moment(&self, i: NodeId, m: usize) -> Estimate {
        self.estimate(|r| r.version_moments[i - 1][m - 1])
    }

    pub fn aoi_moment(&self, i: NodeId, m: usize) -> Estimate {
        self.estimate(|r| r.aoi_moments[i - 1][m - 1])
    }

    pub fn version_average(&self) -> Estimate {
        self.estimate(RunMetrics::version_average)
    }

    pub fn aoi_average(&self) -> Estimate {
        self.estimate(RunMetrics::aoi_average)
    }

    pub fn version_worst(&self) -> Estimate {
        self.estimate(RunMetrics::version_worst)
    }

    pub fn frac_unreliable(&self) -> Estimate {
        self.estimate(|r| r.frac_unreliable)
    }

    pub fn frac_truth(&self) -> Estimate {
        self.estimate(|r| r.frac_truth)
    }

    pub fn epoch_min_version(&self) -> Estimate {
        self.estimate(|r| r.epoch_min_version)
    }

    pub fn diverged(&self) -> &[NodeId] {
        &self.runs[0].diverged
    }

    pub fn events(&self) -> u64 {
        self.runs.iter().map(|r| r.events).sum()
    }
}
