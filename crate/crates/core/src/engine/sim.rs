use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;

use super::metrics::{RunMetrics, TraceRow};
use super::{ClockKind, InterArrival, SimConfig};
use crate::protocols::{
    apply_source_update_all, asuman_active_set, merge_baseline, merge_g_gap, merge_mutation,
    merge_timestomped, minage_leader, timestomp_transform, Direction, Metric, NodeState,
    ProtocolSpec,
};
use crate::rng::{rng, SimRng};
use crate::topology::{Network, NodeId};

/// Per-clock distribution overrides; clocks not listed are exponential at
/// the network's rate.
pub(super) type ClockDists = BTreeMap<ClockKind, InterArrival>;

const MAX_M: usize = 4;

struct Clock {
    kind: ClockKind,
    dist: InterArrival,
    generation: u64,
    count: u64,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    clock: usize,
    generation: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed so the max-heap pops the earliest event, lowest clock first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.clock.cmp(&self.clock))
            .then_with(|| other.generation.cmp(&self.generation))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Scheme {
    Static,
    Asuman,
    Semi,
    Fully { duration: f64 },
}

pub(super) struct Sim<'a> {
    net: &'a Network,
    proto: &'a ProtocolSpec,
    n: usize,
    horizon: f64,
    warm: f64,
    moments: usize,
    rng: SimRng,
    seed: u64,

    clocks: Vec<Clock>,
    heap: BinaryHeap<Entry>,
    scheme: Scheme,
    capacity: f64,
    node_clock: Vec<usize>,
    expiry_clock: Vec<usize>,
    /// Out-neighbors with cumulative rate, for per-node clocks.
    targets: Vec<Vec<(NodeId, f64)>>,
    leader: Option<NodeId>,
    adversary: Vec<bool>,

    states: Vec<NodeState>,
    last_t: Vec<f64>,
    vsum: Vec<[f64; MAX_M]>,
    asum: Vec<[f64; MAX_M]>,

    global_t: f64,
    n_unreliable: usize,
    n_truth: usize,
    unreliable_int: f64,
    truth_int: f64,
    epoch_min: u64,
    epoch_min_int: f64,
    subsets: Vec<Vec<NodeId>>,
    member_of: Vec<Vec<usize>>,
    subset_min: Vec<u64>,
    subset_int: Vec<f64>,

    events: u64,
    trace: Option<Vec<TraceRow>>,
    count_clocks: bool,
}

impl<'a> Sim<'a> {
    pub(super) fn new(
        net: &'a Network,
        proto: &'a ProtocolSpec,
        cfg: &SimConfig,
        seed: u64,
        dists: Option<&ClockDists>,
    ) -> Self {
        let n = net.n();
        let capacity = net.total_gossip_rate();
        let scheme = match proto {
            ProtocolSpec::Asuman => Scheme::Asuman,
            ProtocolSpec::SemiDistributed => Scheme::Semi,
            ProtocolSpec::FullyDistributed { duration } => Scheme::Fully {
                duration: duration.unwrap_or(n as f64 / capacity),
            },
            _ => Scheme::Static,
        };
        let dist_for = |kind: ClockKind, rate: f64| {
            dists
                .and_then(|d| d.get(&kind))
                .copied()
                .unwrap_or(InterArrival::exponential(rate))
        };

        let mut clocks = Vec::new();
        let mut push = |kind: ClockKind, dist: InterArrival| {
            clocks.push(Clock {
                kind,
                dist,
                generation: 0,
                count: 0,
            });
            clocks.len() - 1
        };
        let self_dist = dist_for(ClockKind::SelfUpdate, net.self_update_rate());
        if !self_dist.is_silent() {
            push(ClockKind::SelfUpdate, self_dist);
        }
        for i in net.nodes() {
            let d = dist_for(ClockKind::Source(i), net.source_rate(i));
            if !d.is_silent() {
                push(ClockKind::Source(i), d);
            }
        }
        if let ProtocolSpec::GGap {
            unreliable_rate, ..
        } = proto
        {
            if *unreliable_rate > 0.0 {
                for i in net.nodes() {
                    push(
                        ClockKind::Unreliable(i),
                        InterArrival::exponential(unreliable_rate / n as f64),
                    );
                }
            }
        }
        let mut node_clock = Vec::new();
        let mut expiry_clock = Vec::new();
        let mut targets = Vec::new();
        if scheme == Scheme::Static {
            for (i, j, r) in net.edges() {
                let d = dist_for(ClockKind::Gossip(i, j), r);
                if !d.is_silent() {
                    push(ClockKind::Gossip(i, j), d);
                }
            }
        } else {
            for i in net.nodes() {
                let mut acc = 0.0;
                targets.push(
                    net.out_neighbors(i)
                        .into_iter()
                        .map(|(j, r)| {
                            acc += r;
                            (j, acc)
                        })
                        .collect(),
                );
                let rate = if scheme == Scheme::Asuman {
                    capacity / n as f64
                } else {
                    0.0
                };
                node_clock.push(push(ClockKind::Node(i), InterArrival::exponential(rate)));
            }
            if let Scheme::Fully { duration } = scheme {
                for i in net.nodes() {
                    expiry_clock.push(push(
                        ClockKind::Expiry(i),
                        InterArrival::Deterministic { period: duration },
                    ));
                }
            }
        }

        let adversary = match proto {
            ProtocolSpec::Timestomp { adversaries, .. } => {
                let mut a = vec![false; n + 1];
                for &i in adversaries {
                    a[i] = true;
                }
                a
            }
            _ => vec![false; n + 1],
        };

        let subsets = cfg.tracked_subsets.clone();
        let mut member_of = vec![Vec::new(); n + 1];
        for (k, s) in subsets.iter().enumerate() {
            for &i in s {
                member_of[i].push(k);
            }
        }
        let subset_count = subsets.len();

        let mut sim = Sim {
            net,
            proto,
            n,
            horizon: cfg.horizon,
            warm: cfg.warmup(),
            moments: cfg.max_moment,
            rng: rng(seed),
            seed,
            clocks,
            heap: BinaryHeap::new(),
            scheme,
            capacity,
            node_clock,
            expiry_clock,
            targets,
            leader: None,
            adversary,
            states: vec![NodeState::default(); n],
            last_t: vec![0.0; n],
            vsum: vec![[0.0; MAX_M]; n],
            asum: vec![[0.0; MAX_M]; n],
            global_t: 0.0,
            n_unreliable: 0,
            n_truth: n,
            unreliable_int: 0.0,
            truth_int: 0.0,
            epoch_min: 0,
            epoch_min_int: 0.0,
            subsets,
            member_of,
            subset_min: vec![0; subset_count],
            subset_int: vec![0.0; subset_count],
            events: 0,
            trace: cfg.trace.then(Vec::new),
            count_clocks: cfg.clock_counts,
        };
        for c in 0..sim.clocks.len() {
            if !matches!(sim.clocks[c].kind, ClockKind::Expiry(_)) {
                sim.schedule(c, 0.0);
            }
        }
        sim
    }

    fn schedule(&mut self, c: usize, now: f64) {
        let clock = &self.clocks[c];
        if clock.dist.is_silent() {
            return;
        }
        let dt = clock.dist.sample(&mut self.rng);
        self.heap.push(Entry {
            time: now + dt,
            clock: c,
            generation: clock.generation,
        });
    }

    /// Restarts an exponential clock at a new rate.
    fn set_rate(&mut self, c: usize, rate: f64, now: f64) {
        if self.clocks[c].dist == InterArrival::exponential(rate) {
            return;
        }
        self.clocks[c].generation += 1;
        self.clocks[c].dist = InterArrival::exponential(rate);
        self.schedule(c, now);
    }

    pub(super) fn run(mut self) -> RunMetrics {
        let diverged = self.net.validate().unreachable;
        if !diverged.is_empty() {
            log::warn!("nodes {diverged:?} are unreachable from the source; their ages diverge");
        }
        while let Some(e) = self.heap.pop() {
            if e.generation != self.clocks[e.clock].generation {
                continue;
            }
            if e.time > self.horizon {
                break;
            }
            let now = e.time;
            self.events += 1;
            self.clocks[e.clock].count += 1;
            self.integrate_globals(now);
            let kind = self.clocks[e.clock].kind;
            if !matches!(kind, ClockKind::Expiry(_)) {
                self.schedule(e.clock, now);
            }
            self.handle(kind, now);
        }
        let end = self.horizon;
        self.integrate_globals(end);
        for i in 0..self.n {
            self.flush(i, end);
        }
        self.finish(diverged)
    }

    fn handle(&mut self, kind: ClockKind, now: f64) {
        match kind {
            ClockKind::SelfUpdate => self.self_update(now),
            ClockKind::Source(i) => {
                self.deliver_from_source(i, NodeState::fresh(now), kind, now);
                match self.scheme {
                    Scheme::Semi => {
                        let old = self.leader;
                        let new = minage_leader(old, i);
                        if let Some(o) = old.filter(|&o| o != new) {
                            self.set_rate(self.node_clock[o - 1], 0.0, now);
                        }
                        self.leader = Some(new);
                        self.set_rate(self.node_clock[new - 1], self.capacity, now);
                    }
                    Scheme::Fully { duration } => {
                        self.set_rate(self.node_clock[i - 1], self.capacity, now);
                        let c = self.expiry_clock[i - 1];
                        self.clocks[c].generation += 1;
                        let generation = self.clocks[c].generation;
                        self.heap.push(Entry {
                            time: now + duration,
                            clock: c,
                            generation,
                        });
                    }
                    _ => {}
                }
            }
            ClockKind::Unreliable(i) => {
                self.deliver_from_source(i, NodeState::fresh_unreliable(now), kind, now)
            }
            ClockKind::Gossip(i, j) => self.gossip(i, j, kind, now),
            ClockKind::Node(i) => {
                let t = &self.targets[i - 1];
                if let Some(&(_, total)) = t.last() {
                    let u = self.rng.random::<f64>() * total;
                    let k = t.partition_point(|&(_, acc)| acc <= u).min(t.len() - 1);
                    let j = t[k].0;
                    self.gossip(i, j, kind, now);
                }
            }
            ClockKind::Expiry(i) => {
                self.set_rate(self.node_clock[i - 1], 0.0, now);
                self.record(kind, i, 0, None, None, now);
            }
        }
    }

    fn self_update(&mut self, now: f64) {
        for i in 0..self.n {
            self.flush(i, now);
        }
        apply_source_update_all(&mut self.states);
        for m in &mut self.subset_min {
            *m = m.saturating_add(1);
        }
        self.epoch_min = self.states.iter().map(|s| s.version_age).min().unwrap_or(0);
        if self.scheme == Scheme::Asuman {
            let active =
                asuman_active_set(&self.states, self.capacity).expect("network is non-empty");
            let mut on = vec![false; self.n];
            for &i in &active.nodes {
                on[i - 1] = true;
            }
            for i in 0..self.n {
                let rate = if on[i] { active.rate_each } else { 0.0 };
                self.set_rate(self.node_clock[i], rate, now);
            }
        }
        self.record(ClockKind::SelfUpdate, 0, 0, None, None, now);
    }

    fn deliver_from_source(&mut self, j: NodeId, packet: NodeState, kind: ClockKind, now: f64) {
        let recv = self.states[j - 1];
        let new = match self.proto {
            ProtocolSpec::Baseline(m) => merge_baseline(recv, packet, *m),
            ProtocolSpec::GGap { g, .. } => merge_g_gap(recv, packet, *g),
            ProtocolSpec::Mutation { .. } => merge_mutation(recv, packet),
            ProtocolSpec::Timestomp { .. } => merge_timestomped(recv, packet),
            _ => merge_baseline(recv, packet, Metric::Version),
        };
        self.replace(j, new, kind, 0, now);
    }

    fn gossip(&mut self, i: NodeId, j: NodeId, kind: ClockKind, now: f64) {
        let recv = self.states[j - 1];
        let sender = self.states[i - 1];
        let new = match self.proto {
            ProtocolSpec::Baseline(m) => merge_baseline(recv, sender, *m),
            ProtocolSpec::GGap { g, .. } => merge_g_gap(recv, sender, *g),
            ProtocolSpec::Mutation { p_mut } => {
                let h = *p_mut == 0.0 || self.rng.random::<f64>() >= *p_mut;
                merge_mutation(recv, sender.transmitted(h))
            }
            ProtocolSpec::Timestomp { policy, .. } => {
                let mut packet = sender;
                if self.adversary[i] {
                    let u = self.rng.random::<f64>();
                    packet.claimed_time = timestomp_transform(
                        packet.claimed_time,
                        now,
                        Direction::Outgoing,
                        policy,
                        u,
                    );
                }
                if self.adversary[j] {
                    let u = self.rng.random::<f64>();
                    packet.claimed_time = timestomp_transform(
                        packet.claimed_time,
                        now,
                        Direction::Incoming,
                        policy,
                        u,
                    );
                }
                merge_timestomped(recv, packet)
            }
            _ => merge_baseline(recv, sender, Metric::Version),
        };
        self.replace(j, new, kind, i, now);
    }

    fn replace(&mut self, j: NodeId, new: NodeState, kind: ClockKind, from: NodeId, now: f64) {
        let old = self.states[j - 1];
        if new != old {
            self.flush(j - 1, now);
            self.n_unreliable =
                self.n_unreliable + new.unreliable as usize - old.unreliable as usize;
            self.n_truth = self.n_truth + new.truth as usize - old.truth as usize;
            self.states[j - 1] = new;
            if new.version_age != old.version_age {
                for k in 0..self.member_of[j].len() {
                    let s = self.member_of[j][k];
                    self.subset_min[s] = self.subsets[s]
                        .iter()
                        .map(|&v| self.states[v - 1].version_age)
                        .min()
                        .unwrap_or(0);
                }
            }
        }
        self.record(
            kind,
            from,
            j,
            Some(old.version_age),
            Some(new.version_age),
            now,
        );
    }

    fn record(
        &mut self,
        kind: ClockKind,
        i: NodeId,
        j: NodeId,
        before: Option<u64>,
        after: Option<u64>,
        now: f64,
    ) {
        if let Some(t) = &mut self.trace {
            t.push(TraceRow {
                time: now,
                kind: kind.label(),
                i,
                j,
                before,
                after,
            });
        }
    }

    fn flush(&mut self, i: usize, now: f64) {
        let a = self.last_t[i].max(self.warm);
        if now > a {
            let dt = now - a;
            let s = &self.states[i];
            let x = s.version_age as f64;
            let (d0, d1) = (a - s.fresh_time, now - s.fresh_time);
            let (mut px, mut p0, mut p1) = (1.0, d0, d1);
            for m in 0..self.moments {
                px *= x;
                p0 *= d0;
                p1 *= d1;
                self.vsum[i][m] += px * dt;
                self.asum[i][m] += (p1 - p0) / (m + 2) as f64;
            }
        }
        self.last_t[i] = now;
    }

    fn integrate_globals(&mut self, now: f64) {
        let a = self.global_t.max(self.warm);
        if now > a {
            let dt = now - a;
            self.unreliable_int += self.n_unreliable as f64 * dt;
            self.truth_int += self.n_truth as f64 * dt;
            self.epoch_min_int += self.epoch_min as f64 * dt;
            for (acc, &m) in self.subset_int.iter_mut().zip(&self.subset_min) {
                *acc += m as f64 * dt;
            }
        }
        self.global_t = now;
    }

    fn finish(self, diverged: Vec<NodeId>) -> RunMetrics {
        let w = self.horizon - self.warm;
        let per_node = |sums: &[[f64; MAX_M]]| -> Vec<Vec<f64>> {
            sums.iter()
                .map(|s| s[..self.moments].iter().map(|v| v / w).collect())
                .collect()
        };
        let nf = self.n as f64;
        RunMetrics {
            seed: self.seed,
            window: w,
            version_moments: per_node(&self.vsum),
            aoi_moments: per_node(&self.asum),
            frac_unreliable: self.unreliable_int / (w * nf),
            frac_truth: self.truth_int / (w * nf),
            epoch_min_version: self.epoch_min_int / w,
            subset_min_version: self.subset_int.iter().map(|v| v / w).collect(),
            events: self.events,
            clock_counts: self
                .count_clocks
                .then(|| self.clocks.iter().map(|c| (c.kind, c.count)).collect()),
            diverged,
            trace: self.trace,
        }
    }
}
