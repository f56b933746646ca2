//! Reset maps applied when an update lands.
//!
//! Every function here is pure. The engine owns the randomness and passes in
//! whatever has been sampled (mutation outcome, timestomp draw).

mod schemes;

use thiserror::Error;

use crate::topology::NodeId;

pub use schemes::{asuman_active_set, minage_leader, ActiveSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("rate {name} = {value} must be finite and non-negative")]
    Rate { name: &'static str, value: f64 },
    #[error("timestomp raise + lower probabilities exceed 1 on the {0} side")]
    TimestompSum(&'static str),
    #[error("adversary node {0} is outside the network")]
    Adversary(NodeId),
    #[error("active set of an empty network")]
    EmptyNetwork,
}

/// Packet held by a user node. Deliveries carry a copy of this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    /// Versions behind the source, `X_i`.
    pub version_age: u64,
    /// True generation time of the held packet, `Ū_i`. AoI is `now - fresh_time`.
    pub fresh_time: f64,
    /// Timestamp written on the packet, `U_i`. Equals `fresh_time` unless tampered.
    pub claimed_time: f64,
    /// Packet came from the unreliable source (`S_i = 1`).
    pub unreliable: bool,
    /// Packet carries the truth (`T_i = 1`).
    pub truth: bool,
}

impl Default for NodeState {
    fn default() -> Self {
        Self::fresh(0.0)
    }
}

impl NodeState {
    /// A current, honest, reliable, truthful packet generated at `now`.
    pub fn fresh(now: f64) -> Self {
        Self {
            version_age: 0,
            fresh_time: now,
            claimed_time: now,
            unreliable: false,
            truth: true,
        }
    }

    /// Packet handed out by the unreliable source.
    pub fn fresh_unreliable(now: f64) -> Self {
        Self {
            unreliable: true,
            ..Self::fresh(now)
        }
    }

    pub fn aoi(&self, now: f64) -> f64 {
        now - self.fresh_time
    }

    /// In-flight copy after the channel outcome `h`; `h = false` turns it
    /// into misinformation.
    pub fn transmitted(self, h: bool) -> Self {
        Self {
            truth: self.truth && h,
            ..self
        }
    }
}

/// Which age a baseline merge compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Version,
    Aoi,
}

/// Probabilities of rewriting a timestamp to `now` (raise) or `0` (lower).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StompOdds {
    pub raise: f64,
    pub lower: f64,
}

/// Oblivious timestomping policy of an adversarial node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StompPolicy {
    pub outgoing: StompOdds,
    pub incoming: StompOdds,
}

impl StompPolicy {
    /// Every outgoing packet claims to be current, every incoming one claims
    /// time zero.
    pub fn aggressive() -> Self {
        Self {
            outgoing: StompOdds {
                raise: 1.0,
                lower: 0.0,
            },
            incoming: StompOdds {
                raise: 0.0,
                lower: 1.0,
            },
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        for (side, odds) in [("outgoing", self.outgoing), ("incoming", self.incoming)] {
            check_probability("timestomp raise", odds.raise)?;
            check_probability("timestomp lower", odds.lower)?;
            if odds.raise + odds.lower > 1.0 {
                return Err(ProtocolError::TimestompSum(side));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Incoming,
    Outgoing,
}

/// Gossip protocol variants.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolSpec {
    /// Receiver keeps the fresher packet.
    Baseline(Metric),
    /// Reliability-aware acceptance with tolerance `g`. Unreliable source
    /// deliveries arrive at total rate `unreliable_rate`, split equally.
    GGap { g: u64, unreliable_rate: f64 },
    /// Each inter-node transmission mutates into misinformation with
    /// probability `p_mut`.
    Mutation { p_mut: f64 },
    /// Adversaries rewrite timestamps on links they touch; acceptance
    /// compares claimed timestamps.
    Timestomp {
        adversaries: Vec<NodeId>,
        policy: StompPolicy,
    },
    /// After each source self-update only the minimum-age nodes gossip,
    /// sharing the whole capacity.
    Asuman,
    /// The node most recently updated by the source gossips with the whole
    /// capacity.
    SemiDistributed,
    /// A node updated by the source gossips with the whole capacity for
    /// `duration` (default `1/λ`), then falls silent.
    FullyDistributed { duration: Option<f64> },
}

/// Largest tolerance, treated as infinite.
pub const G_INFINITE: u64 = u64::MAX;

fn check_probability(name: &'static str, value: f64) -> Result<(), ProtocolError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ProtocolError::Probability { name, value })
    }
}

impl ProtocolSpec {
    pub fn validate(&self, n: usize) -> Result<(), ProtocolError> {
        match self {
            ProtocolSpec::GGap {
                unreliable_rate, ..
            } => {
                if !(unreliable_rate.is_finite() && *unreliable_rate >= 0.0) {
                    return Err(ProtocolError::Rate {
                        name: "unreliable_rate",
                        value: *unreliable_rate,
                    });
                }
            }
            ProtocolSpec::Mutation { p_mut } => check_probability("p_mut", *p_mut)?,
            ProtocolSpec::Timestomp {
                adversaries,
                policy,
            } => {
                policy.validate()?;
                if let Some(&bad) = adversaries.iter().find(|&&a| a == 0 || a > n) {
                    return Err(ProtocolError::Adversary(bad));
                }
            }
            ProtocolSpec::FullyDistributed { duration: Some(d) } => {
                if !(d.is_finite() && *d > 0.0) {
                    return Err(ProtocolError::Rate {
                        name: "duration",
                        value: *d,
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Metric used for acceptance decisions.
    pub fn metric(&self) -> Metric {
        match self {
            ProtocolSpec::Baseline(m) => *m,
            ProtocolSpec::Timestomp { .. } => Metric::Aoi,
            _ => Metric::Version,
        }
    }

    /// Short name used in output rows.
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::Baseline(Metric::Version) => "baseline_version",
            ProtocolSpec::Baseline(Metric::Aoi) => "baseline_aoi",
            ProtocolSpec::GGap { .. } => "g_gap",
            ProtocolSpec::Mutation { .. } => "mutation",
            ProtocolSpec::Timestomp { .. } => "timestomp",
            ProtocolSpec::Asuman => "asuman",
            ProtocolSpec::SemiDistributed => "semi_distributed",
            ProtocolSpec::FullyDistributed { .. } => "fully_distributed",
        }
    }
}

/// Keeps the fresher packet; ties keep the receiver's.
pub fn merge_baseline(receiver: NodeState, sender: NodeState, metric: Metric) -> NodeState {
    let take = match metric {
        Metric::Version => sender.version_age < receiver.version_age,
        Metric::Aoi => sender.fresh_time > receiver.fresh_time,
    };
    if take {
        sender
    } else {
        receiver
    }
}

/// Source self-update: every node falls one version further behind.
pub fn apply_source_update_all(states: &mut [NodeState]) {
    for s in states {
        s.version_age = s.version_age.saturating_add(1);
    }
}

/// Reliability-aware acceptance with tolerance `g` (use [`G_INFINITE`] for
/// unlimited tolerance).
pub fn merge_g_gap(receiver: NodeState, sender: NodeState, g: u64) -> NodeState {
    let (xr, xs) = (receiver.version_age, sender.version_age);
    let take = match (receiver.unreliable, sender.unreliable) {
        (a, b) if a == b => xs < xr,
        // receiver unreliable, sender reliable
        (true, false) => xs <= xr.saturating_add(g),
        // receiver reliable, sender unreliable
        _ => xr > xs.saturating_add(g),
    };
    if take {
        sender
    } else {
        receiver
    }
}

/// `delivered` is the in-flight copy, already passed through
/// [`NodeState::transmitted`]. Fresher wins; on equal versions truth wins;
/// otherwise the receiver keeps its packet.
pub fn merge_mutation(receiver: NodeState, delivered: NodeState) -> NodeState {
    let take = delivered.version_age < receiver.version_age
        || (delivered.version_age == receiver.version_age && delivered.truth && !receiver.truth);
    if take {
        delivered
    } else {
        receiver
    }
}

/// Rewrites a claimed timestamp given a uniform draw `u` in `[0, 1)`.
/// `u < raise` gives `now`, `u < raise + lower` gives `0`.
pub fn timestomp_transform(
    claimed: f64,
    now: f64,
    direction: Direction,
    policy: &StompPolicy,
    u: f64,
) -> f64 {
    let odds = match direction {
        Direction::Incoming => policy.incoming,
        Direction::Outgoing => policy.outgoing,
    };
    if u < odds.raise {
        now
    } else if u < odds.raise + odds.lower {
        0.0
    } else {
        claimed
    }
}

/// Adopts the delivered packet iff its claimed timestamp beats the
/// receiver's. The true generation time travels along, stale or not.
pub fn merge_timestomped(receiver: NodeState, delivered: NodeState) -> NodeState {
    if delivered.claimed_time > receiver.claimed_time {
        delivered
    } else {
        receiver
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: u64) -> NodeState {
        NodeState {
            version_age: x,
            ..NodeState::default()
        }
    }

    fn ru(x: u64, unreliable: bool) -> NodeState {
        NodeState { unreliable, ..v(x) }
    }

    fn vt(x: u64, truth: bool) -> NodeState {
        NodeState { truth, ..v(x) }
    }

    fn stamped(claimed: f64, fresh: f64) -> NodeState {
        NodeState {
            claimed_time: claimed,
            fresh_time: fresh,
            ..NodeState::default()
        }
    }

    #[test]
    fn baseline_min_rule() {
        assert_eq!(merge_baseline(v(3), v(1), Metric::Version).version_age, 1);
        assert_eq!(merge_baseline(v(0), v(5), Metric::Version).version_age, 0);
        let got = merge_baseline(stamped(2.0, 2.0), stamped(7.5, 7.5), Metric::Aoi);
        assert_eq!(got.fresh_time, 7.5);
        assert_eq!(got.aoi(10.0), 2.5);
    }

    #[test]
    fn source_update_increments() {
        let mut s = [v(0), v(2)];
        apply_source_update_all(&mut s);
        assert_eq!([s[0].version_age, s[1].version_age], [1, 3]);
        apply_source_update_all(&mut s);
        assert_eq!([s[0].version_age, s[1].version_age], [2, 4]);
        let mut one = [v(0)];
        apply_source_update_all(&mut one);
        assert_eq!(one[0].version_age, 1);
    }

    #[test]
    fn g_gap_table() {
        assert_eq!(merge_g_gap(ru(2, true), ru(4, false), 2), ru(4, false));
        assert_eq!(merge_g_gap(ru(2, true), ru(5, false), 2), ru(2, true));
        assert_eq!(merge_g_gap(ru(3, false), ru(3, true), 0), ru(3, false));
        // reliable receiver gives way once the unreliable packet is G+1 fresher
        assert_eq!(merge_g_gap(ru(4, false), ru(1, true), 2), ru(1, true));
        assert_eq!(merge_g_gap(ru(3, false), ru(1, true), 2), ru(3, false));
        assert_eq!(
            merge_g_gap(ru(100, true), ru(u64::MAX - 1, false), G_INFINITE),
            ru(u64::MAX - 1, false)
        );
    }

    #[test]
    fn mutation_rules() {
        assert_eq!(merge_mutation(vt(2, true), vt(1, false)), vt(1, false));
        assert_eq!(merge_mutation(vt(2, false), vt(2, true)), vt(2, true));
        assert_eq!(merge_mutation(vt(2, false), vt(2, false)), vt(2, false));
        assert!(!vt(1, true).transmitted(false).truth);
        assert!(vt(1, true).transmitted(true).truth);
        assert!(!vt(1, false).transmitted(true).truth);
    }

    #[test]
    fn timestomp_rules() {
        let aggressive = StompPolicy::aggressive();
        assert_eq!(
            timestomp_transform(3.2, 9.0, Direction::Outgoing, &aggressive, 0.7),
            9.0
        );
        assert_eq!(
            timestomp_transform(3.2, 9.0, Direction::Incoming, &aggressive, 0.7),
            0.0
        );
        assert_eq!(
            timestomp_transform(3.2, 9.0, Direction::Incoming, &StompPolicy::identity(), 0.0),
            3.2
        );

        let recv = stamped(5.0, 5.0);
        let got = merge_timestomped(recv, stamped(9.0, 1.0));
        assert_eq!(recv.aoi(9.0), 4.0);
        assert_eq!(got.aoi(9.0), 8.0);
        assert_eq!(
            merge_timestomped(stamped(0.0, 0.0), stamped(0.0, 3.0)),
            stamped(0.0, 0.0)
        );
    }

    #[test]
    fn spec_validation() {
        assert!(ProtocolSpec::Mutation { p_mut: 1.5 }.validate(4).is_err());
        assert!(ProtocolSpec::GGap {
            g: 1,
            unreliable_rate: -1.0
        }
        .validate(4)
        .is_err());
        let bad = StompPolicy {
            outgoing: StompOdds {
                raise: 0.7,
                lower: 0.6,
            },
            ..StompPolicy::default()
        };
        assert_eq!(
            ProtocolSpec::Timestomp {
                adversaries: vec![1],
                policy: bad
            }
            .validate(4),
            Err(ProtocolError::TimestompSum("outgoing"))
        );
        assert_eq!(
            ProtocolSpec::Timestomp {
                adversaries: vec![5],
                policy: StompPolicy::aggressive()
            }
            .validate(4),
            Err(ProtocolError::Adversary(5))
        );
        assert!(ProtocolSpec::Asuman.validate(4).is_ok());
    }
}
