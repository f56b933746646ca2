use std::collections::BTreeSet;

use super::{Network, NodeId, TopologyError, TopologyKind};

/// Where jammers cut links.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Ring links at positions `⌊kn/ñ⌋`, `k = 0..ñ`.
    Equidistant,
    /// Ring links `0..ñ`, all next to each other.
    Adjacent,
    /// Fully connected only: isolate as many nodes as possible and pack the
    /// surviving links into one clique.
    Greedy,
    /// Undirected links to remove. Links already jammed are accepted.
    Explicit(Vec<(NodeId, NodeId)>),
}

impl Placement {
    fn name(&self) -> &'static str {
        match self {
            Placement::Equidistant => "equidistant",
            Placement::Adjacent => "adjacent",
            Placement::Greedy => "greedy",
            Placement::Explicit(_) => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JammerPlan {
    pub count: usize,
    pub placement: Placement,
}

impl JammerPlan {
    pub fn new(count: usize, placement: Placement) -> Self {
        Self { count, placement }
    }

    pub fn explicit(links: Vec<(NodeId, NodeId)>) -> Self {
        Self {
            count: links.len(),
            placement: Placement::Explicit(links),
        }
    }
}

fn key(i: NodeId, j: NodeId) -> (NodeId, NodeId) {
    (i.min(j), i.max(j))
}

/// Ring link `p` joins node `p+1` and its clockwise successor.
fn ring_link(p: usize, n: usize) -> (NodeId, NodeId) {
    key(p + 1, (p + 1) % n + 1)
}

fn binom2(c: usize) -> usize {
    c * c.saturating_sub(1) / 2
}

fn greedy_fc(n: usize, count: usize) -> Vec<(NodeId, NodeId)> {
    let keep = binom2(n) - count;
    let mut c = 0;
    while binom2(c) < keep {
        c += 1;
    }
    let mut cut: Vec<(NodeId, NodeId)> = Vec::with_capacity(count);
    let clique: Vec<(NodeId, NodeId)> = (1..=c)
        .flat_map(|i| (i + 1..=c).map(move |j| (i, j)))
        .collect();
    cut.extend(clique[keep..].iter().copied());
    for i in 1..=n {
        for j in (i + 1)..=n {
            if j > c {
                cut.push((i, j));
            }
        }
    }
    cut
}

impl Network {
    /// Removes the planned links in both directions and returns the jammed
    /// copy. Removed rate is lost, not redistributed.
    pub fn apply_jammers(&self, plan: &JammerPlan) -> Result<Network, TopologyError> {
        let links = self.undirected_links();
        let mismatch = || TopologyError::UnsupportedPlacement {
            placement: plan.placement.name().into(),
            kind: self.kind().to_string(),
        };
        let cut: Vec<(NodeId, NodeId)> = match &plan.placement {
            Placement::Explicit(list) => {
                for &(i, j) in list {
                    let k = key(i, j);
                    if !links.contains(&k) && !self.jammed.contains(&k) {
                        return Err(TopologyError::MissingLink(i, j));
                    }
                }
                list.iter().map(|&(i, j)| key(i, j)).collect()
            }
            placement => {
                let available = links.len() + self.jammed.len();
                if plan.count > available {
                    return Err(TopologyError::TooManyJammers {
                        count: plan.count,
                        links: available,
                    });
                }
                let n = self.n();
                match (placement, self.kind()) {
                    (Placement::Equidistant, k) if k.is_ring() && n >= 3 => (0..plan.count)
                        .map(|k| ring_link(k * n / plan.count, n))
                        .collect(),
                    (Placement::Adjacent, k) if k.is_ring() && n >= 3 => {
                        (0..plan.count).map(|p| ring_link(p, n)).collect()
                    }
                    (Placement::Greedy, TopologyKind::FullyConnected) => greedy_fc(n, plan.count),
                    _ => return Err(mismatch()),
                }
            }
        };
        let cut: BTreeSet<(NodeId, NodeId)> = cut.into_iter().collect();
        let mut net = self.clone();
        net.gossip_rates
            .retain(|&(i, j), _| !cut.contains(&key(i, j)));
        net.jammed.extend(cut);
        Ok(net)
    }
}
