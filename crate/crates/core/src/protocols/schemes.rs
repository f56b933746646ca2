use super::{NodeState, ProtocolError};
use crate::topology::NodeId;

/// Nodes allowed to gossip until the next source self-update.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub nodes: Vec<NodeId>,
    /// Gossip rate of each active node.
    pub rate_each: f64,
}

/// Minimum-age nodes at a source self-update epoch; they split `capacity`
/// equally. `states[k]` belongs to node `k + 1`.
pub fn asuman_active_set(states: &[NodeState], capacity: f64) -> Result<ActiveSet, ProtocolError> {
    let min = states
        .iter()
        .map(|s| s.version_age)
        .min()
        .ok_or(ProtocolError::EmptyNetwork)?;
    let nodes: Vec<NodeId> = states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.version_age == min)
        .map(|(k, _)| k + 1)
        .collect();
    let rate_each = capacity / nodes.len() as f64;
    Ok(ActiveSet { nodes, rate_each })
}

/// Leader after the source delivers to `delivered_to`: the freshly updated
/// node always takes over.
pub fn minage_leader(_current: Option<NodeId>, delivered_to: NodeId) -> NodeId {
    delivered_to
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ages(xs: &[u64]) -> Vec<NodeState> {
        xs.iter()
            .map(|&x| NodeState {
                version_age: x,
                ..NodeState::default()
            })
            .collect()
    }

    #[test]
    fn active_sets() {
        let b = 3.0;
        assert_eq!(
            asuman_active_set(&ages(&[0, 2, 2]), b).unwrap(),
            ActiveSet {
                nodes: vec![1],
                rate_each: 3.0
            }
        );
        assert_eq!(
            asuman_active_set(&ages(&[1, 1, 4]), b).unwrap(),
            ActiveSet {
                nodes: vec![1, 2],
                rate_each: 1.5
            }
        );
        assert_eq!(
            asuman_active_set(&ages(&[5, 5, 5]), b).unwrap().rate_each,
            1.0
        );
        assert_eq!(asuman_active_set(&[], b), Err(ProtocolError::EmptyNetwork));
    }

    #[test]
    fn leader_follows_deliveries() {
        assert_eq!(minage_leader(None, 4), 4);
        assert_eq!(minage_leader(Some(minage_leader(None, 4)), 2), 2);
    }
}
