use gossip_age::protocols::{
    asuman_active_set, merge_baseline, merge_g_gap, merge_mutation, merge_timestomped,
    timestomp_transform, Direction, Metric, NodeState, StompPolicy, G_INFINITE,
};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = NodeState> {
    (0u64..20, 0.0f64..100.0, any::<bool>(), any::<bool>()).prop_map(|(x, t, unreliable, truth)| {
        NodeState {
            version_age: x,
            fresh_time: t,
            claimed_time: t,
            unreliable,
            truth,
        }
    })
}

fn honest() -> impl Strategy<Value = NodeState> {
    state().prop_map(|s| NodeState {
        unreliable: false,
        truth: true,
        ..s
    })
}

proptest! {
    #[test]
    fn baseline_is_idempotent(a in state(), b in state()) {
        for m in [Metric::Version, Metric::Aoi] {
            let ab = merge_baseline(a, b, m);
            prop_assert_eq!(merge_baseline(a, ab, m), ab);
            prop_assert_eq!(merge_baseline(ab, b, m), ab);
            prop_assert_eq!(merge_baseline(a, b, m), ab);
        }
    }

    #[test]
    fn baseline_keeps_the_minimum_version(a in state(), b in state()) {
        let ab = merge_baseline(a, b, Metric::Version);
        prop_assert_eq!(ab.version_age, a.version_age.min(b.version_age));
    }

    #[test]
    fn g_gap_reliable_both_is_baseline(a in honest(), b in honest(), g in 0u64..10) {
        prop_assert_eq!(merge_g_gap(a, b, g), merge_baseline(a, b, Metric::Version));
    }

    #[test]
    fn g_infinite_reliable_always_wins(a in state(), b in state()) {
        let r = NodeState { unreliable: false, ..a };
        let u = NodeState { unreliable: true, ..b };
        prop_assert_eq!(merge_g_gap(r, u, G_INFINITE), r);
        prop_assert_eq!(merge_g_gap(u, r, G_INFINITE), r);
    }

    #[test]
    fn mutation_without_errors_is_baseline(a in honest(), b in honest()) {
        let merged = merge_mutation(a, b.transmitted(true));
        prop_assert_eq!(merged, merge_baseline(a, b, Metric::Version));
        prop_assert!(merged.truth);
    }

    #[test]
    fn identity_timestomp_is_aoi_baseline(a in state(), b in state(), u in 0.0f64..1.0, now in 100.0f64..200.0) {
        let p = StompPolicy::identity();
        let mut sent = b;
        sent.claimed_time = timestomp_transform(sent.claimed_time, now, Direction::Outgoing, &p, u);
        sent.claimed_time = timestomp_transform(sent.claimed_time, now, Direction::Incoming, &p, u);
        prop_assert_eq!(merge_timestomped(a, sent), merge_baseline(a, b, Metric::Aoi));
    }

    #[test]
    fn active_set_shares_minimum(xs in prop::collection::vec(state(), 1..30), cap in 0.1f64..10.0) {
        let set = asuman_active_set(&xs, cap).unwrap();
        let min = xs.iter().map(|s| s.version_age).min().unwrap();
        prop_assert!(!set.nodes.is_empty());
        for &i in &set.nodes {
            prop_assert_eq!(xs[i - 1].version_age, min);
        }
        let total = set.rate_each * set.nodes.len() as f64;
        prop_assert!((total - cap).abs() <= 1e-12 * cap);
    }
}

#[test]
fn aggressive_stomp_rewrites_both_ways() {
    let p = StompPolicy::aggressive();
    assert_eq!(
        timestomp_transform(3.0, 9.0, Direction::Outgoing, &p, 0.99),
        9.0
    );
    assert_eq!(
        timestomp_transform(3.0, 9.0, Direction::Incoming, &p, 0.0),
        0.0
    );
}
