use gossip_age::analytic::{exact_subset_ages, TableMode};
use gossip_age::engine::{run, run_replications, SimConfig};
use gossip_age::protocols::{Metric, ProtocolSpec};
use gossip_age::rng::replication_seeds;
use gossip_age::topology::{JammerPlan, Placement, Rates};
use gossip_age::{Network, TopologyKind};

#[test]
fn small_network_matches_exact() {
    let net = Network::from_rates(
        4,
        1.3,
        vec![0.8, 0.0, 0.4, 0.0],
        [
            ((1, 2), 1.1),
            ((2, 3), 0.6),
            ((3, 4), 1.9),
            ((4, 1), 0.5),
            ((2, 4), 0.3),
        ],
    )
    .unwrap();
    let seeds = replication_seeds(11, 16);
    for (metric, proto) in [
        (Metric::Version, ProtocolSpec::Baseline(Metric::Version)),
        (Metric::Aoi, ProtocolSpec::Baseline(Metric::Aoi)),
    ] {
        let exact = exact_subset_ages(&net, metric, 1, TableMode::Lazy)
            .unwrap()
            .singletons(1);
        let m = run_replications(&net, &proto, &SimConfig::new(2e4), &seeds).unwrap();
        for i in 1..=4 {
            let est = match metric {
                Metric::Version => m.version(i),
                Metric::Aoi => m.aoi(i),
            };
            // 4 SE keeps the joint false-alarm rate of eight checks small
            assert!(
                est.within(exact[i - 1], 4.0),
                "{metric:?} node {i}: {est:?} vs {}",
                exact[i - 1]
            );
        }
    }
}

#[test]
fn nested_subsets_are_monotone_per_run() {
    let net = Network::build(TopologyKind::RingBidirectional, 8, Rates::unit()).unwrap();
    let mut cfg = SimConfig::new(5e3);
    cfg.tracked_subsets = vec![vec![1], vec![1, 2], vec![1, 2, 3, 4], (1..=8).collect()];
    for seed in 0..4 {
        let r = run(&net, &ProtocolSpec::Baseline(Metric::Version), &cfg, seed).unwrap();
        let mins = &r.subset_min_version;
        assert!(mins.windows(2).all(|w| w[1] <= w[0]), "{mins:?}");
        assert!((mins[0] - r.version(1)).abs() < 1e-9);
    }
}

#[test]
fn clean_ring_nodes_agree() {
    let net = Network::build(TopologyKind::RingBidirectional, 16, Rates::unit()).unwrap();
    let m = run_replications(
        &net,
        &ProtocolSpec::Baseline(Metric::Version),
        &SimConfig::new(5e3),
        &replication_seeds(3, 12),
    )
    .unwrap();
    let avg = m.version_average().mean;
    for i in 1..=16 {
        assert!(
            m.version(i).within(avg, 4.0),
            "node {i}: {:?} vs {avg}",
            m.version(i)
        );
    }
}

#[test]
fn jammed_ring_line_profile() {
    // one cut turns the ring into a line 2-3-...-12-1
    let ring = Network::build(TopologyKind::RingBidirectional, 12, Rates::unit()).unwrap();
    let line = ring
        .apply_jammers(&JammerPlan::new(1, Placement::Adjacent))
        .unwrap();
    let exact = exact_subset_ages(&line, Metric::Version, 1, TableMode::Lazy)
        .unwrap()
        .singletons(1);
    let order: Vec<usize> = (2..=12).chain([1]).collect();
    let profile: Vec<f64> = order.iter().map(|&i| exact[i - 1]).collect();
    for k in 0..5 {
        assert!(profile[k] > profile[k + 1], "{profile:?}");
        assert!(profile[11 - k] > profile[10 - k], "{profile:?}");
    }
    let m = run_replications(
        &line,
        &ProtocolSpec::Baseline(Metric::Version),
        &SimConfig::new(1e4),
        &replication_seeds(5, 12),
    )
    .unwrap();
    let corner = m.version(2);
    let center = m.version(7);
    assert!(corner.mean - center.mean > 3.0 * corner.diff_se(&center));
}
