use super::*;
use crate::rng::replication_seeds;
use crate::topology::{Rates, TopologyKind};

fn single(lambda_e: f64, lambda_01: f64) -> Network {
    Network::from_rates(1, lambda_e, vec![lambda_01], []).unwrap()
}

fn two_line() -> Network {
    Network::from_rates(2, 1.0, vec![1.0, 0.0], [((1, 2), 2.0)]).unwrap()
}

const VERSION: ProtocolSpec = ProtocolSpec::Baseline(Metric::Version);

#[test]
fn single_node_version_age() {
    let m = run_replications(
        &single(1.0, 1.0),
        &VERSION,
        &SimConfig::new(1e5),
        &replication_seeds(1, 8),
    )
    .unwrap();
    let v = m.version(1);
    assert!(v.within(1.0, 3.0), "{v:?}");
}

#[test]
fn two_node_line_version_age() {
    let m = run_replications(
        &two_line(),
        &VERSION,
        &SimConfig::new(2e4),
        &replication_seeds(2, 8),
    )
    .unwrap();
    assert!(m.version(1).within(1.0, 3.0));
    assert!(m.version(2).within(1.5, 3.0), "{:?}", m.version(2));
}

#[test]
fn same_seed_is_bit_identical() {
    let net = Network::build(TopologyKind::FullyConnected, 6, Rates::unit()).unwrap();
    let cfg = SimConfig {
        trace: true,
        clock_counts: true,
        ..SimConfig::new(200.0).with_moments(3)
    };
    let a = run(&net, &VERSION, &cfg, 99).unwrap();
    let b = run(&net, &VERSION, &cfg, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, run(&net, &VERSION, &cfg, 100).unwrap());
}

#[test]
fn replication_guards() {
    let net = single(1.0, 1.0);
    let cfg = SimConfig::new(10.0);
    assert_eq!(
        run_replications(&net, &VERSION, &cfg, &[3, 3, 4]).unwrap_err(),
        EngineError::DuplicateSeed(3)
    );
    assert_eq!(
        run_replications(&net, &VERSION, &cfg, &[3]).unwrap_err(),
        EngineError::TooFewReplications(1)
    );
    assert!(matches!(
        run(&net, &VERSION, &SimConfig::new(10.0).with_warmup(10.0), 1),
        Err(EngineError::Horizon { .. })
    ));
    assert!(matches!(
        run(&net, &VERSION, &SimConfig::new(10.0).with_moments(5), 1),
        Err(EngineError::MomentOrder(5))
    ));
}

#[test]
fn frozen_source_keeps_zero_age() {
    let net = Network::build(
        TopologyKind::RingBidirectional,
        5,
        Rates::new(1.0, 1.0, 0.0),
    )
    .unwrap();
    let m = run_replications(
        &net,
        &VERSION,
        &SimConfig::new(100.0),
        &replication_seeds(3, 4),
    )
    .unwrap();
    for i in net.nodes() {
        assert_eq!(m.version(i).mean, 0.0);
        assert_eq!(m.version(i).se, 0.0);
    }
}

#[test]
fn exponential_clock_counts() {
    let net = Network::build(
        TopologyKind::RingBidirectional,
        4,
        Rates::new(2.0, 1.0, 1.0),
    )
    .unwrap();
    let cfg = SimConfig {
        clock_counts: true,
        ..SimConfig::new(5_000.0)
    };
    let r = run(&net, &VERSION, &cfg, 5).unwrap();
    for (kind, count) in r.clock_counts.unwrap() {
        let rate = match kind {
            ClockKind::SelfUpdate => net.self_update_rate(),
            ClockKind::Source(i) => net.source_rate(i),
            ClockKind::Gossip(i, j) => net.gossip_rate(i, j),
            other => panic!("unexpected clock {other:?}"),
        };
        let expect = rate * cfg.horizon;
        assert!(
            (count as f64 - expect).abs() <= 4.0 * expect.sqrt(),
            "{kind:?}: {count} vs {expect}"
        );
    }
}

#[test]
fn unreachable_nodes_are_flagged() {
    let net = Network::from_rates(2, 1.0, vec![1.0, 0.0], [((1, 2), 0.0)]).unwrap();
    let r = run(&net, &VERSION, &SimConfig::new(100.0), 1).unwrap();
    assert_eq!(r.diverged, vec![2]);
    assert!(r.version(2) > 40.0);
}

#[test]
fn trace_rows_render() {
    let cfg = SimConfig {
        trace: true,
        ..SimConfig::new(5.0)
    };
    let r = run(&two_line(), &VERSION, &cfg, 8).unwrap();
    let rows = r.trace.unwrap();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0].time <= w[1].time));
    let csv = trace_csv(&rows);
    assert!(csv.starts_with("time,kind,i,j,X_j_before,X_j_after\n"));
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

#[test]
fn renewal_line_rejects_heavy_tails() {
    let cfg = SimConfig::new(100.0);
    let heavy = InterArrival::Pareto {
        scale: 1.0,
        shape: 1.5,
    };
    assert!(matches!(
        run_renewal_line(&[heavy], None, Metric::Aoi, &cfg, 1),
        Err(EngineError::InfiniteMoment(_))
    ));
    assert_eq!(
        run_renewal_line(&[], None, Metric::Aoi, &cfg, 1).unwrap_err(),
        EngineError::EmptyLine
    );
    assert_eq!(
        run_renewal_line(
            &[InterArrival::exponential(1.0)],
            None,
            Metric::Version,
            &cfg,
            1
        )
        .unwrap_err(),
        EngineError::MissingSourceClock
    );
}

#[test]
fn renewal_deterministic_hop() {
    let cfg = SimConfig::new(1e4);
    let r = run_renewal_line(
        &[InterArrival::Deterministic { period: 2.0 }],
        None,
        Metric::Aoi,
        &cfg,
        4,
    )
    .unwrap();
    assert!((r.aoi(1) - 1.0).abs() < 1e-3, "{}", r.aoi(1));
}
