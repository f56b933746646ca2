use gossip_age::analytic::{
    exact_subset_ages, fc_bounds, fc_closed_form, ring_closed_form, upper_bound_recursion,
    BoundProfile, SubsetAgeTable, TableMode,
};
use gossip_age::protocols::Metric;
use gossip_age::topology::Rates;
use gossip_age::{Network, TopologyKind};
use proptest::prelude::*;

fn random_network() -> impl Strategy<Value = Network> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::option::weighted(0.7, 0.1f64..2.0), n * n),
            prop::collection::vec(prop::option::weighted(0.6, 0.1f64..2.0), n),
            0.1f64..2.0,
        )
            .prop_filter_map("source must reach every node", move |(g, s, e)| {
                let edges = (0..n * n).filter_map(|k| {
                    let (i, j) = (k / n + 1, k % n + 1);
                    (i != j).then_some(())?;
                    g[k].map(|r| ((i, j), r))
                });
                let src = s.iter().map(|r| r.unwrap_or(0.0)).collect();
                let net = Network::from_rates(n, e, src, edges.collect::<Vec<_>>()).ok()?;
                net.validate().ok.then_some(net)
            })
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn supersets_are_fresher(net in random_network()) {
        let t = exact_subset_ages(&net, Metric::Version, 1, TableMode::Full).unwrap();
        let n = net.n();
        for (s, vs) in t.entries() {
            for k in 0..n {
                let sup = s | 1 << k;
                if sup != s {
                    prop_assert!(t.get(sup, 1).unwrap() <= vs[0] * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn aoi_is_version_with_unit_self_rate(net in random_network()) {
        let aoi = exact_subset_ages(&net, Metric::Aoi, 2, TableMode::Full).unwrap();
        let unit = net.with_self_update_rate(1.0).unwrap();
        let ver = exact_subset_ages(&unit, Metric::Version, 1, TableMode::Full).unwrap();
        for ((ma, va), (mv, vv)) in aoi.entries().zip(ver.entries()) {
            prop_assert_eq!(ma, mv);
            prop_assert!(rel(va[0], vv[0]) < 1e-12);
        }
    }

    #[test]
    fn moments_are_consistent(net in random_network()) {
        for metric in [Metric::Version, Metric::Aoi] {
            let one = exact_subset_ages(&net, metric, 1, TableMode::Full).unwrap();
            let three = exact_subset_ages(&net, metric, 3, TableMode::Lazy).unwrap();
            prop_assert_eq!(one.singletons(1), three.singletons(1));
            for v in three.variances().unwrap() {
                prop_assert!(v >= -1e-12);
            }
        }
    }
}

#[test]
fn symmetric_closed_forms_match_exact() {
    for n in 2..=8 {
        for (lambda, lambda_e) in [(1.0, 1.0), (2.5, 0.7)] {
            let rates = Rates::new(lambda, lambda, lambda_e);
            let fc = Network::build(TopologyKind::FullyConnected, n, rates).unwrap();
            let exact = exact_subset_ages(&fc, Metric::Version, 1, TableMode::Full).unwrap();
            let closed = fc_closed_form(n, lambda, lambda_e).unwrap();
            for s in 1..(1u32 << n) {
                let j = s.count_ones() as usize;
                assert!(
                    rel(exact.get(s, 1).unwrap(), closed[j - 1]) < 1e-9,
                    "fc n={n} mask={s}"
                );
            }
            if n >= 3 {
                let ring = Network::build(TopologyKind::RingBidirectional, n, rates).unwrap();
                let exact = exact_subset_ages(&ring, Metric::Version, 1, TableMode::Full).unwrap();
                let closed = ring_closed_form(n, lambda, lambda_e).unwrap();
                for j in 1..=n {
                    let contiguous = SubsetAgeTable::mask(&(1..=j).collect::<Vec<_>>());
                    assert!(
                        rel(exact.get(contiguous, 1).unwrap(), closed[j - 1]) < 1e-9,
                        "ring n={n} j={j}"
                    );
                }
            }
        }
    }
}

#[test]
fn fc_bounds_hold() {
    for n in (2..200).chain([500, 1000, 5000, 10_000]) {
        let v1 = fc_closed_form(n, 1.0, 1.0).unwrap()[0];
        let (lo, hi) = fc_bounds(n, 1.0, 1.0);
        assert!(
            lo <= v1 * (1.0 + 1e-12) && v1 <= hi * (1.0 + 1e-12),
            "n={n}: {lo} {v1} {hi}"
        );
    }
}

#[test]
fn upper_bounds_dominate_exact() {
    let rates = Rates::new(1.0, 1.0, 1.0);
    for side in 2..=4 {
        let n = side * side;
        let net = Network::build(TopologyKind::Grid, n, rates).unwrap();
        let v = exact_subset_ages(&net, Metric::Version, 1, TableMode::Lazy)
            .unwrap()
            .singletons(1);
        let u1 = upper_bound_recursion(&BoundProfile::grid(n, 1.0, 1.0), 1.0).unwrap()[0];
        assert!(
            v.iter().all(|&x| x <= u1 * (1.0 + 1e-12)),
            "grid n={n}: {v:?} vs {u1}"
        );
    }
    for n in 5..=16 {
        for f in 1..=(n - 1) / 2 {
            let net = Network::build(TopologyKind::GeneralizedRing { f }, n, rates).unwrap();
            let v = exact_subset_ages(&net, Metric::Version, 1, TableMode::Lazy)
                .unwrap()
                .singletons(1);
            let u1 = upper_bound_recursion(&BoundProfile::generalized_ring(n, f, 1.0, 1.0), 1.0)
                .unwrap()[0];
            assert!(
                v[0] <= u1 * (1.0 + 1e-12),
                "gr n={n} f={f}: {} vs {u1}",
                v[0]
            );
        }
    }
}

#[test]
fn toy_network_values() {
    let net = Network::from_rates(
        3,
        1.0,
        vec![1.0, 0.0, 1.0],
        [((1, 2), 1.0), ((2, 1), 1.0), ((2, 3), 1.0), ((3, 2), 1.0)],
    )
    .unwrap();
    let v = exact_subset_ages(&net, Metric::Version, 1, TableMode::Lazy)
        .unwrap()
        .singletons(1);
    assert_eq!(v, vec![0.875, 1.25, 0.875]);
}
