use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gossip_age::engine::{run, SimConfig};
use gossip_age::protocols::{Metric, ProtocolSpec};
use gossip_age::topology::Rates;
use gossip_age::{Network, TopologyKind};

fn baseline(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_baseline");
    g.sample_size(10);
    let proto = ProtocolSpec::Baseline(Metric::Version);
    let cfg = SimConfig::new(200.0);
    for (label, kind) in [
        ("fc", TopologyKind::FullyConnected),
        ("ring", TopologyKind::RingBidirectional),
        ("grid", TopologyKind::Grid),
    ] {
        let net = Network::build(kind, 256, Rates::unit()).unwrap();
        g.bench_with_input(BenchmarkId::new(label, 256), &net, |b, net| {
            b.iter(|| run(net, &proto, &cfg, 7).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, baseline);
criterion_main!(benches);
