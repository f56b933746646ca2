//! Subcommand bodies, kept out of `main` so they can be tested.

use std::path::{Path, PathBuf};

use gossip_age::analytic::{
    exact_subset_ages, fc_closed_form, ring_closed_form, TableMode, MAX_EXACT_NODES,
};
use gossip_age::bayesopt::{optimize, OptimizeOptions};
use gossip_age::engine::run_replications;
use gossip_age::mdp::{policy_csv, solve, verify_threshold, EhMdp, SolveOptions};
use gossip_age::protocols::{Metric, ProtocolSpec};
use gossip_age::rng::{derive, replication_seeds};
use gossip_age::TopologyKind;

use crate::config::{Config, NetworkConfig, ProtocolConfig};
use crate::experiments::{run_experiment, Report};
use crate::fit::{fit_exponent, PowerFit};
use crate::output::Row;
use crate::CliError;

/// Directory that relative paths in a config resolve against.
pub fn config_base(config: Option<&Path>) -> PathBuf {
    config
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn metric_of(cfg: &Config) -> Metric {
    match &cfg.protocol {
        Some(ProtocolConfig::Baseline { metric }) => (*metric).into(),
        _ => Metric::Version,
    }
}

/// Exact per-node moments; the full subset table goes to the `subsets` file.
pub fn exact(cfg: &Config, base: &Path) -> Result<Report, CliError> {
    let net = cfg.network()?.build(base)?;
    let moments = cfg.run.as_ref().map_or(1, |r| r.moments);
    let metric = metric_of(cfg);
    let table = exact_subset_ages(&net, metric, moments, TableMode::Full)?;
    let mut report = Report {
        name: "exact".into(),
        rows: Vec::new(),
        checks: Vec::new(),
        files: Vec::new(),
    };
    let proto = ProtocolSpec::Baseline(metric);
    for m in 1..=moments {
        for (k, v) in table.singletons(m).into_iter().enumerate() {
            report.rows.push(
                Row::new(
                    net.n(),
                    proto.name(),
                    format!("moment={m}"),
                    (k + 1).to_string(),
                )
                .value(v),
            );
        }
    }
    report.files.push(("subsets".into(), table.to_csv()));
    Ok(report)
}

/// Replicated simulation: one row per node and one for the network average.
pub fn simulate(cfg: &Config, base: &Path, seed: u64) -> Result<Report, CliError> {
    let net = cfg.network()?.build(base)?;
    let proto = cfg.protocol()?.spec();
    let run = cfg.run()?;
    let m = run_replications(
        &net,
        &proto,
        &run.sim(),
        &replication_seeds(derive(seed, &[0]), run.replications),
    )?;
    let metric = proto.metric();
    let exact = match proto {
        ProtocolSpec::Baseline(_) if net.n() <= MAX_EXACT_NODES && net.validate().ok => {
            Some(exact_subset_ages(&net, metric, 1, TableMode::Lazy)?.singletons(1))
        }
        _ => None,
    };
    let mut report = Report {
        name: "simulate".into(),
        rows: Vec::new(),
        checks: Vec::new(),
        files: Vec::new(),
    };
    for i in net.nodes() {
        let est = match metric {
            Metric::Version => m.version(i),
            Metric::Aoi => m.aoi(i),
        };
        let mut row = Row::new(net.n(), proto.name(), "", i.to_string()).estimate(est);
        if let Some(v) = &exact {
            row = row.analytic(v[i - 1], "exact");
        }
        report.rows.push(row);
    }
    let avg = match metric {
        Metric::Version => m.version_average(),
        Metric::Aoi => m.aoi_average(),
    };
    report
        .rows
        .push(Row::new(net.n(), proto.name(), "", "avg").estimate(avg));
    if !m.diverged().is_empty() {
        log::warn!("nodes {:?} never received an update", m.diverged());
    }
    Ok(report)
}

/// Closed form for the symmetric baselines when the rates fit its model.
fn symmetric_closed_form(
    net_cfg: &NetworkConfig,
    kind: &TopologyKind,
    n: usize,
) -> Result<Option<(f64, &'static str)>, CliError> {
    if net_cfg.jammers > 0 || net_cfg.gossip_rate != net_cfg.source_rate {
        return Ok(None);
    }
    let (l, e) = (net_cfg.gossip_rate, net_cfg.self_update_rate);
    Ok(match kind {
        TopologyKind::FullyConnected => Some((fc_closed_form(n, l, e)?[0], "fc_closed_form")),
        TopologyKind::RingBidirectional if n >= 3 => {
            Some((ring_closed_form(n, l, e)?[0], "ring_closed_form"))
        }
        _ => None,
    })
}

/// Named experiment, or the `custom` size sweep over `[sweep] n`.
pub fn sweep(cfg: &Config, base: &Path, name: Option<&str>, seed: u64) -> Result<Report, CliError> {
    let name = name.or(cfg.experiment.as_deref()).ok_or_else(|| {
        CliError::Config("no experiment named in the config or on the command line".into())
    })?;
    if name != "custom" {
        return run_experiment(name, seed, &cfg.sweep);
    }
    let net_cfg = cfg.network()?;
    let kind: TopologyKind = net_cfg
        .kind
        .as_deref()
        .ok_or_else(|| CliError::Config("custom sweep needs [network] kind".into()))?
        .parse()?;
    let ns = cfg
        .sweep
        .n
        .clone()
        .ok_or_else(|| CliError::Config("custom sweep needs [sweep] n".into()))?;
    let proto = cfg.protocol()?.spec();
    let run = cfg.run()?;
    let mut report = Report {
        name: "custom".into(),
        rows: Vec::new(),
        checks: Vec::new(),
        files: Vec::new(),
    };
    for (k, n) in ns.into_iter().enumerate() {
        let net = NetworkConfig {
            n: Some(n),
            file: None,
            ..net_cfg.clone()
        }
        .build(base)?;
        let seeds = replication_seeds(derive(seed, &[k as u64]), run.replications);
        let m = run_replications(&net, &proto, &run.sim(), &seeds)?;
        let est = match proto.metric() {
            Metric::Version => m.version_average(),
            Metric::Aoi => m.aoi_average(),
        };
        let mut row = Row::new(n, proto.name(), kind.to_string(), "avg").estimate(est);
        if matches!(proto, ProtocolSpec::Baseline(Metric::Version)) {
            if let Some((v, label)) = symmetric_closed_form(net_cfg, &kind, n)? {
                row = row.analytic(v, label);
            }
        }
        report.rows.push(row);
    }
    Ok(report)
}

/// Solves the `[mdp]` instance; fails the threshold check if the optimal
/// action map is not a threshold policy.
pub fn mdp(cfg: &Config) -> Result<Report, CliError> {
    let mc = cfg
        .mdp
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [mdp] section".into()))?;
    let model = EhMdp::build(mc.params())?;
    let opts = SolveOptions {
        tol: mc.tol.unwrap_or(SolveOptions::default().tol),
        ..SolveOptions::default()
    };
    let pol = solve(&model, opts)?;
    let rep = verify_threshold(&model, &pol.actions);
    let mut report = Report {
        name: "mdp".into(),
        rows: Vec::new(),
        checks: Vec::new(),
        files: Vec::new(),
    };
    report.rows.push(
        Row::new(
            model.n(),
            "mdp",
            format!("iterations={}", pol.iterations),
            "gain",
        )
        .value(pol.gain),
    );
    report.checks.push(crate::Check {
        label: "threshold policy".into(),
        passed: rep.holds(),
        detail: format!(
            "thresholds per battery level {:?}, {} violating states",
            rep.thresholds,
            rep.violations.len()
        ),
    });
    report
        .files
        .push(("policy".into(), policy_csv(&model, &pol.actions)));
    Ok(report)
}

/// GP-UCB allocation of the source rate over the `[network]` nodes.
pub fn bayesopt(cfg: &Config, base: &Path, seed: u64) -> Result<Report, CliError> {
    let bc = cfg
        .bayesopt
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [bayesopt] section".into()))?;
    let net = cfg.network()?.build(base)?;
    let n = net.n();
    let sim = gossip_age::engine::SimConfig::new(bc.horizon);
    let proto = ProtocolSpec::Baseline(Metric::Version);
    let mut step = 0u64;
    let res = optimize(
        n,
        OptimizeOptions::new(bc.steps, bc.budget, derive(seed, &[0])),
        |x| -> Result<f64, CliError> {
            step += 1;
            let candidate = net.with_source_rates(x.to_vec())?;
            let seeds = replication_seeds(derive(seed, &[1, step]), bc.replications);
            let m = run_replications(&candidate, &proto, &sim, &seeds)?;
            Ok(
                m.estimate(|r| (1..=n).map(|i| r.version(i)).fold(0.0, f64::max))
                    .mean,
            )
        },
    )?;
    let mut report = Report {
        name: "bayesopt".into(),
        rows: Vec::new(),
        checks: Vec::new(),
        files: Vec::new(),
    };
    for (i, v) in res.best.iter().enumerate() {
        report
            .rows
            .push(Row::new(n, "gp_ucb", "best_rate", (i + 1).to_string()).value(*v));
    }
    report
        .rows
        .push(Row::new(n, "gp_ucb", "best_rate", "worst_age").value(res.best_value));
    report.files.push(("trace".into(), res.trace_csv()));
    Ok(report)
}

/// Reads columns `x` and `y` of a headed CSV and fits a power law.
pub fn fit_csv(text: &str, x: &str, y: &str) -> Result<PowerFit, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Config("empty CSV".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("no column `{name}`")))
    };
    let (xi, yi) = (col(x)?, col(y)?);
    let mut points = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64, CliError> {
            cells
                .get(i)
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| {
                    CliError::Config(format!("row {}: bad value in column {}", k + 2, header[i]))
                })
        };
        points.push((get(xi)?, get(yi)?));
    }
    Ok(fit_exponent(&points)?)
}
