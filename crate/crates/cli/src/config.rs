//! TOML experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use gossip_age::engine::SimConfig;
use gossip_age::mdp::EhParams;
use gossip_age::protocols::{Metric, ProtocolSpec, StompPolicy};
use gossip_age::topology::{JammerPlan, Placement, Rates};
use gossip_age::{Network, TopologyKind};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Named experiment for `sweep`, or `custom`.
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub network: Option<NetworkConfig>,
    pub protocol: Option<ProtocolConfig>,
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub sweep: SweepSettings,
    pub mdp: Option<MdpConfig>,
    pub bayesopt: Option<BayesOptConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Topology kind string, e.g. `ring` or `generalized_ring:f=2`. Ignored
    /// when `file` is set.
    #[serde(default)]
    pub kind: Option<String>,
    pub n: Option<usize>,
    #[serde(default = "one")]
    pub gossip_rate: f64,
    #[serde(default = "one")]
    pub source_rate: f64,
    #[serde(default = "one")]
    pub self_update_rate: f64,
    /// Network in the text format; relative to the config file.
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub jammers: usize,
    /// `equidistant`, `adjacent` or `greedy`.
    pub placement: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Version,
    Aoi,
}

impl From<MetricName> for Metric {
    fn from(m: MetricName) -> Self {
        match m {
            MetricName::Version => Metric::Version,
            MetricName::Aoi => Metric::Aoi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StompName {
    #[default]
    Aggressive,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolConfig {
    Baseline {
        metric: MetricName,
    },
    GGap {
        /// Omit for unlimited tolerance.
        g: Option<u64>,
        unreliable_rate: f64,
    },
    Mutation {
        p_mut: f64,
    },
    Timestomp {
        adversaries: Vec<usize>,
        #[serde(default)]
        policy: StompName,
    },
    Asuman,
    SemiDistributed,
    FullyDistributed {
        duration: Option<f64>,
    },
}

impl ProtocolConfig {
    pub fn spec(&self) -> ProtocolSpec {
        match self {
            ProtocolConfig::Baseline { metric } => ProtocolSpec::Baseline((*metric).into()),
            ProtocolConfig::GGap { g, unreliable_rate } => ProtocolSpec::GGap {
                g: g.unwrap_or(gossip_age::protocols::G_INFINITE),
                unreliable_rate: *unreliable_rate,
            },
            ProtocolConfig::Mutation { p_mut } => ProtocolSpec::Mutation { p_mut: *p_mut },
            ProtocolConfig::Timestomp {
                adversaries,
                policy,
            } => ProtocolSpec::Timestomp {
                adversaries: adversaries.clone(),
                policy: match policy {
                    StompName::Aggressive => StompPolicy::aggressive(),
                    StompName::Identity => StompPolicy::identity(),
                },
            },
            ProtocolConfig::Asuman => ProtocolSpec::Asuman,
            ProtocolConfig::SemiDistributed => ProtocolSpec::SemiDistributed,
            ProtocolConfig::FullyDistributed { duration } => ProtocolSpec::FullyDistributed {
                duration: *duration,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    pub warmup: Option<f64>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_moments")]
    pub moments: usize,
}

fn default_reps() -> usize {
    8
}

fn default_moments() -> usize {
    1
}

impl RunConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            warmup: self.warmup,
            ..SimConfig::new(self.horizon).with_moments(self.moments)
        }
    }
}

/// Overrides for named experiments and axes of the custom sweep.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub n: Option<Vec<usize>>,
    pub g: Option<Vec<u64>>,
    pub lambda: Option<Vec<f64>>,
    pub jammers: Option<Vec<usize>>,
    /// Multiplies every default horizon.
    pub horizon_scale: Option<f64>,
    pub replications: Option<usize>,
    /// Random networks in the exact-vs-simulation experiment.
    pub networks: Option<usize>,
    /// Optimizer evaluations.
    pub steps: Option<usize>,
}

impl SweepSettings {
    pub fn horizon(&self, default: f64) -> f64 {
        default * self.horizon_scale.unwrap_or(1.0)
    }

    pub fn reps(&self, default: usize) -> usize {
        self.replications.unwrap_or(default)
    }

    pub fn n_or(&self, default: &[usize]) -> Vec<usize> {
        self.n.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Short runs for smoke tests and determinism checks.
    pub fn quick() -> Self {
        Self {
            horizon_scale: Some(0.02),
            replications: Some(2),
            networks: Some(2),
            steps: Some(4),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpConfig {
    pub b_max: usize,
    pub delta: f64,
    pub p: f64,
    pub q: Vec<f64>,
    pub x_max: usize,
    pub tol: Option<f64>,
}

impl MdpConfig {
    pub fn params(&self) -> EhParams {
        EhParams {
            b_max: self.b_max,
            delta: self.delta,
            p: self.p,
            q: self.q.clone(),
            x_max: self.x_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesOptConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Total source rate shared by the nodes.
    #[serde(default = "one")]
    pub budget: f64,
    /// Simulation window of one evaluation.
    pub horizon: f64,
    #[serde(default = "default_bo_reps")]
    pub replications: usize,
}

fn default_steps() -> usize {
    50
}

fn default_bo_reps() -> usize {
    8
}

fn parse_placement(s: &str) -> Result<Placement, CliError> {
    match s {
        "equidistant" => Ok(Placement::Equidistant),
        "adjacent" => Ok(Placement::Adjacent),
        "greedy" => Ok(Placement::Greedy),
        other => Err(CliError::Config(format!(
            "unknown jammer placement `{other}`"
        ))),
    }
}

impl NetworkConfig {
    /// Builds the network; `base` resolves a relative `file`.
    pub fn build(&self, base: &Path) -> Result<Network, CliError> {
        let net = if let Some(file) = &self.file {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Network::from_text(&text)?
        } else {
            let kind: TopologyKind = self
                .kind
                .as_deref()
                .ok_or_else(|| CliError::Config("network needs `kind` or `file`".into()))?
                .parse()?;
            let n = self
                .n
                .ok_or_else(|| CliError::Config("network needs `n`".into()))?;
            Network::build(
                kind,
                n,
                Rates::new(self.gossip_rate, self.source_rate, self.self_update_rate),
            )?
        };
        if self.jammers == 0 {
            return Ok(net);
        }
        let placement = parse_placement(self.placement.as_deref().unwrap_or("equidistant"))?;
        Ok(net.apply_jammers(&JammerPlan::new(self.jammers, placement))?)
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn network(&self) -> Result<&NetworkConfig, CliError> {
        self.network
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [network] section".into()))
    }

    pub fn protocol(&self) -> Result<&ProtocolConfig, CliError> {
        self.protocol
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [protocol] section".into()))
    }

    pub fn run(&self) -> Result<&RunConfig, CliError> {
        self.run
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [run] section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_parses() {
        let cfg = Config::from_toml(
            r#"
            experiment = "custom"
            seed = 3
            [network]
            kind = "ring"
            n = 16
            jammers = 2
            placement = "adjacent"
            [protocol]
            kind = "g_gap"
            g = 2
            unreliable_rate = 0.5
            [run]
            horizon = 100.0
            [sweep]
            n = [8, 16]
            "#,
        )
        .unwrap();
        assert_eq!(
            cfg.protocol().unwrap().spec(),
            ProtocolSpec::GGap {
                g: 2,
                unreliable_rate: 0.5
            }
        );
        let net = cfg.network().unwrap().build(Path::new(".")).unwrap();
        assert_eq!(net.jammed_links().len(), 2);
        assert_eq!(cfg.run().unwrap().replications, 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("sede = 3").is_err());
        assert!(Config::from_toml("[run]\nhorizon = 1.0\nhorizn = 2.0").is_err());
        assert!(
            Config::from_toml("[protocol]\nkind = \"mutation\"\np_mut = 0.1\nextra = 1").is_err()
        );
        assert!(Config::from_toml("[protocol]\nkind = \"gossip_storm\"").is_err());
    }

    #[test]
    fn unknown_topology_is_an_error() {
        let cfg = Config::from_toml("[network]\nkind = \"hypercube\"\nn = 8").unwrap();
        assert!(matches!(
            cfg.network().unwrap().build(Path::new(".")),
            Err(CliError::Topology(_))
        ));
    }
}
