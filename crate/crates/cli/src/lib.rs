//! Experiment harness: configs, named experiments, CSV output and
//! scaling fits on top of `gossip_age`.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;

use std::path::PathBuf;

use gossip_age::analytic::AnalyticError;
use gossip_age::bayesopt::BayesOptError;
use gossip_age::engine::EngineError;
use gossip_age::mdp::MdpError;
use gossip_age::protocols::ProtocolError;
use gossip_age::topology::TopologyError;
use thiserror::Error;

pub use config::Config;
pub use experiments::{run_experiment, Check, Report, EXPERIMENTS};
pub use fit::{fit_exponent, FitError, PowerFit};
pub use output::{rows_csv, Row};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    BayesOpt(#[from] BayesOptError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A declared tolerance was violated.
    pub const TOLERANCE: i32 = 1;
    /// Bad arguments, config or input files.
    pub const USAGE: i32 = 2;
}
