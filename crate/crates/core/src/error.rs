use thiserror::Error;

use crate::{
    analytic::AnalyticError, bayesopt::BayesOptError, engine::EngineError, mdp::MdpError,
    protocols::ProtocolError, topology::TopologyError,
};

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
