//! Exact and closed-form ages.
//!
//! The subset recursion gives exact stationary moments for any network up
//! to twenty nodes. Symmetric topologies collapse it to one value per subset
//! size, which is what the closed forms and upper-bound recursions solve.

mod closed;
mod subset;

use thiserror::Error;

use crate::topology::NodeId;

pub use closed::{
    fc_bounds, fc_closed_form, generalized_ring_incoming_edges, grid_incoming_edges,
    infinite_grid_incoming_edges, renewal_line_limit, ring_asymptote, ring_closed_form,
    scheme_limit, upper_bound_recursion, BoundProfile, Scheme,
};
pub use subset::{exact_subset_ages, SubsetAgeTable, TableMode, MAX_EXACT_NODES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("exact table limited to {max} nodes, got {0}", max = MAX_EXACT_NODES)]
    TooLarge(usize),
    #[error("nodes {0:?} are unreachable from the source; their ages diverge")]
    Unreachable(Vec<NodeId>),
    #[error("bound recursion has a zero denominator at size {0}")]
    ZeroDenominator(usize),
    #[error("distribution {0} lacks a finite second moment")]
    Moment(String),
    #[error("version age needs the source update distribution")]
    MissingSource,
    #[error("{0}")]
    BadInput(String),
}
