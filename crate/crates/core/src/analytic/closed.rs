use super::AnalyticError;
use crate::engine::InterArrival;
use crate::protocols::Metric;
use crate::stats::harmonic;

fn positive(name: &str, v: f64) -> Result<(), AnalyticError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::BadInput(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check(n: usize, lambda: f64, lambda_e: f64) -> Result<(), AnalyticError> {
    if n == 0 {
        return Err(AnalyticError::BadInput("n must be at least 1".into()));
    }
    positive("λ", lambda)?;
    positive("λ_e", lambda_e)
}

/// Fully connected network with source rate `λ`: per-size ages `v_1..v_n`
/// (index `j-1`).
pub fn fc_closed_form(n: usize, lambda: f64, lambda_e: f64) -> Result<Vec<f64>, AnalyticError> {
    check(n, lambda, lambda_e)?;
    let mut v = vec![0.0; n];
    v[n - 1] = lambda_e / lambda;
    let nf = n as f64;
    for j in (1..n).rev() {
        let jf = j as f64;
        let spread = jf * (nf - jf) * lambda / (nf - 1.0);
        v[j - 1] = (lambda_e + spread * v[j]) / (jf * lambda / nf + spread);
    }
    Ok(v)
}

/// Two-sided bound on the single-node fully connected age.
pub fn fc_bounds(n: usize, lambda: f64, lambda_e: f64) -> (f64, f64) {
    let nf = n as f64;
    let ratio = lambda_e / lambda;
    (
        ratio * ((nf - 1.0) / nf * harmonic(n - 1) + 1.0 / nf),
        ratio * harmonic(n),
    )
}

/// Bidirectional ring with source rate `λ`: ages of contiguous sets of size
/// `j`, index `j-1`.
pub fn ring_closed_form(n: usize, lambda: f64, lambda_e: f64) -> Result<Vec<f64>, AnalyticError> {
    check(n, lambda, lambda_e)?;
    let mut v = vec![0.0; n];
    v[n - 1] = lambda_e / lambda;
    let nf = n as f64;
    for j in (1..n).rev() {
        v[j - 1] = (lambda_e + lambda * v[j]) / (j as f64 * lambda / nf + lambda);
    }
    Ok(v)
}

/// Large-`n` single-node ring age `(λ_e/λ) sqrt(πn/2)`.
pub fn ring_asymptote(n: usize, lambda: f64, lambda_e: f64) -> f64 {
    lambda_e / lambda * (std::f64::consts::PI * n as f64 / 2.0).sqrt()
}

/// Per-size ingredients of the subset-age upper bound.
///
/// Index `j-1` holds the value for sets of size `j`; `incoming_edges` and
/// `edge_rate` have `n-1` entries, `source` has `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundProfile {
    pub n: usize,
    /// Lower bound on the number of directed edges entering a `j`-set.
    pub incoming_edges: Vec<f64>,
    /// Lower bound on the rate of each such edge.
    pub edge_rate: Vec<f64>,
    /// Lower bound on the source rate into a `j`-set.
    pub source: Vec<f64>,
}

fn flat_source(n: usize, lambda_source: f64) -> Vec<f64> {
    (1..=n)
        .map(|j| j as f64 * lambda_source / n as f64)
        .collect()
}

/// Fewest directed edges into a `j`-subset of a `k x k` grid, from the
/// edge-isoperimetric inequality `|∂S| >= min(k, 2 sqrt(|S|))` applied to
/// the smaller side.
pub fn grid_incoming_edges(n: usize, j: usize) -> usize {
    let k = (n as f64).sqrt().round() as usize;
    let small = j.min(n - j) as f64;
    k.min((2.0 * small.sqrt() - 1e-12).ceil() as usize)
}

/// Incoming edges of a `j`-set in the infinite grid, `2⌈2√j⌉`.
pub fn infinite_grid_incoming_edges(j: usize) -> usize {
    2 * (2.0 * (j as f64).sqrt() - 1e-12).ceil() as usize
}

/// Incoming edges of a contiguous `j`-set in a generalized ring with span `f`.
pub fn generalized_ring_incoming_edges(n: usize, f: usize, j: usize) -> usize {
    (1..=f).map(|d| 2 * d.min(j).min(n - j)).sum()
}

impl BoundProfile {
    /// Exact quantities of the fully connected network.
    pub fn fully_connected(n: usize, lambda: f64, lambda_source: f64) -> Self {
        Self {
            n,
            incoming_edges: (1..n).map(|j| (j * (n - j)) as f64).collect(),
            edge_rate: vec![lambda / (n as f64 - 1.0); n.saturating_sub(1)],
            source: flat_source(n, lambda_source),
        }
    }

    /// Contiguous sets of a bidirectional ring.
    pub fn ring(n: usize, lambda: f64, lambda_source: f64) -> Self {
        Self {
            n,
            incoming_edges: vec![2.0; n.saturating_sub(1)],
            edge_rate: vec![lambda / 2.0; n.saturating_sub(1)],
            source: flat_source(n, lambda_source),
        }
    }

    /// Non-wrapping square grid; every edge carries at least `λ/4`.
    pub fn grid(n: usize, lambda: f64, lambda_source: f64) -> Self {
        Self {
            n,
            incoming_edges: (1..n).map(|j| grid_incoming_edges(n, j) as f64).collect(),
            edge_rate: vec![lambda / 4.0; n.saturating_sub(1)],
            source: flat_source(n, lambda_source),
        }
    }

    /// Generalized ring with span `f`, edges of rate `λ/(2f)`.
    pub fn generalized_ring(n: usize, f: usize, lambda: f64, lambda_source: f64) -> Self {
        Self {
            n,
            incoming_edges: (1..n)
                .map(|j| generalized_ring_incoming_edges(n, f, j) as f64)
                .collect(),
            edge_rate: vec![lambda / (2.0 * f as f64); n.saturating_sub(1)],
            source: flat_source(n, lambda_source),
        }
    }
}

/// Backward recursion `u_j = (λ_e + E_j r_j u_{j+1}) / (λ_0,j + E_j r_j)`
/// from `u_n = λ_e / λ_0,n`. Returns `u_1..u_n`.
pub fn upper_bound_recursion(
    profile: &BoundProfile,
    lambda_e: f64,
) -> Result<Vec<f64>, AnalyticError> {
    let n = profile.n;
    if n == 0
        || profile.source.len() != n
        || profile.incoming_edges.len() + 1 != n
        || profile.edge_rate.len() + 1 != n
    {
        return Err(AnalyticError::BadInput(
            "bound profile lengths do not match n".into(),
        ));
    }
    if profile.source[n - 1] <= 0.0 {
        return Err(AnalyticError::ZeroDenominator(n));
    }
    let mut u = vec![0.0; n];
    u[n - 1] = lambda_e / profile.source[n - 1];
    for j in (1..n).rev() {
        let spread = profile.incoming_edges[j - 1] * profile.edge_rate[j - 1];
        let denom = profile.source[j - 1] + spread;
        if denom <= 0.0 {
            return Err(AnalyticError::ZeroDenominator(j));
        }
        u[j - 1] = (lambda_e + spread * u[j]) / denom;
    }
    Ok(u)
}

/// Age-aware gossip schemes with a known large-network value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Per-node age under ASUMAN.
    Asuman,
    /// Average age of the minimum-age set at source self-updates.
    MinAgeSet,
    /// Semi-distributed leader scheme, optimal under the capacity constraint.
    Optimal,
    /// Leader gossips for `1/λ` after each delivery; large-`n` value only.
    FullyDistributed,
}

/// Closed-form age of `scheme` at size `n`, or its `n → ∞` limit when `n`
/// is `None`.
pub fn scheme_limit(
    scheme: Scheme,
    n: Option<usize>,
    lambda: f64,
    lambda_e: f64,
) -> Result<f64, AnalyticError> {
    positive("λ", lambda)?;
    positive("λ_e", lambda_e)?;
    if let Some(n) = n {
        if n < 2 {
            return Err(AnalyticError::BadInput(format!(
                "scheme limits need n >= 2, got {n}"
            )));
        }
    }
    let r = lambda_e / lambda;
    Ok(match (scheme, n) {
        (Scheme::Asuman, Some(n)) => {
            let nf = n as f64;
            r * (1.0 + nf * lambda / (nf - 1.0) * (1.0 / lambda + 1.0 / lambda_e))
                / (1.0 / nf + nf / (nf - 1.0))
        }
        (Scheme::Asuman, None) => 2.0 * r + 1.0,
        (Scheme::MinAgeSet, _) => (lambda_e + lambda) / lambda,
        (Scheme::Optimal, Some(n)) => {
            let nf = n as f64;
            r * (1.0 + nf / (nf - 1.0)) / (1.0 / nf + nf / (nf - 1.0))
        }
        (Scheme::Optimal, None) => 2.0 * r,
        (Scheme::FullyDistributed, _) => (1.0 + std::f64::consts::E) * r,
    })
}

/// Additive limit for a renewal line: `Σ E[Y²]/(2E[Y])` over the hops, and
/// for version age divided by the mean source inter-update time.
pub fn renewal_line_limit(
    hops: &[InterArrival],
    metric: Metric,
    source: Option<&InterArrival>,
) -> Result<f64, AnalyticError> {
    let mut sum = 0.0;
    for h in hops {
        sum += h
            .mean_residual()
            .ok_or_else(|| AnalyticError::Moment(format!("{h:?}")))?;
    }
    match metric {
        Metric::Aoi => Ok(sum),
        Metric::Version => {
            let s = source.ok_or(AnalyticError::MissingSource)?;
            let m = s
                .mean()
                .ok_or_else(|| AnalyticError::Moment(format!("{s:?}")))?;
            Ok(sum / m)
        }
    }
}
