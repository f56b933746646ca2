//! Average-cost MDP for a caching aggregator fed by an energy-harvesting
//! sensor.
//!
//! Slot order: the source updates with probability `p` (every age, including
//! the aggregator's, grows by one and saturates at `x_max`); the battery
//! harvests one unit with probability `delta`; then node `i` requests with
//! probability `q_i`. On a request the aggregator either serves its cached
//! copy (`X_i <- X_C`) or, with action 1 and a non-empty battery at the start
//! of the slot, samples the sensor (`X_C = X_i = 0`, one unit spent).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: String, value: f64 },
    #[error("request probabilities sum to {0} > 1")]
    RequestSum(f64),
    #[error("{0}")]
    Size(String),
    #[error("no convergence after {iterations} iterations (span {span:e})")]
    NoConvergence { iterations: usize, span: f64 },
    #[error("dense evaluation limited to {limit} states, got {states}")]
    TooLarge { states: usize, limit: usize },
    #[error("policy evaluation system is singular")]
    Singular,
    #[error("policy has {got} actions for {expected} states")]
    PolicyLength { got: usize, expected: usize },
}

/// Model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EhParams {
    pub b_max: usize,
    /// Harvest probability per slot.
    pub delta: f64,
    /// Source update probability per slot.
    pub p: f64,
    /// Request probability of each node.
    pub q: Vec<f64>,
    /// Age truncation.
    pub x_max: usize,
}

/// Decoded state `(b, X_1..X_n, X_C)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EhState {
    pub b: usize,
    pub x: Vec<usize>,
    pub xc: usize,
}

/// Explicit transition kernel. `kernel[s][a]` lists `(next, probability)`.
#[derive(Debug, Clone)]
pub struct EhMdp {
    params: EhParams,
    kernel: Vec<[Vec<(usize, f64)>; 2]>,
    cost: Vec<f64>,
}

/// Dense evaluation is refused above this many states.
pub const DENSE_LIMIT: usize = 4096;

impl EhMdp {
    pub fn build(params: EhParams) -> Result<Self, MdpError> {
        let n = params.q.len();
        if n == 0 {
            return Err(MdpError::Size("need at least one node".into()));
        }
        if params.x_max == 0 {
            return Err(MdpError::Size("x_max must be at least 1".into()));
        }
        let mut probs = vec![
            ("delta".to_string(), params.delta),
            ("p".to_string(), params.p),
        ];
        probs.extend(
            params
                .q
                .iter()
                .enumerate()
                .map(|(i, &q)| (format!("q_{}", i + 1), q)),
        );
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(MdpError::Probability { name, value });
            }
        }
        let total: f64 = params.q.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(MdpError::RequestSum(total));
        }
        let states = (params.b_max + 1)
            .checked_mul(
                (params.x_max + 1)
                    .checked_pow(n as u32 + 1)
                    .unwrap_or(usize::MAX),
            )
            .filter(|&s| s <= 50_000_000)
            .ok_or_else(|| MdpError::Size("state space too large".into()))?;

        let mut mdp = EhMdp {
            params,
            kernel: Vec::with_capacity(states),
            cost: Vec::with_capacity(states),
        };
        let idle = (1.0 - total).max(0.0);
        for s in 0..states {
            let st = mdp.decode(s);
            mdp.cost.push(st.x.iter().sum::<usize>() as f64 / n as f64);
            let rows = [0u8, 1].map(|a| {
                let mut row: Vec<(usize, f64)> = Vec::new();
                let cap = mdp.params.x_max;
                for (updated, pu) in [(true, mdp.params.p), (false, 1.0 - mdp.params.p)] {
                    if pu == 0.0 {
                        continue;
                    }
                    let bump = |x: usize| if updated { (x + 1).min(cap) } else { x };
                    let x1: Vec<usize> = st.x.iter().map(|&x| bump(x)).collect();
                    let xc1 = bump(st.xc);
                    for (harvest, ph) in [(true, mdp.params.delta), (false, 1.0 - mdp.params.delta)]
                    {
                        if ph == 0.0 {
                            continue;
                        }
                        let b1 = if harvest {
                            (st.b + 1).min(mdp.params.b_max)
                        } else {
                            st.b
                        };
                        if idle > 0.0 {
                            row.push((mdp.encode(b1, &x1, xc1), pu * ph * idle));
                        }
                        for (i, &qi) in mdp.params.q.iter().enumerate() {
                            if qi == 0.0 {
                                continue;
                            }
                            let mut x2 = x1.clone();
                            let (b2, xc2) = if a == 1 && st.b > 0 {
                                x2[i] = 0;
                                (b1 - 1, 0)
                            } else {
                                x2[i] = xc1;
                                (b1, xc1)
                            };
                            row.push((mdp.encode(b2, &x2, xc2), pu * ph * qi));
                        }
                    }
                }
                row.sort_unstable_by_key(|&(t, _)| t);
                row.dedup_by(|next, prev| {
                    if next.0 == prev.0 {
                        prev.1 += next.1;
                        true
                    } else {
                        false
                    }
                });
                row
            });
            mdp.kernel.push(rows);
        }
        Ok(mdp)
    }

    pub fn params(&self) -> &EhParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.q.len()
    }

    pub fn state_count(&self) -> usize {
        self.cost.len()
    }

    pub fn encode(&self, b: usize, x: &[usize], xc: usize) -> usize {
        let base = self.params.x_max + 1;
        let mut s = b;
        for &xi in x {
            s = s * base + xi;
        }
        s * base + xc
    }

    pub fn decode(&self, mut s: usize) -> EhState {
        let base = self.params.x_max + 1;
        let n = self.n();
        let xc = s % base;
        s /= base;
        let mut x = vec![0; n];
        for k in (0..n).rev() {
            x[k] = s % base;
            s /= base;
        }
        EhState { b: s, x, xc }
    }

    /// One-step cost, the mean node age.
    pub fn cost(&self, s: usize) -> f64 {
        self.cost[s]
    }

    pub fn transitions(&self, s: usize, a: u8) -> &[(usize, f64)] {
        &self.kernel[s][a as usize]
    }

    fn q_value(&self, s: usize, a: u8, h: &[f64]) -> f64 {
        self.cost[s]
            + self.kernel[s][a as usize]
                .iter()
                .map(|&(t, p)| p * h[t])
                .sum::<f64>()
    }
}

/// Stationary deterministic policy with its gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actions: Vec<u8>,
    pub gain: f64,
    pub bias: Vec<f64>,
    pub iterations: usize,
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once `span(w_{k+1} - w_k) < tol`.
    pub tol: f64,
    pub max_iters: usize,
    /// Self-loop weight of the aperiodicity transform, in `(0, 1)`.
    pub tau: f64,
    /// Action 1 is chosen only if it beats action 0 by more than this.
    pub tie_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 200_000,
            tau: 0.5,
            tie_tol: 1e-9,
        }
    }
}

/// Relative value iteration on the aperiodicity-transformed chain
/// `τI + (1-τ)P`, which has the same gain and optimal policies. Sweeps are
/// synchronous, so the parallel result equals the sequential one.
pub fn solve(mdp: &EhMdp, opts: SolveOptions) -> Result<Policy, MdpError> {
    let states = mdp.state_count();
    let tau = opts.tau;
    let mut w = vec![0.0; states];
    let mut iterations = 0;
    let mut span = f64::INFINITY;
    let mut gain = 0.0;
    while iterations < opts.max_iters {
        iterations += 1;
        let next: Vec<f64> = (0..states)
            .into_par_iter()
            .map(|s| {
                let best = mdp.q_value(s, 0, &w).min(mdp.q_value(s, 1, &w));
                // transformed: c + τ w(s) + (1-τ)(Pw)(s) = τ w(s) + (1-τ)(Q - c) + c
                tau * w[s] + (1.0 - tau) * (best - mdp.cost[s]) + mdp.cost[s]
            })
            .collect();
        let (lo, hi) = next
            .iter()
            .zip(&w)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        span = hi - lo;
        gain = 0.5 * (lo + hi);
        let anchor = next[0];
        w = next.into_iter().map(|v| v - anchor).collect();
        if span < opts.tol {
            break;
        }
    }
    if span >= opts.tol {
        return Err(MdpError::NoConvergence { iterations, span });
    }
    // bias of the original chain
    let bias: Vec<f64> = w.iter().map(|v| v * (1.0 - tau)).collect();
    let actions = (0..states)
        .map(|s| {
            let (q0, q1) = (mdp.q_value(s, 0, &bias), mdp.q_value(s, 1, &bias));
            u8::from(q1 < q0 - opts.tie_tol * q0.abs().max(1.0))
        })
        .collect();
    Ok(Policy {
        actions,
        gain,
        bias,
        iterations,
    })
}

/// Gain of a fixed policy by a dense solve of `g + h = c + P h`, `h(0) = 0`.
pub fn evaluate(mdp: &EhMdp, actions: &[u8]) -> Result<f64, MdpError> {
    let states = mdp.state_count();
    if actions.len() != states {
        return Err(MdpError::PolicyLength {
            got: actions.len(),
            expected: states,
        });
    }
    if states > DENSE_LIMIT {
        return Err(MdpError::TooLarge {
            states,
            limit: DENSE_LIMIT,
        });
    }
    // unknowns: column 0 carries g (h(0) is pinned to zero)
    let mut a = DMatrix::<f64>::identity(states, states);
    let mut c = DVector::<f64>::zeros(states);
    for s in 0..states {
        for &(t, p) in mdp.transitions(s, actions[s]) {
            a[(s, t)] -= p;
        }
        a[(s, 0)] = 1.0;
        c[s] = mdp.cost(s);
    }
    let x = a.lu().solve(&c).ok_or(MdpError::Singular)?;
    Ok(x[0])
}

/// Structure of a policy's action map.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// Action depends only on `(b, X_C)`.
    pub independent_of_node_ages: bool,
    /// For each battery level the action switches at most once, from 0 to 1,
    /// as `X_C` grows.
    pub threshold_in_xc: bool,
    /// Smallest `X_C` that triggers a fetch for each `b`; `None` if never.
    /// The empty-battery slice is irrelevant and always `None`.
    pub thresholds: Vec<Option<usize>>,
    /// States whose action breaks either property.
    pub violations: Vec<EhState>,
}

impl ThresholdReport {
    pub fn holds(&self) -> bool {
        self.independent_of_node_ages && self.threshold_in_xc
    }
}

pub fn verify_threshold(mdp: &EhMdp, actions: &[u8]) -> ThresholdReport {
    let (b_max, x_max) = (mdp.params.b_max, mdp.params.x_max);
    let mut independent = true;
    let mut threshold = true;
    let mut violations = Vec::new();
    let mut thresholds = vec![None; b_max + 1];
    // reference action per (b, xc) taken at X = 0
    let zeros = vec![0; mdp.n()];
    for b in 1..=b_max {
        let reference: Vec<u8> = (0..=x_max)
            .map(|xc| actions[mdp.encode(b, &zeros, xc)])
            .collect();
        for s in 0..actions.len() {
            let st = mdp.decode(s);
            if st.b == b && actions[s] != reference[st.xc] {
                independent = false;
                violations.push(st);
            }
        }
        let first = reference.iter().position(|&a| a == 1);
        if let Some(k) = first {
            if let Some(bad) = reference[k..].iter().position(|&a| a == 0) {
                threshold = false;
                violations.push(EhState {
                    b,
                    x: zeros.clone(),
                    xc: k + bad,
                });
            }
        }
        thresholds[b] = first;
    }
    ThresholdReport {
        independent_of_node_ages: independent,
        threshold_in_xc: threshold,
        thresholds,
        violations,
    }
}

/// Rows `b,XC,X1..Xn,action` in state-index order.
pub fn policy_csv(mdp: &EhMdp, actions: &[u8]) -> String {
    let mut out = String::from("b,XC");
    for i in 1..=mdp.n() {
        let _ = write!(out, ",X{i}");
    }
    out.push_str(",action\n");
    for (s, &a) in actions.iter().enumerate() {
        let st = mdp.decode(s);
        let _ = write!(out, "{},{}", st.b, st.xc);
        for x in st.x {
            let _ = write!(out, ",{x}");
        }
        let _ = writeln!(out, ",{a}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn tiny(x_max: usize) -> EhMdp {
        EhMdp::build(EhParams {
            b_max: 1,
            delta: 1.0,
            p: 0.5,
            q: vec![1.0],
            x_max,
        })
        .unwrap()
    }

    #[test]
    fn kernel_rows_are_stochastic() {
        let mdp = EhMdp::build(EhParams {
            b_max: 2,
            delta: 0.3,
            p: 0.4,
            q: vec![0.2, 0.5],
            x_max: 4,
        })
        .unwrap();
        assert_eq!(mdp.state_count(), 3 * 5usize.pow(3));
        for s in 0..mdp.state_count() {
            for a in [0, 1] {
                let row = mdp.transitions(s, a);
                assert!(row.iter().all(|&(_, p)| p >= 0.0));
                let total: f64 = row.iter().map(|&(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
            assert!(mdp.cost(s) <= 4.0);
        }
    }

    #[test]
    fn encode_round_trip() {
        let mdp = EhMdp::build(EhParams {
            b_max: 2,
            delta: 0.3,
            p: 0.4,
            q: vec![0.2, 0.5],
            x_max: 4,
        })
        .unwrap();
        for s in 0..mdp.state_count() {
            let st = mdp.decode(s);
            assert_eq!(mdp.encode(st.b, &st.x, st.xc), s);
        }
    }

    #[test]
    fn empty_battery_makes_actions_equal() {
        let mdp = EhMdp::build(EhParams {
            b_max: 0,
            delta: 0.5,
            p: 0.5,
            q: vec![0.5, 0.3],
            x_max: 3,
        })
        .unwrap();
        for s in 0..mdp.state_count() {
            assert_eq!(mdp.transitions(s, 0), mdp.transitions(s, 1));
        }
    }

    #[test]
    fn frozen_source_has_zero_gain() {
        let mdp = EhMdp::build(EhParams {
            b_max: 1,
            delta: 0.5,
            p: 0.0,
            q: vec![0.5, 0.3],
            x_max: 3,
        })
        .unwrap();
        let pol = solve(&mdp, SolveOptions::default()).unwrap();
        assert!(pol.gain.abs() < 1e-9, "{}", pol.gain);
    }

    #[test]
    fn tiny_instance_is_threshold_and_evaluates() {
        let mdp = tiny(6);
        let pol = solve(&mdp, SolveOptions::default()).unwrap();
        assert!(pol.gain >= 0.0 && pol.gain <= 6.0);
        assert_relative_eq!(
            evaluate(&mdp, &pol.actions).unwrap(),
            pol.gain,
            epsilon = 1e-8
        );
        assert!(verify_threshold(&mdp, &pol.actions).holds());
    }

    #[test]
    fn non_threshold_policy_is_reported() {
        let mdp = tiny(4);
        let mut actions = vec![0u8; mdp.state_count()];
        // b=1: fetch at XC=1 only, and only when X_1 = 2
        actions[mdp.encode(1, &[2], 1)] = 1;
        let report = verify_threshold(&mdp, &actions);
        assert!(!report.independent_of_node_ages);
        assert!(!report.violations.is_empty());
        actions = vec![0u8; mdp.state_count()];
        for x in 0..=4 {
            actions[mdp.encode(1, &[x], 1)] = 1;
        }
        let report = verify_threshold(&mdp, &actions);
        assert!(report.independent_of_node_ages);
        assert!(!report.threshold_in_xc);
    }

    #[test]
    fn build_errors() {
        let bad = |q: Vec<f64>, p: f64| {
            EhMdp::build(EhParams {
                b_max: 1,
                delta: 0.5,
                p,
                q,
                x_max: 3,
            })
        };
        assert!(matches!(
            bad(vec![0.7, 0.6], 0.5),
            Err(MdpError::RequestSum(_))
        ));
        assert!(matches!(
            bad(vec![0.5], 1.5),
            Err(MdpError::Probability { .. })
        ));
        assert!(matches!(bad(vec![], 0.5), Err(MdpError::Size(_))));
    }

    #[test]
    fn csv_header() {
        let mdp = EhMdp::build(EhParams {
            b_max: 1,
            delta: 0.5,
            p: 0.5,
            q: vec![0.5, 0.3],
            x_max: 2,
        })
        .unwrap();
        let csv = policy_csv(&mdp, &vec![0; mdp.state_count()]);
        assert!(csv.starts_with("b,XC,X1,X2,action\n0,0,0,0,0\n"));
        assert_eq!(csv.lines().count(), mdp.state_count() + 1);
    }

    #[test]
    fn tiny_instance_matches_policy_enumeration() {
        let mdp = tiny(6);
        let pol = solve(&mdp, SolveOptions::default()).unwrap();
        // every map from (b, X_C) to an action; b = 0 has no effect
        let mut best = f64::INFINITY;
        for code in 0u32..1 << 7 {
            let actions: Vec<u8> = (0..mdp.state_count())
                .map(|s| {
                    let st = mdp.decode(s);
                    (st.b == 1 && code >> st.xc & 1 == 1) as u8
                })
                .collect();
            // long-run cost from the all-zero state by iterating the lazy chain
            let mut d = vec![0.0; mdp.state_count()];
            d[0] = 1.0;
            for _ in 0..20_000 {
                let mut next: Vec<f64> = d.iter().map(|x| 0.5 * x).collect();
                for (s, &mass) in d.iter().enumerate() {
                    for &(t, p) in mdp.transitions(s, actions[s]) {
                        next[t] += 0.5 * mass * p;
                    }
                }
                d = next;
            }
            let gain: f64 = d.iter().enumerate().map(|(s, x)| x * mdp.cost(s)).sum();
            best = best.min(gain);
        }
        assert!((pol.gain - best).abs() < 1e-6, "{} vs {best}", pol.gain);
    }

    #[test]
    fn truncation_insensitive() {
        let g6 = solve(&tiny(6), SolveOptions::default()).unwrap().gain;
        let g12 = solve(&tiny(12), SolveOptions::default()).unwrap().gain;
        assert!((g6 - g12).abs() < 1e-3, "{g6} vs {g12}");
    }
}
