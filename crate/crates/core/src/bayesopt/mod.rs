//! GP-UCB search over source-rate allocations.
//!
//! The feasible set is `D = {x in [0, λ]^n : Σ x_i <= λ}`. Rewards are the
//! negated worst-node age, so maximizing the reward equalizes timeliness.

use std::fmt::{Display, Write as _};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use thiserror::Error;

use crate::rng::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesOptError {
    #[error("kernel matrix is not positive definite even with jitter")]
    Singular,
    #[error("{0}")]
    BadInput(String),
    #[error("evaluation at {lambda:?} failed: {message}")]
    Evaluator { lambda: Vec<f64>, message: String },
}

/// Diagonal jitter added to the kernel matrix by [`Kernel::new`].
pub const JITTER: f64 = 1e-8;

/// Squared-exponential kernel `s² exp(-|x-y|² / 2ℓ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub length_scale: f64,
    pub signal_var: f64,
    pub jitter: f64,
}

impl Kernel {
    pub fn new(length_scale: f64, signal_var: f64) -> Self {
        Self {
            length_scale,
            signal_var,
            jitter: JITTER,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.signal_var * (-0.5 * d2 / (self.length_scale * self.length_scale)).exp()
    }

    fn validate(&self) -> Result<(), BayesOptError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.length_scale)
            && ok(self.signal_var)
            && self.jitter.is_finite()
            && self.jitter >= 0.0
        {
            Ok(())
        } else {
            Err(BayesOptError::BadInput(format!("bad kernel {self:?}")))
        }
    }
}

/// Zero-mean GP posterior given noise-free observations.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    kernel: Kernel,
    points: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `K⁻¹ f`.
    alpha: DVector<f64>,
}

pub fn gp_fit(
    points: &[Vec<f64>],
    rewards: &[f64],
    kernel: Kernel,
) -> Result<GpPosterior, BayesOptError> {
    kernel.validate()?;
    if points.len() != rewards.len() {
        return Err(BayesOptError::BadInput(format!(
            "{} points but {} rewards",
            points.len(),
            rewards.len()
        )));
    }
    if let Some(p) = points.first() {
        if points.iter().any(|q| q.len() != p.len()) {
            return Err(BayesOptError::BadInput("points differ in dimension".into()));
        }
    }
    let m = points.len();
    if m == 0 {
        return Ok(GpPosterior {
            kernel,
            points: Vec::new(),
            rewards: Vec::new(),
            chol: None,
            alpha: DVector::zeros(0),
        });
    }
    let k = DMatrix::from_fn(m, m, |i, j| {
        kernel.eval(&points[i], &points[j]) + if i == j { kernel.jitter } else { 0.0 }
    });
    let chol = Cholesky::new(k).ok_or(BayesOptError::Singular)?;
    let alpha = chol.solve(&DVector::from_column_slice(rewards));
    Ok(GpPosterior {
        kernel,
        points: points.to_vec(),
        rewards: rewards.to_vec(),
        chol: Some(chol),
        alpha,
    })
}

impl GpPosterior {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    fn k_vec(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| self.kernel.eval(x, p)),
        )
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.k_vec(x).dot(&self.alpha)
    }

    /// Posterior variance, clamped at zero against rounding.
    ///
    /// At a training point `x_j` this is `ε - ε² [(K + εI)⁻¹]_jj`, which is
    /// evaluated directly; the generic `k(x,x) - kᵀK⁻¹k` form loses every
    /// digit there once `K` is ill-conditioned.
    pub fn variance(&self, x: &[f64]) -> f64 {
        let prior = self.kernel.eval(x, x);
        let Some(c) = &self.chol else {
            return prior;
        };
        if let Some(j) = self.points.iter().position(|p| p.as_slice() == x) {
            let eps = self.kernel.jitter;
            let mut e = DVector::zeros(self.points.len());
            e[j] = 1.0;
            let y = c
                .l_dirty()
                .solve_lower_triangular(&e)
                .expect("Cholesky factor has a positive diagonal");
            return (eps - eps * eps * y.norm_squared()).max(0.0);
        }
        let kx = self.k_vec(x);
        (prior - kx.dot(&c.solve(&kx))).max(0.0)
    }

    pub fn ucb(&self, x: &[f64], beta: f64) -> f64 {
        self.mean(x) + beta.sqrt() * self.variance(x).sqrt()
    }

    /// Largest `|μ(x_j) - f_j|` and largest `σ²(x_j)` over training points.
    pub fn interpolation_residual(&self) -> (f64, f64) {
        self.points
            .iter()
            .zip(&self.rewards)
            .fold((0.0, 0.0), |(e, v), (p, &f)| {
                (
                    f64::max(e, (self.mean(p) - f).abs()),
                    f64::max(v, self.variance(p)),
                )
            })
    }
}

/// Exploration weight at step `m >= 1`.
pub fn beta_schedule(m: usize) -> f64 {
    let m = m.max(1) as f64;
    2.0 * (m * m * std::f64::consts::PI.powi(2) / 0.6).ln()
}

/// Euclidean projection onto `D = {x in [0, budget]^n : Σ x <= budget}`.
pub fn project(x: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, budget)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // simplex projection: shift by θ so that Σ max(x_i - θ, 0) = budget
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - budget) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = x.iter().map(|v| (v - theta).max(0.0)).collect();
    // trim rounding so the constraint holds exactly
    loop {
        let excess = out.iter().sum::<f64>() - budget;
        if excess <= 0.0 {
            break;
        }
        let Some(big) = out.iter_mut().max_by(|a, b| a.total_cmp(b)) else {
            break;
        };
        *big = (*big - excess.max(*big * f64::EPSILON)).max(0.0);
    }
    out
}

/// Centroid of `D`; every coordinate is `budget / (n + 1)`.
pub fn centroid(n: usize, budget: f64) -> Vec<f64> {
    vec![budget / (n + 1) as f64; n]
}

fn random_point(n: usize, budget: f64, r: &mut impl Rng) -> Vec<f64> {
    // uniform on D: first n of n+1 normalized exponentials
    let e: Vec<f64> = (0..=n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    project(
        &e[..n]
            .iter()
            .map(|v| budget * v / total)
            .collect::<Vec<_>>(),
        budget,
    )
}

/// Number of local searches per acquisition.
pub const MULTI_STARTS: usize = 32;

/// `argmax_{x in D} μ(x) + √β σ(x)` by projected coordinate search from
/// [`MULTI_STARTS`] starts: the centroid, the training points with the
/// highest reward, and seeded uniform draws.
pub fn ucb_select(post: &GpPosterior, beta: f64, n: usize, budget: f64, seed: u64) -> Vec<f64> {
    if post.is_empty() || n == 0 {
        return centroid(n, budget);
    }
    let mut r = rng(seed);
    let mut starts = vec![centroid(n, budget)];
    let mut order: Vec<usize> = (0..post.len()).collect();
    order.sort_by(|&a, &b| post.rewards[b].total_cmp(&post.rewards[a]));
    starts.extend(
        order
            .iter()
            .take(MULTI_STARTS / 4)
            .map(|&j| project(&post.points[j], budget)),
    );
    while starts.len() < MULTI_STARTS {
        starts.push(random_point(n, budget, &mut r));
    }
    let score = |x: &[f64]| post.ucb(x, beta);
    let mut best = starts[0].clone();
    let mut best_val = score(&best);
    for start in starts {
        let mut x = start;
        let mut val = score(&x);
        let mut step = budget / 4.0;
        while step > budget * 1e-5 {
            let mut moved = false;
            for i in 0..n {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += dir * step;
                    let y = project(&y, budget);
                    let v = score(&y);
                    if v > val {
                        x = y;
                        val = v;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if val > best_val {
            best = x;
            best_val = val;
        }
    }
    best
}

/// Settings of an optimization run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Number of evaluations.
    pub steps: usize,
    /// Total source rate λ.
    pub budget: f64,
    /// Length scale as a fraction of the budget.
    pub length_scale_frac: f64,
    pub seed: u64,
    /// Constant exploration weight in place of the schedule.
    pub beta_override: Option<f64>,
}

impl OptimizeOptions {
    pub fn new(steps: usize, budget: f64, seed: u64) -> Self {
        Self {
            steps,
            budget,
            length_scale_frac: 0.25,
            seed,
            beta_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub m: usize,
    pub lambda: Vec<f64>,
    pub a_hat: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub trace: Vec<TraceStep>,
    /// Worst interpolation error over all fits, in units of the signal sd.
    pub max_interp_error: f64,
    /// Worst posterior variance at a training point over all fits.
    pub max_train_variance: f64,
}

impl Optimized {
    /// Rows `m,lambda_1..lambda_n,a_hat,incumbent`.
    pub fn trace_csv(&self) -> String {
        let n = self.best.len();
        let mut out = String::from("m");
        for i in 1..=n {
            let _ = write!(out, ",lambda_{i}");
        }
        out.push_str(",a_hat,incumbent\n");
        for s in &self.trace {
            let _ = write!(out, "{}", s.m);
            for l in &s.lambda {
                let _ = write!(out, ",{l}");
            }
            let _ = writeln!(out, ",{},{}", s.a_hat, s.incumbent);
        }
        out
    }
}

/// Minimizes `evaluate(λ)` (the worst-node age) over `D`.
///
/// The first evaluation is the uniform allocation `budget / n`; each later
/// point maximizes the UCB of a GP fitted to centered rewards `-â`.
pub fn optimize<E, F>(
    n: usize,
    opts: OptimizeOptions,
    mut evaluate: F,
) -> Result<Optimized, BayesOptError>
where
    E: Display,
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    if n == 0 || opts.steps == 0 || !(opts.budget.is_finite() && opts.budget > 0.0) {
        return Err(BayesOptError::BadInput(format!(
            "n = {n}, steps = {}, budget = {}",
            opts.steps, opts.budget
        )));
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut ages: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let (mut max_err, mut max_var) = (0.0f64, 0.0f64);
    let mut best = (Vec::new(), f64::INFINITY);
    for m in 1..=opts.steps {
        let x = if m == 1 {
            vec![opts.budget / n as f64; n]
        } else {
            let offset = ages.iter().sum::<f64>() / ages.len() as f64;
            let rewards: Vec<f64> = ages.iter().map(|a| offset - a).collect();
            let (lo, hi) = ages
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| {
                    (l.min(a), h.max(a))
                });
            let signal = (hi - lo).powi(2).max(1e-6);
            let kernel = Kernel::new(opts.budget * opts.length_scale_frac, signal);
            let post = gp_fit(&points, &rewards, kernel)?;
            let (e, v) = post.interpolation_residual();
            max_err = max_err.max(e / signal.sqrt());
            max_var = max_var.max(v);
            let beta = opts.beta_override.unwrap_or_else(|| beta_schedule(m));
            ucb_select(
                &post,
                beta,
                n,
                opts.budget,
                crate::rng::split(opts.seed, m as u64),
            )
        };
        let a = evaluate(&x).map_err(|e| BayesOptError::Evaluator {
            lambda: x.clone(),
            message: e.to_string(),
        })?;
        if a < best.1 {
            best = (x.clone(), a);
        }
        trace.push(TraceStep {
            m,
            lambda: x.clone(),
            a_hat: a,
            incumbent: best.1,
        });
        points.push(x);
        ages.push(a);
    }
    Ok(Optimized {
        best: best.0,
        best_value: best.1,
        trace,
        max_interp_error: max_err,
        max_train_variance: max_var,
    })
}
