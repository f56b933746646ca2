use std::fmt::Write as _;

use rayon::prelude::*;

use super::AnalyticError;
use crate::protocols::Metric;
use crate::topology::{Network, NodeId};

/// Largest network the exponential-size table accepts.
pub const MAX_EXACT_NODES: usize = 20;

/// Which subsets get evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// Every non-empty subset.
    Full,
    /// Only subsets reachable from singletons by repeatedly adding an
    /// updating neighbor; enough for the singleton values.
    Lazy,
}

/// Limiting `m`-th moments of the age of the freshest node in each subset.
///
/// Subsets are bitmasks where bit `k-1` stands for node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetAgeTable {
    n: usize,
    metric: Metric,
    moments: usize,
    /// `values[m-1][mask]`; NaN where a lazy table skipped the subset.
    values: Vec<Vec<f64>>,
}

impl SubsetAgeTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn moments(&self) -> usize {
        self.moments
    }

    pub fn mask(nodes: &[NodeId]) -> u32 {
        nodes.iter().fold(0, |m, &i| m | 1 << (i - 1))
    }

    /// `m`-th moment for subset `mask`, `None` when not evaluated.
    pub fn get(&self, mask: u32, m: usize) -> Option<f64> {
        let v = self.values[m - 1][mask as usize];
        (!v.is_nan()).then_some(v)
    }

    pub fn value(&self, nodes: &[NodeId]) -> Option<f64> {
        self.get(Self::mask(nodes), 1)
    }

    /// Per-node `m`-th moments, index `i-1` for node `i`.
    pub fn singletons(&self, m: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.values[m - 1][1 << k]).collect()
    }

    /// Per-node variance from the first two moments.
    pub fn variances(&self) -> Option<Vec<f64>> {
        (self.moments >= 2).then(|| {
            let (m1, m2) = (self.singletons(1), self.singletons(2));
            m1.iter().zip(&m2).map(|(a, b)| b - a * a).collect()
        })
    }

    /// Evaluated subsets as `(mask, [moments])`, ascending mask.
    pub fn entries(&self) -> impl Iterator<Item = (u32, Vec<f64>)> + '_ {
        (1..self.values[0].len() as u32)
            .filter(|&mask| !self.values[0][mask as usize].is_nan())
            .map(|mask| (mask, self.values.iter().map(|v| v[mask as usize]).collect()))
    }

    /// Rows `subset_bitmask,v,moment2,...` in ascending mask order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subset_bitmask,v");
        for m in 2..=self.moments {
            let _ = write!(out, ",moment{m}");
        }
        out.push('\n');
        for (mask, vals) in self.entries() {
            let _ = write!(out, "{mask}");
            for v in vals {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Limiting version age (or AoI) moments for every relevant subset.
///
/// Subsets are solved by descending size since `v_S` depends only on
/// one-larger sets; entries of one size are computed in parallel and the
/// result is identical to a sequential sweep. AoI is the version recursion
/// with `λ_00 = 1`; moment `m` uses moment `m-1` of the same subset.
pub fn exact_subset_ages(
    net: &Network,
    metric: Metric,
    max_moment: usize,
    mode: TableMode,
) -> Result<SubsetAgeTable, AnalyticError> {
    let n = net.n();
    if n > MAX_EXACT_NODES {
        return Err(AnalyticError::TooLarge(n));
    }
    if max_moment == 0 {
        return Err(AnalyticError::BadInput(
            "moment order must be at least 1".into(),
        ));
    }
    let report = net.validate();
    if !report.ok {
        return Err(AnalyticError::Unreachable(report.unreachable));
    }

    let size = 1usize << n;
    let full = (size - 1) as u32;
    // rate[i][j] = λ_{i+1, j+1}
    let mut rate = vec![vec![0.0; n]; n];
    for (i, j, r) in net.edges() {
        rate[i - 1][j - 1] = r;
    }
    let source: Vec<f64> = net.source_rates().to_vec();
    let lambda00 = match metric {
        Metric::Version => net.self_update_rate(),
        Metric::Aoi => 1.0,
    };
    let binom: Vec<Vec<f64>> = (0..=max_moment)
        .map(|m| (0..=m).map(|k| binomial(m, k)).collect())
        .collect();

    let needed: Option<Vec<bool>> = match mode {
        TableMode::Full => None,
        TableMode::Lazy => {
            let mut seen = vec![false; size];
            let mut stack: Vec<u32> = (0..n).map(|k| 1u32 << k).collect();
            for &s in &stack {
                seen[s as usize] = true;
            }
            while let Some(s) = stack.pop() {
                for i in 0..n {
                    if s >> i & 1 == 1 {
                        continue;
                    }
                    let into = (0..n).any(|j| s >> j & 1 == 1 && rate[i][j] > 0.0);
                    let t = s | 1 << i;
                    if into && !seen[t as usize] {
                        seen[t as usize] = true;
                        stack.push(t);
                    }
                }
            }
            Some(seen)
        }
    };

    let mut layers: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for mask in 1..=full {
        if needed.as_ref().map_or(true, |s| s[mask as usize]) {
            layers[mask.count_ones() as usize].push(mask);
        }
    }

    let mut values = vec![vec![f64::NAN; size]; max_moment];
    for layer in layers.iter().rev() {
        let solved: Vec<(u32, Vec<f64>)> = layer
            .par_iter()
            .map(|&mask| {
                let s = mask as usize;
                let mut denom: f64 = (0..n).filter(|&j| s >> j & 1 == 1).map(|j| source[j]).sum();
                let mut expansions: Vec<(usize, f64)> = Vec::new();
                for i in 0..n {
                    if s >> i & 1 == 1 {
                        continue;
                    }
                    let li: f64 = (0..n)
                        .filter(|&j| s >> j & 1 == 1)
                        .map(|j| rate[i][j])
                        .sum();
                    if li > 0.0 {
                        denom += li;
                        expansions.push((s | 1 << i, li));
                    }
                }
                let mut v = vec![0.0; max_moment + 1];
                v[0] = 1.0;
                for m in 1..=max_moment {
                    let own = match metric {
                        Metric::Version => {
                            lambda00 * (0..m).map(|k| binom[m][k] * v[k]).sum::<f64>()
                        }
                        Metric::Aoi => m as f64 * v[m - 1],
                    };
                    let spread: f64 = expansions
                        .iter()
                        .map(|&(t, li)| li * values[m - 1][t])
                        .sum();
                    v[m] = if denom > 0.0 {
                        (own + spread) / denom
                    } else {
                        f64::INFINITY
                    };
                }
                (mask, v[1..].to_vec())
            })
            .collect();
        for (mask, v) in solved {
            for (m, x) in v.into_iter().enumerate() {
                values[m][mask as usize] = x;
            }
        }
    }
    Ok(SubsetAgeTable {
        n,
        metric,
        moments: max_moment,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> Network {
        Network::from_rates(
            3,
            1.0,
            vec![1.0, 0.0, 1.0],
            [((1, 2), 1.0), ((2, 1), 1.0), ((2, 3), 1.0), ((3, 2), 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn toy_network_by_hand() {
        let t = exact_subset_ages(&toy(), Metric::Version, 1, TableMode::Full).unwrap();
        assert_relative_eq!(t.value(&[1, 2, 3]).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(t.value(&[1, 2]).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(t.value(&[2, 3]).unwrap(), 0.75, epsilon = 1e-15);
        let v = t.singletons(1);
        assert_relative_eq!(v[0], 0.875, epsilon = 1e-15);
        assert_relative_eq!(v[1], 1.25, epsilon = 1e-15);
        assert_relative_eq!(v[2], 0.875, epsilon = 1e-15);
    }

    #[test]
    fn lazy_matches_full_and_skips() {
        let full = exact_subset_ages(&toy(), Metric::Version, 2, TableMode::Full).unwrap();
        let lazy = exact_subset_ages(&toy(), Metric::Version, 2, TableMode::Lazy).unwrap();
        assert_eq!(full.singletons(1), lazy.singletons(1));
        assert_eq!(full.singletons(2), lazy.singletons(2));
        assert!(lazy.value(&[1, 3]).is_none());
        assert!(full.value(&[1, 3]).is_some());
    }

    #[test]
    fn two_node_line_aoi_variances() {
        let net = Network::from_rates(2, 5.0, vec![1.0, 0.0], [((1, 2), 1.0)]).unwrap();
        let t = exact_subset_ages(&net, Metric::Aoi, 2, TableMode::Full).unwrap();
        let var = t.variances().unwrap();
        assert_relative_eq!(var[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(var[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn single_node_base_case() {
        let net = Network::from_rates(1, 2.0, vec![1.0], []).unwrap();
        let t = exact_subset_ages(&net, Metric::Version, 1, TableMode::Full).unwrap();
        assert_eq!(t.singletons(1), vec![2.0]);
    }

    #[test]
    fn single_node_version_moments() {
        // X is geometric-like: number of λ_e events before a λ_01 event
        let (e, s) = (2.0, 1.0);
        let net = Network::from_rates(1, e, vec![s], []).unwrap();
        let t = exact_subset_ages(&net, Metric::Version, 2, TableMode::Full).unwrap();
        let p = e / (e + s);
        let mean = p / (1.0 - p);
        let var = p / (1.0 - p).powi(2);
        assert_relative_eq!(t.singletons(1)[0], mean, epsilon = 1e-12);
        assert_relative_eq!(t.singletons(2)[0], var + mean * mean, epsilon = 1e-12);
    }

    #[test]
    fn guards() {
        let broken = Network::from_rates(2, 1.0, vec![1.0, 0.0], []).unwrap();
        assert_eq!(
            exact_subset_ages(&broken, Metric::Version, 1, TableMode::Full).unwrap_err(),
            AnalyticError::Unreachable(vec![2])
        );
        let big = Network::from_rates(21, 1.0, vec![1.0; 21], []).unwrap();
        assert_eq!(
            exact_subset_ages(&big, Metric::Version, 1, TableMode::Full).unwrap_err(),
            AnalyticError::TooLarge(21)
        );
    }

    #[test]
    fn csv_layout() {
        let t = exact_subset_ages(&toy(), Metric::Version, 2, TableMode::Full).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("subset_bitmask,v,moment2"));
        assert_eq!(lines.count(), 7);
        assert!(csv.contains("\n7,0.5,"));
    }
}
