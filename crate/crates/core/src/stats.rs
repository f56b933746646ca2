//! Small summary statistics shared by the simulator and the harness.

/// A replication mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation across replications divided by `sqrt(R)`.
    /// `NaN` when fewer than two replications were run.
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let r = samples.len();
        let mean = mean(samples);
        let se = if r >= 2 {
            sample_std(samples) / (r as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se }
    }

    /// Standard error of the difference of two independent estimates.
    pub fn diff_se(&self, other: &Estimate) -> f64 {
        (self.se * self.se + other.se * other.se).sqrt()
    }

    /// `|self - value| <= k * se`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Harmonic number `H_n`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_has_zero_se() {
        let e = Estimate::from_samples(&[2.0; 5]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
        assert!(Estimate::from_samples(&[1.0]).se.is_nan());
    }

    #[test]
    fn se_matches_hand_computation() {
        // std of (1,2,3,4) = sqrt(5/3)
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn harmonic_small() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
    }
}
