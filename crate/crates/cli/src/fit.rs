//! Log-log least squares for scaling exponents.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFew(usize),
    #[error("point ({0}, {1}) is not strictly positive")]
    NonPositive(f64, f64),
    #[error("all x values coincide")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fits `log y = intercept + slope * log x`. Constant data has `r2 = 1`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<PowerFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFew(points.len()));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(FitError::NonPositive(x, y));
    }
    let k = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot <= f64::EPSILON * k {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(PowerFit {
        slope,
        intercept,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use gossip_age::stats::harmonic;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [4.0, 16.0, 64.0, 256.0]
            .iter()
            .map(|&n: &f64| (n, 2.0 * n.sqrt()))
            .collect();
        let f = fit_exponent(&pts).unwrap();
        assert_relative_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_growth_is_flat() {
        let pts: Vec<(f64, f64)> = (4..=12)
            .map(|k| 1usize << k)
            .map(|n| (n as f64, harmonic(n)))
            .collect();
        // Local exponent of H_n is 1/H_n: about 0.3 at n = 16, 0.11 at 4096.
        let slope = fit_exponent(&pts).unwrap().slope;
        assert!((0.11..0.3).contains(&slope), "{slope}");
    }

    #[test]
    fn constant_values() {
        let f = fit_exponent(&[(1.0, 3.0), (2.0, 3.0), (5.0, 3.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            fit_exponent(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(FitError::TooFew(2))
        );
        assert_eq!(
            fit_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(FitError::NonPositive(2.0, 0.0))
        );
        assert_eq!(
            fit_exponent(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]),
            Err(FitError::Degenerate)
        );
    }
}
