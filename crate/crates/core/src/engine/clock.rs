use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Pareto, Uniform};

use super::EngineError;

/// Inter-arrival distribution of an update clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterArrival {
    Exponential {
        rate: f64,
    },
    Deterministic {
        period: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// Heavy-tailed; the second moment is infinite for `shape <= 2`.
    Pareto {
        scale: f64,
        shape: f64,
    },
}

impl InterArrival {
    pub fn exponential(rate: f64) -> Self {
        InterArrival::Exponential { rate }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let good = match *self {
            InterArrival::Exponential { rate } => rate.is_finite() && rate >= 0.0,
            InterArrival::Deterministic { period } => ok(period),
            InterArrival::Gamma { shape, scale } => ok(shape) && ok(scale),
            InterArrival::Uniform { low, high } => {
                low.is_finite() && low >= 0.0 && high.is_finite() && high > low
            }
            InterArrival::Pareto { scale, shape } => ok(scale) && ok(shape),
        };
        if good {
            Ok(())
        } else {
            Err(EngineError::BadDistribution(format!("{self:?}")))
        }
    }

    /// Whether the clock never fires.
    pub fn is_silent(&self) -> bool {
        matches!(*self, InterArrival::Exponential { rate } if rate == 0.0)
    }

    /// `E[Y]`, `None` when infinite.
    pub fn mean(&self) -> Option<f64> {
        Some(match *self {
            InterArrival::Exponential { rate } => {
                if rate == 0.0 {
                    return None;
                }
                1.0 / rate
            }
            InterArrival::Deterministic { period } => period,
            InterArrival::Gamma { shape, scale } => shape * scale,
            InterArrival::Uniform { low, high } => (low + high) / 2.0,
            InterArrival::Pareto { scale, shape } => {
                if shape <= 1.0 {
                    return None;
                }
                shape * scale / (shape - 1.0)
            }
        })
    }

    /// `E[Y^2]`, `None` when infinite.
    pub fn second_moment(&self) -> Option<f64> {
        Some(match *self {
            InterArrival::Exponential { rate } => {
                if rate == 0.0 {
                    return None;
                }
                2.0 / (rate * rate)
            }
            InterArrival::Deterministic { period } => period * period,
            InterArrival::Gamma { shape, scale } => shape * (shape + 1.0) * scale * scale,
            InterArrival::Uniform { low, high } => (low * low + low * high + high * high) / 3.0,
            InterArrival::Pareto { scale, shape } => {
                if shape <= 2.0 {
                    return None;
                }
                shape * scale * scale / (shape - 2.0)
            }
        })
    }

    /// Mean backward recurrence time `E[Y^2] / (2 E[Y])`.
    pub fn mean_residual(&self) -> Option<f64> {
        Some(self.second_moment()? / (2.0 * self.mean()?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InterArrival::Exponential { rate } => {
                if rate == 0.0 {
                    f64::INFINITY
                } else {
                    Exp::new(rate).expect("validated rate").sample(rng)
                }
            }
            InterArrival::Deterministic { period } => period,
            InterArrival::Gamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated gamma")
                .sample(rng),
            InterArrival::Uniform { low, high } => Uniform::new(low, high)
                .expect("validated uniform")
                .sample(rng),
            InterArrival::Pareto { scale, shape } => Pareto::new(scale, shape)
                .expect("validated pareto")
                .sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use approx::assert_relative_eq;

    #[test]
    fn residuals() {
        assert_relative_eq!(InterArrival::exponential(2.0).mean_residual().unwrap(), 0.5);
        assert_relative_eq!(
            InterArrival::Deterministic { period: 3.0 }
                .mean_residual()
                .unwrap(),
            1.5
        );
        assert_relative_eq!(
            InterArrival::Gamma {
                shape: 2.0,
                scale: 0.5
            }
            .mean_residual()
            .unwrap(),
            0.75
        );
        let u = InterArrival::Uniform {
            low: 1.0,
            high: 3.0,
        };
        assert_relative_eq!(u.mean_residual().unwrap(), (1.0 + 3.0 + 9.0) / (3.0 * 4.0));
        assert!(InterArrival::Pareto {
            scale: 1.0,
            shape: 1.5
        }
        .second_moment()
        .is_none());
        assert!(InterArrival::Pareto {
            scale: 1.0,
            shape: 3.0
        }
        .second_moment()
        .is_some());
    }

    #[test]
    fn sample_means() {
        let mut r = rng(11);
        for d in [
            InterArrival::exponential(0.5),
            InterArrival::Gamma {
                shape: 3.0,
                scale: 0.2,
            },
            InterArrival::Uniform {
                low: 0.5,
                high: 1.5,
            },
            InterArrival::Pareto {
                scale: 1.0,
                shape: 4.0,
            },
        ] {
            let k = 200_000;
            let m: f64 = (0..k).map(|_| d.sample(&mut r)).sum::<f64>() / k as f64;
            assert_relative_eq!(m, d.mean().unwrap(), max_relative = 0.02);
        }
    }

    #[test]
    fn validation() {
        assert!(InterArrival::Uniform {
            low: 2.0,
            high: 1.0
        }
        .validate()
        .is_err());
        assert!(InterArrival::Gamma {
            shape: 0.0,
            scale: 1.0
        }
        .validate()
        .is_err());
        assert!(InterArrival::exponential(0.0).validate().is_ok());
        assert!(InterArrival::exponential(0.0).is_silent());
    }
}
