//! Gaussian beliefs and the standard normal helpers used throughout the crate.

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Absolute lower bound on any sigma floor, used when the training range is 0.
pub const ABSOLUTE_SIGMA_FLOOR: f64 = 1e-12;

/// Standard normal density.
pub fn std_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function.
pub fn std_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile. Polished with Newton steps on the CDF so the
/// absolute error stays below 1e-10 across (1e-9, 1 - 1e-9).
pub fn std_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let density = std_pdf(z);
        if density <= 0.0 {
            break;
        }
        let step = (std_cdf(z) - p) / density;
        z -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    z
}

/// `1e-8 * range(targets)`, or [`ABSOLUTE_SIGMA_FLOOR`] when the range is 0.
pub fn sigma_floor_for(targets: &[f64]) -> f64 {
    let (lo, hi) = targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    let range = hi - lo;
    if range.is_finite() && range > 0.0 {
        (1e-8 * range).max(ABSOLUTE_SIGMA_FLOOR)
    } else {
        ABSOLUTE_SIGMA_FLOOR
    }
}

/// Conditional Gaussian belief `N(mu, sigma^2)` for one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPrediction {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalPrediction {
    /// Builds a prediction, raising `sigma` to `floor` when it falls below it
    /// (or is NaN).
    pub fn floored(mu: f64, sigma: f64, floor: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Contract(format!("non-finite mean {mu}")));
        }
        let floor = floor.max(ABSOLUTE_SIGMA_FLOOR);
        let sigma = if sigma.is_nan() || sigma < floor { floor } else { sigma };
        if !sigma.is_finite() {
            return Err(Error::Contract(format!("non-finite sigma {sigma}")));
        }
        Ok(Self { mu, sigma })
    }

    /// Unchecked constructor for callers that already hold a valid pair.
    pub fn new(mu: f64, sigma: f64) -> Self {
        debug_assert!(mu.is_finite() && sigma.is_finite() && sigma > 0.0);
        Self { mu, sigma }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.mu) / self.sigma
    }

    pub fn pdf(&self, y: f64) -> f64 {
        std_pdf(self.standardize(y)) / self.sigma
    }

    pub fn cdf(&self, y: f64) -> f64 {
        std_cdf(self.standardize(y))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.mu + self.sigma * std_quantile(p)
    }
}
