//! Special functions, chi-square law, and seeded random generation.
//!
//! Nothing in here knows about Bayes factors or surveys; the statistical
//! modules build on these primitives.

mod rng;
mod special;

pub use rng::{draw_bernoulli, draw_normal, Seed, SimRng};
pub use special::{
    chisq_cdf, chisq_quantile, ln_beta, ln_gamma, log1p_stable, regularized_gamma_p,
};

use crate::error::{Error, Result};

/// Absolute/relative acceptance band used when comparing computed values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    abs: f64,
    rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(abs) || !ok(rel) || (abs == 0.0 && rel == 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance needs nonnegative abs/rel with one positive, got abs={abs}, rel={rel}"
            )));
        }
        Ok(Self { abs, rel })
    }

    pub fn absolute(abs: f64) -> Self {
        Self::new(abs, 0.0).expect("absolute tolerance must be positive")
    }

    pub fn relative(rel: f64) -> Self {
        Self::new(0.0, rel).expect("relative tolerance must be positive")
    }

    pub fn abs(&self) -> f64 {
        self.abs
    }

    pub fn rel(&self) -> f64 {
        self.rel
    }

    /// `|actual - expected| <= max(abs, rel * |expected|)`.
    pub fn accepts(&self, actual: f64, expected: f64) -> bool {
        let band = self.abs.max(self.rel * expected.abs());
        (actual - expected).abs() <= band
    }
}
