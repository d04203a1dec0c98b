//! Bayes factors and survey estimators under independence and hierarchical priors.
//!
//! Two worked models live here:
//!
//! - [`oneway`]: the one-way normal layout with known unit variance, where an
//!   iid `N(0, τ²)` prior on the group means makes the Bayes factor in favour of
//!   the all-zero submodel grow exponentially in the number of groups even when
//!   the submodel is false.
//! - [`survey`]: a finite population of Bernoulli probabilities with a
//!   hierarchical Beta prior, whose Bayes estimate of the population average
//!   tracks the Horvitz–Thompson estimator.
//!
//! [`oracles`] holds slow brute-force references (quadrature and Monte Carlo)
//! that the closed forms are checked against, and [`cli`] drives everything
//! from the command line.

pub mod cli;
pub mod error;
pub mod numerics;
pub mod oneway;
pub mod oracles;
pub mod survey;

pub use error::{Error, Result};
