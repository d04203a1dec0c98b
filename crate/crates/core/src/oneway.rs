//! One-way normal layout with known unit variance.
//!
//! Model 1 has group means `μ_i` iid `N(0, τ²)`; Model 2 (the submodel) fixes
//! every `μ_i = 0`. The Bayes factor is oriented as `F = f₂ / f₁`, so a large
//! `F` favours the submodel. Everything the Bayes factor needs from the data is
//! the vector of group sums `T_i`.
//!
//! With balanced groups of size `n` and true means iid `N(0, ε²)`, each
//! `T_i ~ N(0, σ²)` with `σ² = n²ε² + n`, and
//!
//! ```text
//! log F = (k/2)·ln(1 + a) − τ²σ²·Q / (2(1 + a)),   Q ~ χ²_k,  a = nτ²
//! ```
//!
//! which gives the exact tail probability and median used below.

use std::f64::consts::{LN_10, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{chisq_cdf, chisq_quantile, draw_normal, log1p_stable};

/// Prior probabilities of the full model (π₁) and the submodel (π₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrior {
    full: f64,
    null: f64,
}

impl ModelPrior {
    /// Builds the prior from π₂, the submodel's prior probability.
    pub fn from_null(null: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&null) {
            return Err(domain("submodel prior probability", null));
        }
        Ok(Self { full: 1.0 - null, null })
    }

    pub fn even() -> Self {
        Self { full: 0.5, null: 0.5 }
    }

    /// π₁
    pub fn full(&self) -> f64 {
        self.full
    }

    /// π₂
    pub fn null(&self) -> f64 {
        self.null
    }
}

impl Default for ModelPrior {
    fn default() -> Self {
        Self::even()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneWayConfig {
    group_sizes: Vec<u32>,
    tau2: f64,
    model_prior: ModelPrior,
}

impl OneWayConfig {
    pub fn new(group_sizes: Vec<u32>, tau2: f64, model_prior: ModelPrior) -> Result<Self> {
        if group_sizes.is_empty() {
            return Err(Error::InvalidConfig("at least one group is required".into()));
        }
        if let Some(i) = group_sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidConfig(format!("group {} has no observations", i + 1)));
        }
        if !tau2.is_finite() || tau2 < 0.0 {
            return Err(domain("prior variance tau^2", tau2));
        }
        Ok(Self { group_sizes, tau2, model_prior })
    }

    /// `k` groups of `n` observations each, even model prior.
    pub fn balanced(k: usize, n: u32, tau2: f64) -> Result<Self> {
        Self::new(vec![n; k], tau2, ModelPrior::even())
    }

    pub fn with_model_prior(mut self, model_prior: ModelPrior) -> Self {
        self.model_prior = model_prior;
        self
    }

    pub fn k(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[u32] {
        &self.group_sizes
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn model_prior(&self) -> ModelPrior {
        self.model_prior
    }

    pub fn total_observations(&self) -> u64 {
        self.group_sizes.iter().map(|&n| u64::from(n)).sum()
    }

    /// The common group size, if the design is balanced.
    pub fn common_size(&self) -> Option<u32> {
        let first = self.group_sizes[0];
        self.group_sizes.iter().all(|&n| n == first).then_some(first)
    }
}

/// How the true group means are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSpec {
    /// A deterministic vector of means, one per group.
    Fixed(Vec<f64>),
    /// Means drawn iid `N(0, ε²)`, afresh for each simulated dataset.
    IidNormal { epsilon2: f64 },
}

impl EffectSpec {
    pub fn validate(&self, cfg: &OneWayConfig) -> Result<()> {
        match self {
            EffectSpec::Fixed(mu) => {
                if mu.len() != cfg.k() {
                    return Err(Error::LengthMismatch { expected: cfg.k(), actual: mu.len() });
                }
                if let Some(&bad) = mu.iter().find(|m| !m.is_finite()) {
                    return Err(domain("group mean", bad));
                }
            }
            EffectSpec::IidNormal { epsilon2 } => {
                if !epsilon2.is_finite() || *epsilon2 < 0.0 {
                    return Err(domain("effect variance epsilon^2", *epsilon2));
                }
            }
        }
        Ok(())
    }

    /// Realized group means for one dataset.
    pub fn draw_means<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Vec<f64> {
        match self {
            EffectSpec::Fixed(mu) => mu.clone(),
            EffectSpec::IidNormal { epsilon2 } => {
                let sd = epsilon2.sqrt();
                (0..k).map(|_| draw_normal(rng, 0.0, sd)).collect()
            }
        }
    }
}

/// Group sums `T_i` plus the total sum of squares (only needed for densities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneWaySufficient {
    pub group_sums: Vec<f64>,
    pub sum_sq: f64,
}

impl OneWaySufficient {
    /// Reduces raw per-group observations.
    pub fn from_groups<G: AsRef<[f64]>>(groups: &[G]) -> Self {
        let group_sums = groups.iter().map(|g| g.as_ref().iter().sum()).collect();
        let sum_sq = groups.iter().flat_map(|g| g.as_ref().iter()).map(|x| x * x).sum();
        Self { group_sums, sum_sq }
    }

    fn check(&self, cfg: &OneWayConfig) -> Result<()> {
        if self.group_sums.len() != cfg.k() {
            return Err(Error::LengthMismatch {
                expected: cfg.k(),
                actual: self.group_sums.len(),
            });
        }
        Ok(())
    }
}

/// Draws one dataset `X_ij ~ N(μ_i, 1)` and reduces it.
pub fn simulate_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &OneWayConfig,
    eff: &EffectSpec,
) -> Result<OneWaySufficient> {
    eff.validate(cfg)?;
    let mu = eff.draw_means(rng, cfg.k());
    let mut group_sums = Vec::with_capacity(cfg.k());
    let mut sum_sq = 0.0;
    for (&n, &m) in cfg.group_sizes.iter().zip(&mu) {
        let mut t = 0.0;
        for _ in 0..n {
            let x = draw_normal(rng, m, 1.0);
            t += x;
            sum_sq += x * x;
        }
        group_sums.push(t);
    }
    Ok(OneWaySufficient { group_sums, sum_sq })
}

/// `log F = Σ_i [ ½ ln(1 + n_iτ²) − τ² T_i² / (2(1 + n_iτ²)) ]`.
pub fn log_bayes_factor(data: &OneWaySufficient, cfg: &OneWayConfig) -> Result<f64> {
    data.check(cfg)?;
    let tau2 = cfg.tau2;
    let mut log_f = 0.0;
    for (&n, &t) in cfg.group_sizes.iter().zip(&data.group_sums) {
        let shrink = f64::from(n) * tau2;
        log_f += 0.5 * log1p_stable(shrink)? - tau2 * t * t / (2.0 * (1.0 + shrink));
    }
    Ok(log_f)
}

fn ln_2pi() -> f64 {
    (2.0 * PI).ln()
}

/// Log joint density of the data under the submodel (iid standard normal).
pub fn log_density_model2(data: &OneWaySufficient, cfg: &OneWayConfig) -> Result<f64> {
    data.check(cfg)?;
    let n_total = cfg.total_observations() as f64;
    Ok(-0.5 * n_total * ln_2pi() - 0.5 * data.sum_sq)
}

/// Log marginal density `log f₁(x)` of the data under the full model.
pub fn log_marginal_density_model1(data: &OneWaySufficient, cfg: &OneWayConfig) -> Result<f64> {
    data.check(cfg)?;
    let n_total = cfg.total_observations() as f64;
    let tau2 = cfg.tau2;
    let mut log_det = 0.0;
    let mut quad = 0.0;
    for (&n, &t) in cfg.group_sizes.iter().zip(&data.group_sums) {
        let shrink = f64::from(n) * tau2;
        log_det += log1p_stable(shrink)?;
        quad += tau2 * t * t / (2.0 * (1.0 + shrink));
    }
    Ok(-0.5 * n_total * ln_2pi() - 0.5 * log_det - 0.5 * data.sum_sq + quad)
}

/// Posterior probability of the submodel, `π₂F / (π₁ + π₂F)`, in log space.
pub fn posterior_prob_model2(log_f: f64, prior: ModelPrior) -> f64 {
    if prior.null == 0.0 {
        return 0.0;
    }
    if prior.full == 0.0 {
        return 1.0;
    }
    let x = log_f + prior.null.ln() - prior.full.ln();
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exact `E[log F]` for a balanced design.
///
/// Fixed means use `E[T_i²] = n + n²μ_i²`; iid `N(0, ε²)` means use
/// `E[T_i²] = n + n²ε²`.
pub fn expected_log_bf(cfg: &OneWayConfig, eff: &EffectSpec) -> Result<f64> {
    let n = f64::from(cfg.common_size().ok_or(Error::UnbalancedDesign)?);
    eff.validate(cfg)?;
    let k = cfg.k() as f64;
    let tau2 = cfg.tau2;
    let sum_mu2 = match eff {
        EffectSpec::Fixed(mu) => mu.iter().map(|m| m * m).sum::<f64>(),
        EffectSpec::IidNormal { epsilon2 } => k * epsilon2,
    };
    let shrink = n * tau2;
    Ok(-tau2 * (n * k + n * n * sum_mu2) / (2.0 * (1.0 + shrink))
        + 0.5 * k * log1p_stable(shrink)?)
}

/// Balanced-design constants for the large-`k` analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedAsymptotics {
    n: u32,
    a: f64,
    sigma2: f64,
}

impl BalancedAsymptotics {
    pub fn new(n: u32, tau2: f64, epsilon2: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("group size must be positive".into()));
        }
        if !tau2.is_finite() || tau2 < 0.0 {
            return Err(domain("prior variance tau^2", tau2));
        }
        if !epsilon2.is_finite() || epsilon2 < 0.0 {
            return Err(domain("effect variance epsilon^2", epsilon2));
        }
        let nf = f64::from(n);
        Ok(Self { n, a: nf * tau2, sigma2: nf * nf * epsilon2 + nf })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `a = nτ²`
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `σ² = n²ε² + n`, the variance of each group sum.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn tau2(&self) -> f64 {
        self.a / f64::from(self.n)
    }

    pub fn epsilon2(&self) -> f64 {
        let n = f64::from(self.n);
        (self.sigma2 - n) / (n * n)
    }

    fn require_prior_spread(&self) -> Result<()> {
        if self.a > 0.0 {
            Ok(())
        } else {
            Err(domain("prior variance tau^2 (must be positive)", self.tau2()))
        }
    }
}

/// `f(a) = ln(1 + a) − a/(1 + a)`: the limiting slope of `2 log F / k` when
/// the true means are all zero.
pub fn zero_spread_slope(a: f64) -> f64 {
    a.ln_1p() - a / (1.0 + a)
}

/// Limit of `2 log F / k` as `k → ∞`: `ln(1 + a) − a(1 + nε²)/(1 + a)`.
pub fn asymptotic_slope(asym: &BalancedAsymptotics) -> f64 {
    let a = asym.a;
    // 1 + nε² = σ²/n
    a.ln_1p() - a * (asym.sigma2 / f64::from(asym.n)) / (1.0 + a)
}

/// Effect spread `ε*` at which the asymptotic slope crosses zero.
///
/// For `ε < ε*` the Bayes factor in favour of the (false) submodel grows
/// exponentially in `k`.
pub fn critical_epsilon(n: u32, tau2: f64) -> Result<f64> {
    if tau2 == 0.0 {
        BalancedAsymptotics::new(n, tau2, 0.0)?;
        return Ok(0.0);
    }
    let slope = |eps: f64| BalancedAsymptotics::new(n, tau2, eps * eps).map(|a| asymptotic_slope(&a));
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while slope(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact `P(log F > k·t)` when the means are iid `N(0, ε²)`.
pub fn tail_prob_log_bf(t: f64, k: u32, asym: &BalancedAsymptotics) -> Result<f64> {
    asym.require_prior_spread()?;
    if k == 0 {
        return Err(Error::InvalidConfig("number of groups must be positive".into()));
    }
    let a = asym.a;
    let kf = f64::from(k);
    // log F > kt  ⇔  Q < k(1 + a)(ln(1 + a) − 2t) / (τ²σ²)
    let threshold = kf * (1.0 + a) * (a.ln_1p() - 2.0 * t) / (asym.tau2() * asym.sigma2);
    if threshold.is_nan() {
        return Err(domain("tail threshold t", t));
    }
    if threshold <= 0.0 {
        return Ok(0.0);
    }
    chisq_cdf(threshold, k)
}

/// Exact median of `log F` over datasets with iid `N(0, ε²)` means.
pub fn median_log_bf(k: u32, asym: &BalancedAsymptotics) -> Result<f64> {
    asym.require_prior_spread()?;
    let a = asym.a;
    let q = chisq_quantile(0.5, k)?;
    Ok(0.5 * f64::from(k) * a.ln_1p() - asym.tau2() * asym.sigma2 * q / (2.0 * (1.0 + a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianPoint {
    pub k: u32,
    pub median_log_f: f64,
}

impl MedianPoint {
    pub fn median_log10_f(&self) -> f64 {
        self.median_log_f / LN_10
    }
}

/// Exact medians of `log F` for every `k` in `k_min..=k_max`.
pub fn median_curve(k_min: u32, k_max: u32, asym: &BalancedAsymptotics) -> Result<Vec<MedianPoint>> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidConfig(format!("invalid k range {k_min}..={k_max}")));
    }
    (k_min..=k_max)
        .map(|k| Ok(MedianPoint { k, median_log_f: median_log_bf(k, asym)? }))
        .collect()
}

/// Ordinary least-squares line with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), actual: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidConfig("a line fit needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit { slope, intercept: my - slope * mx, r_squared })
}
