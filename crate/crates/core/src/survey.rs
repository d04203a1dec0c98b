//! Finite-population survey with a hierarchical Beta prior.
//!
//! Units `1..=B` carry success probabilities `θ_j`. A sample `J` is drawn and
//! one Bernoulli(`θ_j`) outcome `Y_j` is seen for each sampled unit. The `θ_j`
//! are iid Beta with mean `ψ` and variance `η`; `ψ` has a Beta(`α₀`, `β₀`)
//! hyperprior and, given `ψ`, `η` is uniform on `(0, ψ(1−ψ))`.
//!
//! Integrating the `θ_j` out leaves `ψ^S (1−ψ)^{|J|−S}` as the only data
//! dependence, so the posterior of `ψ` is Beta(`S+α₀`, `|J|−S+β₀`) and
//!
//! ```text
//! E(θ_j | Y, J) = ψ̂                 j ∉ J
//!              = ψ̂ + (Y_j − ψ̂)/2    j ∈ J
//! ```

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::draw_bernoulli;

/// Conditional prior of the Beta variance `η` given the mean `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaPrior {
    /// `η | ψ ~ Uniform(0, ψ(1−ψ))`.
    #[default]
    UniformOnFeasible,
}

/// Prior on the Beta mean `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiPrior {
    Beta { alpha0: f64, beta0: f64 },
    /// The improper `ψ⁻¹(1−ψ)⁻¹` limit of Beta(`α₀`, `β₀`) as both go to 0.
    ImproperLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    psi: PsiPrior,
    eta: EtaPrior,
}

impl HyperPrior {
    pub fn beta(alpha0: f64, beta0: f64) -> Result<Self> {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(domain("hyperprior alpha0", alpha0));
        }
        if !beta0.is_finite() || beta0 <= 0.0 {
            return Err(domain("hyperprior beta0", beta0));
        }
        Ok(Self { psi: PsiPrior::Beta { alpha0, beta0 }, eta: EtaPrior::UniformOnFeasible })
    }

    pub fn improper_limit() -> Self {
        Self { psi: PsiPrior::ImproperLimit, eta: EtaPrior::UniformOnFeasible }
    }

    pub fn psi_prior(&self) -> PsiPrior {
        self.psi
    }

    pub fn eta_prior(&self) -> EtaPrior {
        self.eta
    }

    pub fn is_improper(&self) -> bool {
        matches!(self.psi, PsiPrior::ImproperLimit)
    }

    /// `(α₀, β₀)`, with the improper limit read as `(0, 0)`.
    fn shape0(&self) -> (f64, f64) {
        match self.psi {
            PsiPrior::Beta { alpha0, beta0 } => (alpha0, beta0),
            PsiPrior::ImproperLimit => (0.0, 0.0),
        }
    }
}

/// Beta distribution in mean/variance form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMeanVar {
    psi: f64,
    eta: f64,
}

impl BetaMeanVar {
    /// Requires `0 < ψ < 1` and `0 < η < ψ(1−ψ)`.
    pub fn new(psi: f64, eta: f64) -> Result<Self> {
        if !(psi > 0.0 && psi < 1.0) {
            return Err(domain("Beta mean psi", psi));
        }
        if !(eta > 0.0 && eta < psi * (1.0 - psi)) {
            return Err(domain("Beta variance eta (must lie in (0, psi(1-psi)))", eta));
        }
        Ok(Self { psi, eta })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `(α, β)` with `α + β = ψ(1−ψ)/η − 1`, `α = (α+β)ψ`, `β = (α+β)(1−ψ)`.
pub fn beta_from_mean_var(mv: &BetaMeanVar) -> (f64, f64) {
    let total = mv.psi * (1.0 - mv.psi) / mv.eta - 1.0;
    (total * mv.psi, total * (1.0 - mv.psi))
}

pub fn mean_var_from_beta(alpha: f64, beta: f64) -> Result<BetaMeanVar> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(domain("Beta shape alpha", alpha));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(domain("Beta shape beta", beta));
    }
    let total = alpha + beta;
    let psi = alpha / total;
    BetaMeanVar::new(psi, psi * (1.0 - psi) / (total + 1.0))
}

/// `∫ θ^y (1−θ)^{1−y} Beta(θ; α, β) dθ = ψ^y (1−ψ)^{1−y}`.
pub fn marginal_y_given_hyper(y: u8, mv: &BetaMeanVar) -> Result<f64> {
    match y {
        1 => Ok(mv.psi),
        0 => Ok(1.0 - mv.psi),
        _ => Err(domain("binary outcome", f64::from(y))),
    }
}

/// Sampled units (1-based) with their observed outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyData {
    population: usize,
    responses: BTreeMap<usize, u8>,
    log_design_prob: Option<f64>,
}

impl SurveyData {
    pub fn new(population: usize, responses: BTreeMap<usize, u8>) -> Result<Self> {
        if population == 0 {
            return Err(Error::InvalidSurvey("population size must be positive".into()));
        }
        if responses.is_empty() {
            return Err(Error::InvalidSurvey("the sample must contain at least one unit".into()));
        }
        for (&j, &y) in &responses {
            if j == 0 || j > population {
                return Err(Error::InvalidSurvey(format!(
                    "unit {j} outside 1..={population}"
                )));
            }
            if y > 1 {
                return Err(Error::InvalidSurvey(format!("unit {j} has non-binary outcome {y}")));
            }
        }
        Ok(Self { population, responses, log_design_prob: None })
    }

    /// Builds the data from a sample list and `(unit, outcome)` pairs, rejecting
    /// duplicate units and outcomes for units outside the sample.
    pub fn from_parts(population: usize, sample: &[usize], outcomes: &[(usize, u8)]) -> Result<Self> {
        let mut units = BTreeSet::new();
        for &j in sample {
            if !units.insert(j) {
                return Err(Error::InvalidSurvey(format!("duplicate unit {j} in sample")));
            }
        }
        let mut responses = BTreeMap::new();
        for &(j, y) in outcomes {
            if !units.contains(&j) {
                return Err(Error::InvalidSurvey(format!("outcome for unit {j} which is not in the sample")));
            }
            if responses.insert(j, y).is_some() {
                return Err(Error::InvalidSurvey(format!("unit {j} has more than one outcome")));
            }
        }
        if let Some(missing) = units.iter().find(|j| !responses.contains_key(j)) {
            return Err(Error::InvalidSurvey(format!("sampled unit {missing} has no outcome")));
        }
        Self::new(population, responses)
    }

    pub fn with_log_design_prob(mut self, log_p: f64) -> Result<Self> {
        if log_p.is_nan() || log_p > 0.0 {
            return Err(domain("log design probability", log_p));
        }
        self.log_design_prob = Some(log_p);
        Ok(self)
    }

    /// `B`
    pub fn population(&self) -> usize {
        self.population
    }

    /// `|J|`
    pub fn sample_size(&self) -> usize {
        self.responses.len()
    }

    /// `S = Σ_{j∈J} Y_j`
    pub fn successes(&self) -> usize {
        self.responses.values().map(|&y| usize::from(y)).sum()
    }

    pub fn sample(&self) -> impl Iterator<Item = usize> + '_ {
        self.responses.keys().copied()
    }

    pub fn responses(&self) -> &BTreeMap<usize, u8> {
        &self.responses
    }

    pub fn response(&self, unit: usize) -> Option<u8> {
        self.responses.get(&unit).copied()
    }

    /// `ln π_J`, recorded for reference only; no estimator reads it.
    pub fn log_design_prob(&self) -> Option<f64> {
        self.log_design_prob
    }
}

/// On-disk form of [`SurveyData`].
///
/// ```json
/// {
///   "population": 1000,
///   "sample": [4, 17, 230],
///   "outcomes": [{"unit": 4, "y": 0}, {"unit": 17, "y": 1}, {"unit": 230, "y": 0}],
///   "log_design_prob": -14.2
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyRecord {
    pub population: usize,
    pub sample: Vec<usize>,
    pub outcomes: Vec<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_design_prob: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub unit: usize,
    pub y: u8,
}

impl TryFrom<SurveyRecord> for SurveyData {
    type Error = Error;

    fn try_from(rec: SurveyRecord) -> Result<Self> {
        let pairs: Vec<(usize, u8)> = rec.outcomes.iter().map(|o| (o.unit, o.y)).collect();
        let data = SurveyData::from_parts(rec.population, &rec.sample, &pairs)?;
        match rec.log_design_prob {
            Some(lp) => data.with_log_design_prob(lp),
            None => Ok(data),
        }
    }
}

impl From<&SurveyData> for SurveyRecord {
    fn from(data: &SurveyData) -> Self {
        SurveyRecord {
            population: data.population,
            sample: data.sample().collect(),
            outcomes: data.responses.iter().map(|(&unit, &y)| Outcome { unit, y }).collect(),
            log_design_prob: data.log_design_prob,
        }
    }
}

/// The unit-level probabilities `θ_1..θ_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidSurvey("theta vector is empty".into()));
        }
        if let Some(&bad) = theta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(domain("unit probability theta", bad));
        }
        Ok(Self(theta))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `θ_j` for a 1-based unit index.
    pub fn get(&self, unit: usize) -> Option<f64> {
        unit.checked_sub(1).and_then(|i| self.0.get(i)).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `ψ_B = Σ θ_j / B`
    pub fn psi_b(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Mean of `θ_j` over the given units.
    pub fn mean_over(&self, units: &[usize]) -> Result<f64> {
        if units.is_empty() {
            return Err(Error::InvalidSurvey("empty unit set".into()));
        }
        let mut total = 0.0;
        for &j in units {
            total += self.get(j).ok_or_else(|| Error::InvalidSurvey(format!("unit {j} out of range")))?;
        }
        Ok(total / units.len() as f64)
    }
}

impl TryFrom<Vec<f64>> for ThetaVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThetaVector> for Vec<f64> {
    fn from(t: ThetaVector) -> Self {
        t.0
    }
}

fn check_proper(data: &SurveyData, hp: &HyperPrior) -> Result<()> {
    let s = data.successes();
    let n = data.sample_size();
    if hp.is_improper() && (s == 0 || s == n) {
        return Err(Error::ImproperPosterior { successes: s, sample_size: n });
    }
    Ok(())
}

/// Posterior of `ψ` is Beta(`S + α₀`, `|J| − S + β₀`).
pub fn psi_posterior_params(data: &SurveyData, hp: &HyperPrior) -> Result<(f64, f64)> {
    check_proper(data, hp)?;
    let (a0, b0) = hp.shape0();
    let s = data.successes() as f64;
    let n = data.sample_size() as f64;
    Ok((s + a0, n - s + b0))
}

/// `ψ̂ = (S + α₀) / (|J| + α₀ + β₀)`; `S/|J|` under the improper limit.
pub fn psi_hat(data: &SurveyData, hp: &HyperPrior) -> Result<f64> {
    check_proper(data, hp)?;
    match hp.psi {
        PsiPrior::ImproperLimit => Ok(ht_estimator(data)),
        PsiPrior::Beta { alpha0, beta0 } => {
            let s = data.successes() as f64;
            let n = data.sample_size() as f64;
            Ok((s + alpha0) / (n + alpha0 + beta0))
        }
    }
}

/// Horvitz–Thompson estimate `S / |J|`.
pub fn ht_estimator(data: &SurveyData) -> f64 {
    data.successes() as f64 / data.sample_size() as f64
}

/// `E(θ_j | Y, J)` for a 1-based unit `j`.
pub fn posterior_theta_mean(unit: usize, data: &SurveyData, hp: &HyperPrior) -> Result<f64> {
    if unit == 0 || unit > data.population {
        return Err(Error::InvalidSurvey(format!(
            "unit {unit} outside 1..={}",
            data.population
        )));
    }
    let hat = psi_hat(data, hp)?;
    Ok(match data.response(unit) {
        None => hat,
        Some(y) => hat + (f64::from(y) - hat) / 2.0,
    })
}

/// Bayes estimate of `ψ_B`: `ψ̂ + (|J|/B)(ψ̂_HT − ψ̂)/2`.
pub fn bayes_psi_b(data: &SurveyData, hp: &HyperPrior) -> Result<f64> {
    let hat = psi_hat(data, hp)?;
    let ht = ht_estimator(data);
    let frac = data.sample_size() as f64 / data.population as f64;
    Ok(hat + frac * (ht - hat) / 2.0)
}

/// Envelope on `|bayes_psi_b − psi_hat|`: `α₀/(2B) + (α₀+β₀)/(2B)`.
pub fn correction_bound(hp: &HyperPrior, population: usize) -> f64 {
    let (a0, b0) = hp.shape0();
    let b = population as f64;
    a0 / (2.0 * b) + (a0 + b0) / (2.0 * b)
}

/// Variance of `S/|J|` given the sample and fixed `θ`: `Σ_J θ_j(1−θ_j) / |J|²`.
pub fn ht_variance(theta: &ThetaVector, units: &[usize]) -> Result<f64> {
    if units.is_empty() {
        return Err(Error::InvalidSurvey("empty sample".into()));
    }
    let mut total = 0.0;
    for &j in units {
        let t = theta
            .get(j)
            .ok_or_else(|| Error::InvalidSurvey(format!("unit {j} out of range")))?;
        total += t * (1.0 - t);
    }
    let n = units.len() as f64;
    Ok(total / (n * n))
}

/// `ln C(B, n)`
fn ln_binomial(b: usize, n: usize) -> f64 {
    let m = n.min(b - n);
    (1..=m).map(|i| ((b - m + i) as f64 / i as f64).ln()).sum()
}

/// Simple random sample of `sample_size` units without replacement, then one
/// Bernoulli(`θ_j`) outcome per sampled unit.
pub fn simulate_survey<R: Rng + ?Sized>(
    rng: &mut R,
    theta: &ThetaVector,
    sample_size: usize,
) -> Result<SurveyData> {
    let b = theta.len();
    if sample_size == 0 || sample_size > b {
        return Err(Error::InvalidSurvey(format!(
            "sample size {sample_size} must lie in 1..={b}"
        )));
    }
    let mut units: Vec<usize> = rand::seq::index::sample(rng, b, sample_size)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    units.sort_unstable();
    observe(rng, theta, &units)?.with_log_design_prob(-ln_binomial(b, sample_size))
}

/// Draws outcomes for a fixed set of sampled units.
pub fn observe<R: Rng + ?Sized>(rng: &mut R, theta: &ThetaVector, units: &[usize]) -> Result<SurveyData> {
    let mut responses = BTreeMap::new();
    for &j in units {
        let t = theta
            .get(j)
            .ok_or_else(|| Error::InvalidSurvey(format!("unit {j} out of range")))?;
        if responses.insert(j, draw_bernoulli(rng, t)?).is_some() {
            return Err(Error::InvalidSurvey(format!("duplicate unit {j} in sample")));
        }
    }
    SurveyData::new(theta.len(), responses)
}

/// `B` iid Beta draws with the given mean and variance.
pub fn simulate_hierarchical<R: Rng + ?Sized>(
    rng: &mut R,
    population: usize,
    mv: &BetaMeanVar,
) -> Result<ThetaVector> {
    let (alpha, beta) = beta_from_mean_var(mv);
    let dist = Beta::new(alpha, beta).map_err(|_| domain("Beta shape", alpha.min(beta)))?;
    ThetaVector::new((0..population).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Seed;

    fn data(b: usize, n: usize, s: usize) -> SurveyData {
        let responses = (1..=n).map(|j| (j, u8::from(j <= s))).collect();
        SurveyData::new(b, responses).unwrap()
    }

    #[test]
    fn mean_var_validation() {
        assert!(BetaMeanVar::new(0.0, 0.01).is_err());
        assert!(BetaMeanVar::new(1.0, 0.01).is_err());
        assert!(BetaMeanVar::new(0.5, 0.25).is_err());
        assert!(BetaMeanVar::new(0.5, 0.0).is_err());
        assert!(BetaMeanVar::new(0.5, 0.2499).is_ok());
    }

    #[test]
    fn beta_shape_examples() {
        let (a, b) = beta_from_mean_var(&BetaMeanVar::new(0.5, 1.0 / 12.0).unwrap());
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        let (a, b) = beta_from_mean_var(&BetaMeanVar::new(0.3, 0.01).unwrap());
        assert!((a - 6.0).abs() < 1e-12 && (b - 14.0).abs() < 1e-12);
    }

    #[test]
    fn beta_shape_round_trip() {
        for &(psi, frac) in &[(0.1, 0.5), (0.3, 0.01), (0.77, 0.9), (0.5, 0.333)] {
            let mv = BetaMeanVar::new(psi, frac * psi * (1.0 - psi)).unwrap();
            let (a, b) = beta_from_mean_var(&mv);
            let back = mean_var_from_beta(a, b).unwrap();
            assert!((back.psi() - mv.psi()).abs() < 1e-12);
            assert!((back.eta() - mv.eta()).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_outcome_probabilities() {
        let mv = BetaMeanVar::new(0.7, 0.05).unwrap();
        assert_eq!(marginal_y_given_hyper(1, &mv).unwrap(), 0.7);
        assert!((marginal_y_given_hyper(0, &mv).unwrap() - 0.3).abs() < 1e-15);
        assert!(marginal_y_given_hyper(2, &mv).is_err());
    }

    #[test]
    fn survey_data_validation() {
        assert!(SurveyData::new(10, BTreeMap::new()).is_err());
        assert!(SurveyData::new(3, [(4, 1)].into_iter().collect()).is_err());
        assert!(SurveyData::new(3, [(0, 1)].into_iter().collect()).is_err());
        assert!(SurveyData::new(3, [(1, 2)].into_iter().collect()).is_err());
        assert!(SurveyData::from_parts(5, &[1, 2, 2], &[(1, 0), (2, 1)]).is_err());
        assert!(SurveyData::from_parts(5, &[1, 2], &[(1, 0), (3, 1)]).is_err());
        assert!(SurveyData::from_parts(5, &[1, 2], &[(1, 0)]).is_err());
        assert!(SurveyData::from_parts(5, &[1, 2], &[(1, 0), (2, 1), (2, 0)]).is_err());
        let d = SurveyData::from_parts(5, &[4, 2], &[(2, 1), (4, 1)]).unwrap();
        assert_eq!(d.successes(), 2);
        assert_eq!(d.sample().collect::<Vec<_>>(), vec![2, 4]);
    }

    #[test]
    fn record_round_trip() {
        let d = data(40, 6, 2).with_log_design_prob(-3.5).unwrap();
        let json = serde_json::to_string(&SurveyRecord::from(&d)).unwrap();
        let back: SurveyRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(SurveyData::try_from(back).unwrap(), d);
        let bad = r#"{"population": 5, "sample": [1], "outcomes": [{"unit": 1, "y": 1}], "extra": 1}"#;
        assert!(serde_json::from_str::<SurveyRecord>(bad).is_err());
    }

    #[test]
    fn psi_posterior_examples() {
        let hp = HyperPrior::beta(1.0, 1.0).unwrap();
        assert_eq!(psi_posterior_params(&data(10, 1, 0), &hp).unwrap(), (1.0, 2.0));
        let d = data(100, 10, 3);
        let (a, b) = psi_posterior_params(&d, &hp).unwrap();
        assert_eq!(a / (a + b), psi_hat(&d, &hp).unwrap());
    }

    #[test]
    fn psi_hat_examples() {
        let d = data(100, 10, 3);
        let hp = HyperPrior::beta(1.0, 1.0).unwrap();
        assert!((psi_hat(&d, &hp).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(psi_hat(&d, &HyperPrior::improper_limit()).unwrap(), 0.3);
        let mut prev = psi_hat(&d, &hp).unwrap();
        for &c in &[2.0, 5.0, 20.0, 100.0, 1e4] {
            let v = psi_hat(&d, &HyperPrior::beta(c, c).unwrap()).unwrap();
            assert!(v > prev && v < 0.5);
            prev = v;
        }
    }

    #[test]
    fn improper_limit_needs_mixed_outcomes() {
        let hp = HyperPrior::improper_limit();
        assert!(matches!(psi_hat(&data(10, 4, 0), &hp), Err(Error::ImproperPosterior { .. })));
        assert!(matches!(psi_hat(&data(10, 4, 4), &hp), Err(Error::ImproperPosterior { .. })));
        assert!(psi_hat(&data(10, 4, 1), &hp).is_ok());
    }

    #[test]
    fn ht_examples() {
        assert_eq!(ht_estimator(&data(20, 10, 0)), 0.0);
        assert_eq!(ht_estimator(&data(20, 10, 10)), 1.0);
        assert_eq!(ht_estimator(&data(20, 10, 5)), 0.5);
    }

    #[test]
    fn posterior_theta_mean_cases() {
        let d = SurveyData::from_parts(30, &[3, 9, 12], &[(3, 1), (9, 0), (12, 1)]).unwrap();
        let hp = HyperPrior::beta(2.0, 0.5).unwrap();
        let hat = psi_hat(&d, &hp).unwrap();
        assert_eq!(posterior_theta_mean(1, &d, &hp).unwrap(), hat);
        assert!((posterior_theta_mean(3, &d, &hp).unwrap() - (1.0 + hat) / 2.0).abs() < 1e-15);
        assert!((posterior_theta_mean(9, &d, &hp).unwrap() - hat / 2.0).abs() < 1e-15);
        assert!(posterior_theta_mean(0, &d, &hp).is_err());
        assert!(posterior_theta_mean(31, &d, &hp).is_err());
    }

    #[test]
    fn bayes_psi_b_examples() {
        let hp = HyperPrior::beta(1.0, 1.0).unwrap();
        let d = data(1000, 10, 3);
        let v = bayes_psi_b(&d, &hp).unwrap();
        let want = 1.0 / 3.0 + 0.01 * (0.3 - 1.0 / 3.0) / 2.0;
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.333_166_666).abs() < 1e-9);

        let census = data(8, 8, 3);
        let imp = HyperPrior::improper_limit();
        assert_eq!(bayes_psi_b(&census, &imp).unwrap(), ht_estimator(&census));
        assert_eq!(bayes_psi_b(&d, &imp).unwrap(), ht_estimator(&d));
    }

    #[test]
    fn bayes_psi_b_is_average_of_unit_means() {
        let hp = HyperPrior::beta(0.7, 3.0).unwrap();
        for &(b, n, s) in &[(12, 5, 2), (50, 10, 9), (7, 7, 1), (200, 1, 0)] {
            let d = data(b, n, s);
            let avg = (1..=b).map(|j| posterior_theta_mean(j, &d, &hp).unwrap()).sum::<f64>() / b as f64;
            assert!((avg - bayes_psi_b(&d, &hp).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn correction_bound_examples() {
        let hp = HyperPrior::beta(1.0, 1.0).unwrap();
        assert!((correction_bound(&hp, 100) - 0.015).abs() < 1e-16);
        let ratio = correction_bound(&hp, 1000) / correction_bound(&hp, 10_000);
        assert!((ratio - 10.0).abs() < 1e-12);
        assert_eq!(correction_bound(&HyperPrior::improper_limit(), 10), 0.0);
    }

    #[test]
    fn ht_variance_examples() {
        let half = ThetaVector::new(vec![0.5; 20]).unwrap();
        let units: Vec<usize> = (1..=10).collect();
        assert!((ht_variance(&half, &units).unwrap() - 0.025).abs() < 1e-16);
        let binary = ThetaVector::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(ht_variance(&binary, &[1, 2, 3, 4]).unwrap(), 0.0);
        assert!(ht_variance(&half, &[]).is_err());
        assert!(ht_variance(&half, &[21]).is_err());
    }

    #[test]
    fn simulate_survey_census_and_degenerate() {
        let theta = ThetaVector::new(vec![0.0; 15]).unwrap();
        let mut rng = Seed(4).stream(0);
        let d = simulate_survey(&mut rng, &theta, 15).unwrap();
        assert_eq!(d.sample().collect::<Vec<_>>(), (1..=15).collect::<Vec<_>>());
        assert_eq!(d.successes(), 0);
        assert_eq!(d.log_design_prob(), Some(0.0));
        assert!(simulate_survey(&mut rng, &theta, 16).is_err());
        assert!(simulate_survey(&mut rng, &theta, 0).is_err());
    }

    #[test]
    fn simulate_survey_replays() {
        let theta = ThetaVector::new((0..100).map(|i| f64::from(i) / 100.0).collect()).unwrap();
        let a = simulate_survey(&mut Seed(8).stream(1), &theta, 12).unwrap();
        let b = simulate_survey(&mut Seed(8).stream(1), &theta, 12).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample_size(), 12);
    }

    #[test]
    fn marginal_outcome_frequency_matches_psi() {
        // θ ~ Beta(ψ, η), Y ~ Bernoulli(θ): P(Y = 1) = ψ
        let mv = BetaMeanVar::new(0.3, 0.05).unwrap();
        let reps = 100_000u64;
        let mut hits = 0u64;
        for r in 0..reps {
            let mut rng = Seed(21).stream(r);
            let theta = simulate_hierarchical(&mut rng, 1, &mv).unwrap();
            hits += u64::from(simulate_survey(&mut rng, &theta, 1).unwrap().successes() as u8);
        }
        let freq = hits as f64 / reps as f64;
        let psi = marginal_y_given_hyper(1, &mv).unwrap();
        let se = (psi * (1.0 - psi) / reps as f64).sqrt();
        assert!((freq - psi).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn hierarchical_draws() {
        let mid = BetaMeanVar::new(0.5, 0.125).unwrap();
        let theta = simulate_hierarchical(&mut Seed(3).stream(0), 100_000, &mid).unwrap();
        let se = (0.125f64 / 1e5).sqrt();
        assert!((theta.psi_b() - 0.5).abs() < 3.0 * se);
        let again = simulate_hierarchical(&mut Seed(3).stream(0), 100_000, &mid).unwrap();
        assert_eq!(theta, again);
    }

    #[test]
    fn uniform_special_case_passes_ks() {
        let uniform = BetaMeanVar::new(0.5, 1.0 / 12.0).unwrap();
        let n = 20_000;
        let theta = simulate_hierarchical(&mut Seed(17).stream(0), n, &uniform).unwrap();
        let mut xs = theta.as_slice().to_vec();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let hi = (i + 1) as f64 / n as f64 - x;
                let lo = x - i as f64 / n as f64;
                hi.max(lo)
            })
            .fold(0.0, f64::max);
        // 5% critical value of the one-sample KS statistic
        let crit = 1.358 / (n as f64).sqrt();
        assert!(d < crit, "KS D = {d}, critical {crit}");
    }
}
