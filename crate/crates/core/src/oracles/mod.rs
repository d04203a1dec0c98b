//! Brute-force references for the closed forms.
//!
//! These are deliberately slow. The quadrature oracles integrate the model's
//! unreduced densities numerically; the Monte Carlo oracles simulate datasets
//! and count. None of them evaluates the closed-form expression it is used to
//! check.

mod monte_carlo;
mod quadrature;

pub use monte_carlo::{
    mc_estimator_oracle, mc_ht_fixed_design, mc_log_bf_samples, mc_tail_oracle, EstimatorError, EstimatorSummary,
    HtDesignSummary, TailEstimate,
};
pub use quadrature::{QuadratureScheme, QuadratureSpec};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::ln_beta;
use crate::oneway::{OneWayConfig, OneWaySufficient};
use crate::survey::{beta_from_mean_var, BetaMeanVar, HyperPrior, PsiPrior, SurveyData};

use quadrature::{interval_rule, log_sum_exp, unit_rule};

const ONEWAY_MAX_GROUPS: usize = 6;
const ONEWAY_MAX_GROUP_SIZE: u32 = 10;
const SURVEY_MAX_POPULATION: usize = 50;
const SURVEY_MAX_SAMPLE: usize = 10;

/// Posterior standard deviations covered on each side of the mode.
const MU_HALF_WIDTH_SDS: f64 = 12.0;

/// `log f₁(x)` by numerical integration over each group mean.
///
/// For group `i` the integrand is the `N(μ, 1)` likelihood of that group's
/// observations times the `N(0, τ²)` prior density of `μ`; groups are
/// independent so the log marginal is a sum over groups. Each integral is taken
/// over the mode ± 12 posterior standard deviations.
pub fn oneway_marginal_oracle(
    data: &OneWaySufficient,
    cfg: &OneWayConfig,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if cfg.k() > ONEWAY_MAX_GROUPS || cfg.group_sizes().iter().any(|&n| n > ONEWAY_MAX_GROUP_SIZE) {
        return Err(Error::ScaleExceeded(format!(
            "one-way oracle handles k <= {ONEWAY_MAX_GROUPS} and n_i <= {ONEWAY_MAX_GROUP_SIZE}"
        )));
    }
    if data.group_sums.len() != cfg.k() {
        return Err(Error::LengthMismatch { expected: cfg.k(), actual: data.group_sums.len() });
    }
    let n_total = cfg.total_observations() as f64;
    // Π_ij φ(x_ij − μ_i) = (2π)^{-N/2} exp(−½Σx²) · Π_i exp(μ_i T_i − n_i μ_i²/2)
    let base = -0.5 * n_total * (2.0 * PI).ln() - 0.5 * data.sum_sq;
    let tau2 = cfg.tau2();
    if tau2 == 0.0 {
        return Ok(base);
    }
    let mut total = base;
    for (&n, &t) in cfg.group_sizes().iter().zip(&data.group_sums) {
        let n = f64::from(n);
        let log_integrand = |mu: f64| {
            mu * t - 0.5 * n * mu * mu - 0.5 * mu * mu / tau2 - 0.5 * (2.0 * PI * tau2).ln()
        };
        let precision = n + 1.0 / tau2;
        let mode = t / precision;
        let half = MU_HALF_WIDTH_SDS / precision.sqrt();
        let terms: Vec<f64> = interval_rule(spec, mode - half, mode + half)
            .into_iter()
            .map(|(mu, w)| w.ln() + log_integrand(mu))
            .collect();
        total += log_sum_exp(&terms);
    }
    Ok(total)
}

/// Posterior means of `θ_j` by category, from one pass of 2-D quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitMeansOracle {
    /// `j ∉ J`
    pub unsampled: f64,
    /// `j ∈ J` with `Y_j = 0`
    pub failure: f64,
    /// `j ∈ J` with `Y_j = 1`
    pub success: f64,
}

/// Posterior density grid over `(ψ, u)` with `η = u·ψ(1−ψ)`.
///
/// Weights are built from the unreduced joint law: the `Beta(α, β)` prior of
/// each sampled `θ_j` is integrated out analytically per coordinate as
/// `B(α + Y_j, β + 1 − Y_j) / B(α, β)`, then multiplied by `h(η|ψ)h₀(ψ)` and
/// the Jacobian of the substitution.
struct PosteriorGrid {
    nodes: Vec<(f64, f64, f64, f64)>, // (ψ, 1−ψ, η, normalized weight)
}

fn ln_psi_prior(hp: &HyperPrior, psi: f64, psi_c: f64) -> Result<f64> {
    Ok(match hp.psi_prior() {
        PsiPrior::Beta { alpha0, beta0 } => {
            (alpha0 - 1.0) * psi.ln() + (beta0 - 1.0) * psi_c.ln() - ln_beta(alpha0, beta0)?
        }
        PsiPrior::ImproperLimit => -psi.ln() - psi_c.ln(),
    })
}

fn check_survey_scale(data: &SurveyData) -> Result<()> {
    if data.population() > SURVEY_MAX_POPULATION || data.sample_size() > SURVEY_MAX_SAMPLE {
        return Err(Error::ScaleExceeded(format!(
            "survey oracle handles B <= {SURVEY_MAX_POPULATION} and |J| <= {SURVEY_MAX_SAMPLE}"
        )));
    }
    Ok(())
}

impl PosteriorGrid {
    fn build(data: &SurveyData, hp: &HyperPrior, spec: &QuadratureSpec) -> Result<Self> {
        let s = data.successes();
        let n = data.sample_size();
        if hp.is_improper() && (s == 0 || s == n) {
            return Err(Error::ImproperPosterior { successes: s, sample_size: n });
        }
        let psi_rule = unit_rule(spec);
        let eta_spec = QuadratureSpec::new(spec.points().clamp(17, 64), QuadratureScheme::GaussLegendre)?;
        let u_rule = unit_rule(&eta_spec);

        let mut raw = Vec::with_capacity(psi_rule.len() * u_rule.len());
        for p in &psi_rule {
            let (psi, psi_c) = (p.x, p.xc);
            let ln_h0 = ln_psi_prior(hp, psi, psi_c)?;
            for u in &u_rule {
                let eta = u.x * psi * psi_c;
                // α + β = ψ(1−ψ)/η − 1
                let total = u.xc / u.x;
                let (alpha, beta) = (total * psi, total * psi_c);
                let mut ln_lik = 0.0;
                let base = ln_beta(alpha, beta)?;
                for &y in data.responses().values() {
                    let (a, b) = if y == 1 { (alpha + 1.0, beta) } else { (alpha, beta + 1.0) };
                    ln_lik += ln_beta(a, b)? - base;
                }
                // h(η|ψ) = 1/(ψ(1−ψ)) on the feasible interval; dη/du = ψ(1−ψ)
                let ln_h_eta = -(psi * psi_c).ln();
                let ln_jac = (psi * psi_c).ln();
                let lw = p.w.ln() + u.w.ln() + ln_lik + ln_h_eta + ln_jac + ln_h0;
                raw.push((psi, psi_c, eta, lw));
            }
        }
        let logs: Vec<f64> = raw.iter().map(|r| r.3).collect();
        let norm = log_sum_exp(&logs);
        if !norm.is_finite() {
            return Err(Error::InvalidConfig("posterior grid has no mass".into()));
        }
        let nodes = raw.into_iter().map(|(a, b, c, lw)| (a, b, c, (lw - norm).exp())).collect();
        Ok(Self { nodes })
    }

    fn expect(&self, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(psi, psi_c, eta, w)| w * g(psi, psi_c, eta)).sum()
    }
}

fn inner_mean(y: Option<u8>) -> impl Fn(f64, f64, f64) -> f64 {
    move |psi, psi_c, eta| match y {
        None => psi,
        Some(y) => psi - eta / psi_c + f64::from(y) * eta / (psi * psi_c),
    }
}

/// `E(θ_j | Y, J)` for each unit category by 2-D quadrature over `(ψ, η)`.
pub fn survey_unit_means_oracle(
    data: &SurveyData,
    hp: &HyperPrior,
    spec: &QuadratureSpec,
) -> Result<UnitMeansOracle> {
    check_survey_scale(data)?;
    let grid = PosteriorGrid::build(data, hp, spec)?;
    Ok(UnitMeansOracle {
        unsampled: grid.expect(inner_mean(None)),
        failure: grid.expect(inner_mean(Some(0))),
        success: grid.expect(inner_mean(Some(1))),
    })
}

/// `E(θ_j | Y, J)` for a single 1-based unit.
pub fn survey_posterior_oracle(
    unit: usize,
    data: &SurveyData,
    hp: &HyperPrior,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if unit == 0 || unit > data.population() {
        return Err(Error::InvalidSurvey(format!("unit {unit} outside 1..={}", data.population())));
    }
    check_survey_scale(data)?;
    let grid = PosteriorGrid::build(data, hp, spec)?;
    Ok(grid.expect(inner_mean(data.response(unit))))
}

/// `E(ψ_B | Y, J)` as the average of per-unit quadrature means.
pub fn survey_psi_b_oracle(data: &SurveyData, hp: &HyperPrior, spec: &QuadratureSpec) -> Result<f64> {
    let m = survey_unit_means_oracle(data, hp, spec)?;
    let total: f64 = (1..=data.population())
        .map(|j| match data.response(j) {
            None => m.unsampled,
            Some(0) => m.failure,
            Some(_) => m.success,
        })
        .sum();
    Ok(total / data.population() as f64)
}

/// `∫ g(θ) Beta(θ; α, β) dθ` by tanh-sinh quadrature, split at the mean.
///
/// The left piece is integrated in `s = θ^α` and the right piece in
/// `s = (1−θ)^β`, which absorbs the endpoint singularities of small shapes.
/// `g` receives `(θ, 1−θ)`.
pub fn beta_expectation_oracle(
    mv: &BetaMeanVar,
    spec: &QuadratureSpec,
    g: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let (alpha, beta) = beta_from_mean_var(mv);
    let ln_norm = ln_beta(alpha, beta)?;
    let split = mv.psi();
    let ts = QuadratureSpec::new(spec.points(), QuadratureScheme::TanhSinh)?;
    let rule = unit_rule(&ts);
    let left_end = split.powf(alpha);
    let right_end = (1.0 - split).powf(beta);
    let mut total = 0.0;
    for n in &rule {
        // θ^{α−1} dθ = ds / α
        let t = (left_end * n.x).powf(1.0 / alpha);
        let tc = 1.0 - t;
        total += left_end * n.w * ((beta - 1.0) * tc.ln() - ln_norm).exp() / alpha * g(t, tc);
        // (1−θ)^{β−1} dθ = ds / β
        let tc = (right_end * n.x).powf(1.0 / beta);
        let t = 1.0 - tc;
        total += right_end * n.w * ((alpha - 1.0) * t.ln() - ln_norm).exp() / beta * g(t, tc);
    }
    Ok(total)
}

/// Posterior mean of `ψ` by 1-D quadrature of `ψ^S (1−ψ)^{|J|−S} h₀(ψ)`.
pub fn psi_posterior_mean_oracle(data: &SurveyData, hp: &HyperPrior, spec: &QuadratureSpec) -> Result<f64> {
    let s = data.successes();
    let n = data.sample_size();
    if hp.is_improper() && (s == 0 || s == n) {
        return Err(Error::ImproperPosterior { successes: s, sample_size: n });
    }
    let (s, f) = (s as f64, (n - data.successes()) as f64);
    let mut logs = Vec::new();
    let mut psis = Vec::new();
    for p in unit_rule(spec) {
        logs.push(p.w.ln() + s * p.x.ln() + f * p.xc.ln() + ln_psi_prior(hp, p.x, p.xc)?);
        psis.push(p.x);
    }
    let norm = log_sum_exp(&logs);
    Ok(logs.iter().zip(&psis).map(|(lw, psi)| (lw - norm).exp() * psi).sum())
}

/// Posterior mean and variance of `ψ` from the unreduced joint law.
///
/// Each sampled `θ_j` is integrated out by its own 1-D quadrature against
/// `Beta(θ_j; ψ, η)`; the outer integral runs over `(ψ, u)` with
/// `η = u·ψ(1−ψ)`. Cost grows as `points_ψ × points_u × |J| × points_θ`, so
/// samples are limited to `|J| ≤ 3`.
pub fn psi_posterior_moments_oracle(
    data: &SurveyData,
    hp: &HyperPrior,
    psi_spec: &QuadratureSpec,
    u_spec: &QuadratureSpec,
    theta_spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    if data.sample_size() > 3 {
        return Err(Error::ScaleExceeded("per-coordinate oracle handles |J| <= 3".into()));
    }
    let s = data.successes();
    let n = data.sample_size();
    if hp.is_improper() && (s == 0 || s == n) {
        return Err(Error::ImproperPosterior { successes: s, sample_size: n });
    }
    let u_rule = unit_rule(u_spec);
    let mut psis = Vec::new();
    let mut logs = Vec::new();
    // nodes within 1e-10 of either end carry negligible weight and defeat the θ rule
    for p in unit_rule(psi_spec).into_iter().filter(|p| p.x > 1e-10 && p.xc > 1e-10) {
        let ln_h0 = ln_psi_prior(hp, p.x, p.xc)?;
        for u in &u_rule {
            let mv = BetaMeanVar::new(p.x, u.x * p.x * p.xc)?;
            let mut ln_lik = 0.0;
            for &y in data.responses().values() {
                let m = beta_expectation_oracle(&mv, theta_spec, |t, tc| if y == 1 { t } else { tc })?;
                ln_lik += m.ln();
            }
            // h(η|ψ)·dη/du = 1
            logs.push(p.w.ln() + u.w.ln() + ln_lik + ln_h0);
            psis.push(p.x);
        }
    }
    let norm = log_sum_exp(&logs);
    let (mut m1, mut m2) = (0.0, 0.0);
    for (lw, psi) in logs.iter().zip(&psis) {
        let w = (lw - norm).exp();
        m1 += w * psi;
        m2 += w * psi * psi;
    }
    Ok((m1, m2 - m1 * m1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oneway::ModelPrior;

    fn gl(points: usize) -> QuadratureSpec {
        QuadratureSpec::new(points, QuadratureScheme::GaussLegendre).unwrap()
    }

    fn ts(points: usize) -> QuadratureSpec {
        QuadratureSpec::new(points, QuadratureScheme::TanhSinh).unwrap()
    }

    #[test]
    fn oneway_oracle_single_observation() {
        let cfg = OneWayConfig::balanced(1, 1, 1.0).unwrap();
        let data = OneWaySufficient { group_sums: vec![0.0], sum_sq: 0.0 };
        let v = oneway_marginal_oracle(&data, &cfg, &gl(64)).unwrap();
        assert!((v + 0.5 * (4.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn oneway_oracle_zero_prior_is_model2() {
        let cfg = OneWayConfig::new(vec![2, 3], 0.0, ModelPrior::even()).unwrap();
        let data = OneWaySufficient { group_sums: vec![1.0, 2.0], sum_sq: 4.0 };
        let v = oneway_marginal_oracle(&data, &cfg, &gl(64)).unwrap();
        assert!((v - (-2.5 * (2.0 * PI).ln() - 2.0)).abs() < 1e-13);
    }

    #[test]
    fn oneway_oracle_scale_limits() {
        let cfg = OneWayConfig::balanced(7, 2, 1.0).unwrap();
        let data = OneWaySufficient { group_sums: vec![0.0; 7], sum_sq: 0.0 };
        assert!(matches!(
            oneway_marginal_oracle(&data, &cfg, &gl(64)),
            Err(Error::ScaleExceeded(_))
        ));
        let cfg = OneWayConfig::balanced(2, 11, 1.0).unwrap();
        let data = OneWaySufficient { group_sums: vec![0.0; 2], sum_sq: 0.0 };
        assert!(oneway_marginal_oracle(&data, &cfg, &gl(64)).is_err());
    }

    #[test]
    fn oneway_oracle_self_converges() {
        let cfg = OneWayConfig::new(vec![1, 4, 10], 2.5, ModelPrior::even()).unwrap();
        let data = OneWaySufficient { group_sums: vec![1.3, -6.0, 14.0], sum_sq: 50.0 };
        let spec = gl(48);
        let a = oneway_marginal_oracle(&data, &cfg, &spec).unwrap();
        let b = oneway_marginal_oracle(&data, &cfg, &spec.refined()).unwrap();
        assert!((a - b).abs() < 1e-8);
        let simpson = QuadratureSpec::new(401, QuadratureScheme::Simpson).unwrap();
        let c = oneway_marginal_oracle(&data, &cfg, &simpson).unwrap();
        assert!((a - c).abs() < 1e-8);
    }

    #[test]
    fn uniform_eta_has_mean_half_feasible_width() {
        let data = SurveyData::from_parts(10, &[1, 2, 3], &[(1, 1), (2, 0), (3, 1)]).unwrap();
        let hp = HyperPrior::beta(1.5, 2.0).unwrap();
        let grid = PosteriorGrid::build(&data, &hp, &ts(101)).unwrap();
        // E[η − ψ(1−ψ)/2] = 0 under the conditional uniform
        let v = grid.expect(|psi, psi_c, eta| eta - psi * psi_c / 2.0);
        assert!(v.abs() < 1e-10, "{v}");
    }

    #[test]
    fn survey_oracle_scale_limits() {
        let big = SurveyData::from_parts(51, &[1], &[(1, 1)]).unwrap();
        let hp = HyperPrior::beta(1.0, 1.0).unwrap();
        assert!(survey_posterior_oracle(1, &big, &hp, &ts(101)).is_err());
    }

    #[test]
    fn beta_expectation_oracle_small_shapes() {
        // α ≈ 0.0094, β ≈ 0.18
        let mv = BetaMeanVar::new(0.05, 0.04).unwrap();
        let mass = beta_expectation_oracle(&mv, &ts(201), |_, _| 1.0).unwrap();
        let mean = beta_expectation_oracle(&mv, &ts(201), |t, _| t).unwrap();
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        assert!((mean - 0.05).abs() < 1e-10, "{mean}");
    }

    #[test]
    fn beta_expectation_oracle_moments() {
        let mv = BetaMeanVar::new(0.3, 0.01).unwrap();
        let spec = ts(201);
        let mass = beta_expectation_oracle(&mv, &spec, |_, _| 1.0).unwrap();
        let mean = beta_expectation_oracle(&mv, &spec, |t, _| t).unwrap();
        let var = beta_expectation_oracle(&mv, &spec, |t, _| (t - 0.3).powi(2)).unwrap();
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((mean - 0.3).abs() < 1e-10);
        assert!((var - 0.01).abs() < 1e-10);
    }
}
