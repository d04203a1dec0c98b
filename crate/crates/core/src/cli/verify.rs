use clap::ValueEnum;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::numerics::{draw_normal, Seed, SimRng};
use crate::oneway::{
    asymptotic_slope, critical_epsilon, log_bayes_factor, log_density_model2, log_marginal_density_model1,
    median_log_bf, posterior_prob_model2, tail_prob_log_bf, BalancedAsymptotics, EffectSpec,
    ModelPrior, OneWayConfig, OneWaySufficient,
};
use crate::oracles::{
    beta_expectation_oracle, mc_ht_fixed_design, mc_log_bf_samples, mc_tail_oracle, oneway_marginal_oracle,
    psi_posterior_mean_oracle, survey_unit_means_oracle, QuadratureScheme, QuadratureSpec,
};
use crate::survey::{
    bayes_psi_b, correction_bound, ht_estimator, ht_variance, marginal_y_given_hyper, posterior_theta_mean,
    psi_hat, simulate_hierarchical, BetaMeanVar, HyperPrior, SurveyData,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Oneway,
    Survey,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Level::Quick => quick,
            Level::Full => full,
        }
    }
}

/// Result of one named agreement check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Parameters of the instance with the largest deviation.
    pub worst_instance: String,
}

struct Check {
    suite: &'static str,
    name: &'static str,
    tolerance: f64,
    worst: f64,
    instance: String,
}

impl Check {
    fn new(suite: &'static str, name: &'static str, tolerance: f64) -> Self {
        Self { suite, name, tolerance, worst: 0.0, instance: String::from("-") }
    }

    fn observe(&mut self, deviation: f64, instance: impl FnOnce() -> String) {
        if deviation.is_nan() || deviation > self.worst {
            self.worst = if deviation.is_nan() { f64::INFINITY } else { deviation };
            self.instance = instance();
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            suite: self.suite,
            name: self.name,
            max_deviation: self.worst,
            tolerance: self.tolerance,
            passed: self.worst <= self.tolerance,
            worst_instance: self.instance,
        }
    }
}

/// Runs the selected suites. Domain errors from the library abort the run.
pub fn run_suites(suite: Suite, level: Level, seed: Seed) -> Result<Vec<CheckOutcome>, CliError> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Oneway | Suite::All) {
        out.extend(oneway_suite(level, seed)?);
    }
    if matches!(suite, Suite::Survey | Suite::All) {
        out.extend(survey_suite(level, seed)?);
    }
    Ok(out)
}

/// Independent root seed for one check.
fn sub_seed(seed: Seed, index: u64) -> Seed {
    Seed(seed.value() ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn log_uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn fuzz_oneway(rng: &mut SimRng) -> Result<(OneWayConfig, OneWaySufficient), CliError> {
    let k = rng.random_range(1..=5usize);
    let sizes: Vec<u32> = (0..k).map(|_| rng.random_range(1..=5)).collect();
    let tau2 = log_uniform(rng, 0.01, 10.0);
    let prior = ModelPrior::from_null(rng.random_range(0.05..0.95))?;
    let groups: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&n| {
            let mu = draw_normal(rng, 0.0, 1.0);
            (0..n).map(|_| draw_normal(rng, mu, 1.0)).collect()
        })
        .collect();
    let cfg = OneWayConfig::new(sizes, tau2, prior)?;
    Ok((cfg, OneWaySufficient::from_groups(&groups)))
}

fn oneway_suite(level: Level, seed: Seed) -> Result<Vec<CheckOutcome>, CliError> {
    const S: &str = "oneway";
    let mut out = Vec::new();

    let mut zero = Check::new(S, "log-f-zero-data", 1e-10);
    let cfg = OneWayConfig::balanced(5, 10, 1.0)?;
    let v = log_bayes_factor(&OneWaySufficient { group_sums: vec![0.0; 5], sum_sq: 0.0 }, &cfg)?;
    zero.observe((v - 5.994_738_181_995_5).abs(), || "k=5 n=10 tau2=1 T=0".into());
    let single = OneWayConfig::balanced(1, 1, 1.0)?;
    let v = log_bayes_factor(&OneWaySufficient { group_sums: vec![2.0], sum_sq: 4.0 }, &single)?;
    zero.observe((v + 0.653_426_409_720_027_3).abs(), || "k=1 n=1 tau2=1 T=2".into());
    out.push(zero.finish());

    let instances = level.pick(25, 100);
    let spec = QuadratureSpec::new(64, QuadratureScheme::GaussLegendre)?;
    let mut identity = Check::new(S, "log-f-equals-density-difference", 1e-10);
    let mut marginal = Check::new(S, "marginal-density-vs-quadrature", 1e-6);
    // quadrature error in f1 moves the direct posterior by about p(1−p)·1e-8
    let mut posterior = Check::new(S, "posterior-prob-vs-densities", 1e-8);
    let mut rng = seed.stream(1);
    for i in 0..instances {
        let (cfg, data) = fuzz_oneway(&mut rng)?;
        let describe = || format!("#{i} sizes={:?} tau2={} data={:?}", cfg.group_sizes(), cfg.tau2(), data);
        let log_f = log_bayes_factor(&data, &cfg)?;
        let f1 = log_marginal_density_model1(&data, &cfg)?;
        let f2 = log_density_model2(&data, &cfg)?;
        identity.observe((log_f - (f2 - f1)).abs(), describe);
        let oracle = oneway_marginal_oracle(&data, &cfg, &spec)?;
        marginal.observe((f1 - oracle).abs(), describe);
        let prior = cfg.model_prior();
        let direct = 1.0 / (1.0 + (prior.full().ln() + oracle - prior.null().ln() - f2).exp());
        posterior.observe((posterior_prob_model2(log_f, prior) - direct).abs(), describe);
    }
    out.extend([identity.finish(), marginal.finish(), posterior.finish()]);

    let (n, tau2, eps2) = (10, 1.0, 0.09);
    let asym = BalancedAsymptotics::new(n, tau2, eps2)?;
    let reps = level.pick(20_000, 100_000);
    let k = 50;
    let cfg = OneWayConfig::balanced(k, n, tau2)?;
    let eff = EffectSpec::IidNormal { epsilon2: eps2 };
    let ts = [0.1, 0.2, 0.3, 0.4, 0.5];
    let mut tail = Check::new(S, "tail-law-vs-monte-carlo (SE units)", 3.0);
    for est in mc_tail_oracle(sub_seed(seed, 2), &ts, &cfg, &eff, reps)? {
        let exact = tail_prob_log_bf(est.t, k as u32, &asym)?;
        let se = est.se.max(1.0 / reps as f64);
        tail.observe((exact - est.estimate).abs() / se, || {
            format!("n={n} tau2={tau2} eps2={eps2} k={k} t={} reps={reps} mc={} exact={exact}", est.t, est.estimate)
        });
    }
    out.push(tail.finish());

    let k = 20u32;
    let cfg = OneWayConfig::balanced(k as usize, n, tau2)?;
    let mut samples = mc_log_bf_samples(sub_seed(seed, 3), &cfg, &eff, reps)?;
    samples.sort_by(f64::total_cmp);
    let exact = median_log_bf(k, &asym)?;
    let half = 0.5 * reps as f64;
    let spread = 3.0 * (reps as f64).sqrt() / 2.0;
    let lo = samples[(half - spread).floor() as usize];
    let hi = samples[((half + spread).ceil() as usize).min(samples.len() - 1)];
    let mut median = Check::new(S, "median-vs-order-statistic-interval", 0.0);
    let outside = (lo - exact).max(exact - hi).max(0.0);
    median.observe(outside, || format!("k={k} reps={reps} interval=[{lo}, {hi}] exact={exact}"));
    out.push(median.finish());

    let mut crit = Check::new(S, "zero-slope-at-critical-epsilon", 1e-9);
    for &(n, tau2) in &[(10u32, 1.0), (5, 0.5), (50, 2.0)] {
        let e = critical_epsilon(n, tau2)?;
        let s = asymptotic_slope(&BalancedAsymptotics::new(n, tau2, e * e)?);
        crit.observe(s.abs(), || format!("n={n} tau2={tau2} epsilon*={e}"));
    }
    out.push(crit.finish());
    Ok(out)
}

fn fuzz_survey(rng: &mut SimRng, improper: bool) -> Result<(SurveyData, HyperPrior), CliError> {
    let sample = rng.random_range(1..=10usize);
    let population = rng.random_range(sample..=50);
    let p = rng.random_range(0.05..0.95);
    let mut outcomes: Vec<(usize, u8)> = (1..=sample).map(|j| (j, u8::from(rng.random::<f64>() < p))).collect();
    if improper && sample >= 2 {
        outcomes[0].1 = 0;
        outcomes[1].1 = 1;
    }
    let units: Vec<usize> = (1..=sample).collect();
    let data = SurveyData::from_parts(population, &units, &outcomes)?;
    let hp = if improper {
        HyperPrior::improper_limit()
    } else {
        HyperPrior::beta(rng.random_range(0.2..5.0), rng.random_range(0.2..5.0))?
    };
    Ok((data, hp))
}

fn survey_suite(level: Level, seed: Seed) -> Result<Vec<CheckOutcome>, CliError> {
    const S: &str = "survey";
    let mut out = Vec::new();

    let mut example = Check::new(S, "psi-b-example", 1e-12);
    let ex = SurveyData::from_parts(1000, &(1..=10).collect::<Vec<_>>(), &(1..=10).map(|j| (j, u8::from(j <= 3))).collect::<Vec<_>>())?;
    let hp = HyperPrior::beta(1.0, 1.0)?;
    example.observe((psi_hat(&ex, &hp)? - 1.0 / 3.0).abs(), || "B=1000 |J|=10 S=3 a0=b0=1 (psi_hat)".into());
    example.observe((bayes_psi_b(&ex, &hp)? - 0.333_166_666_666_666_7).abs(), || {
        "B=1000 |J|=10 S=3 a0=b0=1 (psi_B)".into()
    });
    out.push(example.finish());

    let instances = level.pick(6, 50);
    let psi_spec = QuadratureSpec::new(level.pick(121, 161), QuadratureScheme::TanhSinh)?;
    let mut unit = Check::new(S, "theta-means-vs-2d-quadrature", 1e-6);
    let mut psi_b = Check::new(S, "psi-b-vs-2d-quadrature", 1e-6);
    let mut hat = Check::new(S, "psi-hat-vs-1d-quadrature", 1e-8);
    let mut rng = seed.stream(11);
    for i in 0..instances {
        let (data, hp) = fuzz_survey(&mut rng, false)?;
        let describe = || format!("#{i} {hp:?} data={:?}", crate::survey::SurveyRecord::from(&data));
        let m = survey_unit_means_oracle(&data, &hp, &psi_spec)?;
        let mut oracle_total = 0.0;
        for j in 1..=data.population() {
            let o = match data.response(j) {
                None => m.unsampled,
                Some(0) => m.failure,
                Some(_) => m.success,
            };
            oracle_total += o;
            unit.observe((posterior_theta_mean(j, &data, &hp)? - o).abs(), describe);
        }
        let oracle_b = oracle_total / data.population() as f64;
        psi_b.observe((bayes_psi_b(&data, &hp)? - oracle_b).abs(), describe);
        hat.observe((psi_hat(&data, &hp)? - psi_posterior_mean_oracle(&data, &hp, &psi_spec)?).abs(), describe);
    }
    out.extend([unit.finish(), psi_b.finish(), hat.finish()]);

    let mut marginal = Check::new(S, "marginal-y-vs-beta-quadrature", 1e-8);
    let theta_spec = QuadratureSpec::new(201, QuadratureScheme::TanhSinh)?;
    for &(psi, eta) in &[(0.3, 0.01), (0.5, 0.2), (0.9, 0.05), (0.05, 0.04)] {
        let mv = BetaMeanVar::new(psi, eta)?;
        for y in [0u8, 1] {
            let oracle = beta_expectation_oracle(&mv, &theta_spec, |t, tc| if y == 1 { t } else { tc })?;
            marginal.observe((marginal_y_given_hyper(y, &mv)? - oracle).abs(), || format!("psi={psi} eta={eta} y={y}"));
        }
    }
    out.push(marginal.finish());

    let fuzz = level.pick(1_000, 10_000);
    let mut limit = Check::new(S, "improper-limit-is-horvitz-thompson", 0.0);
    let mut bound = Check::new(S, "correction-bound (ratio)", 1.0);
    let mut rng = seed.stream(12);
    for i in 0..fuzz {
        let (data, hp) = fuzz_survey(&mut rng, true)?;
        if data.sample_size() >= 2 {
            let ht = ht_estimator(&data);
            let d = (psi_hat(&data, &hp)? - ht).abs().max((bayes_psi_b(&data, &hp)? - ht).abs());
            limit.observe(d, || format!("#{i} data={:?}", crate::survey::SurveyRecord::from(&data)));
        }
        let (data, hp) = fuzz_survey(&mut rng, false)?;
        let gap = (bayes_psi_b(&data, &hp)? - psi_hat(&data, &hp)?).abs();
        bound.observe(gap / correction_bound(&hp, data.population()), || {
            format!("#{i} {hp:?} data={:?}", crate::survey::SurveyRecord::from(&data))
        });
    }
    out.extend([limit.finish(), bound.finish()]);

    let reps = level.pick(20_000, 100_000);
    let mv = BetaMeanVar::new(0.3, 0.02)?;
    let theta = simulate_hierarchical(&mut seed.stream(13), 1000, &mv)?;
    let units: Vec<usize> = (1..=1000).step_by(20).collect();
    let design = mc_ht_fixed_design(sub_seed(seed, 14), &theta, &units, reps)?;
    let predicted = ht_variance(&theta, &units)?.sqrt();
    let mut var = Check::new(S, "ht-variance-vs-fixed-design-mc (relative)", 0.1);
    var.observe((design.rmse / predicted - 1.0).abs(), || {
        format!("B=1000 |J|=50 reps={reps} mc_rmse={} predicted={predicted}", design.rmse)
    });
    out.push(var.finish());
    Ok(out)
}
