use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Seed;
use crate::oneway::{log_bayes_factor, simulate_dataset, EffectSpec, OneWayConfig};
use crate::survey::{
    bayes_psi_b, ht_estimator, ht_variance, observe, psi_hat, simulate_hierarchical, simulate_survey,
    BetaMeanVar, HyperPrior, ThetaVector,
};

const MIN_TAIL_REPS: u64 = 10_000;
const MIN_ESTIMATOR_REPS: u64 = 1_000;

/// Simulated `log F` values, one per replicate, in replicate order.
///
/// Replicate `r` uses stream `r` of `seed`, so the output does not depend on
/// the number of worker threads.
pub fn mc_log_bf_samples(seed: Seed, cfg: &OneWayConfig, eff: &EffectSpec, reps: u64) -> Result<Vec<f64>> {
    eff.validate(cfg)?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.stream(r);
            let data = simulate_dataset(&mut rng, cfg, eff)?;
            log_bayes_factor(&data, cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
}

/// Empirical `P(log F > k·t)` with its binomial standard error.
pub fn mc_tail_oracle(
    seed: Seed,
    ts: &[f64],
    cfg: &OneWayConfig,
    eff: &EffectSpec,
    reps: u64,
) -> Result<Vec<TailEstimate>> {
    if reps < MIN_TAIL_REPS {
        return Err(Error::InvalidConfig(format!("tail oracle needs at least {MIN_TAIL_REPS} replicates")));
    }
    let samples = mc_log_bf_samples(seed, cfg, eff, reps)?;
    let k = cfg.k() as f64;
    let r = reps as f64;
    Ok(ts
        .iter()
        .map(|&t| {
            let hits = samples.iter().filter(|&&v| v > k * t).count() as f64;
            let p = hits / r;
            TailEstimate { t, estimate: p, se: (p * (1.0 - p) / r).sqrt() }
        })
        .collect())
}

/// Bias and root-mean-square error against the two estimation targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorError {
    pub bias_vs_psi: f64,
    pub rmse_vs_psi: f64,
    pub bias_vs_psi_b: f64,
    pub rmse_vs_psi_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub reps: u64,
    pub ht: EstimatorError,
    pub psi_hat: EstimatorError,
    pub bayes_psi_b: EstimatorError,
    /// Average over replicates of `Σ_J θ_j(1−θ_j)/|J|²`.
    pub mean_ht_variance: f64,
    /// Replicates where the improper-limit posterior was undefined and the
    /// Horvitz–Thompson value stood in for the Bayes estimates.
    pub improper_fallbacks: u64,
}

struct Replicate {
    psi_b: f64,
    ht: f64,
    hat: f64,
    bayes: f64,
    ht_var: f64,
    fallback: bool,
}

fn summarize(psi: f64, reps: &[Replicate], pick: impl Fn(&Replicate) -> f64) -> EstimatorError {
    let r = reps.len() as f64;
    let mut acc = [0.0; 4];
    for rep in reps {
        let e = pick(rep);
        acc[0] += e - psi;
        acc[1] += (e - psi).powi(2);
        acc[2] += e - rep.psi_b;
        acc[3] += (e - rep.psi_b).powi(2);
    }
    EstimatorError {
        bias_vs_psi: acc[0] / r,
        rmse_vs_psi: (acc[1] / r).sqrt(),
        bias_vs_psi_b: acc[2] / r,
        rmse_vs_psi_b: (acc[3] / r).sqrt(),
    }
}

/// Repeated draws of the whole hierarchy: fresh `θ ~ Beta` and a fresh simple
/// random sample of `n` units each replicate.
pub fn mc_estimator_oracle(
    seed: Seed,
    population: usize,
    mv: &BetaMeanVar,
    sample_size: usize,
    hp: &HyperPrior,
    reps: u64,
) -> Result<EstimatorSummary> {
    if reps < MIN_ESTIMATOR_REPS {
        return Err(Error::InvalidConfig(format!(
            "estimator oracle needs at least {MIN_ESTIMATOR_REPS} replicates"
        )));
    }
    let draws: Vec<Replicate> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.stream(r);
            let theta = simulate_hierarchical(&mut rng, population, mv)?;
            let data = simulate_survey(&mut rng, &theta, sample_size)?;
            let units: Vec<usize> = data.sample().collect();
            let ht = ht_estimator(&data);
            let (hat, bayes, fallback) = match (psi_hat(&data, hp), bayes_psi_b(&data, hp)) {
                (Ok(h), Ok(b)) => (h, b, false),
                (Err(Error::ImproperPosterior { .. }), _) => (ht, ht, true),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            Ok(Replicate {
                psi_b: theta.psi_b(),
                ht,
                hat,
                bayes,
                ht_var: ht_variance(&theta, &units)?,
                fallback,
            })
        })
        .collect::<Result<_>>()?;
    let psi = mv.psi();
    Ok(EstimatorSummary {
        reps,
        ht: summarize(psi, &draws, |d| d.ht),
        psi_hat: summarize(psi, &draws, |d| d.hat),
        bayes_psi_b: summarize(psi, &draws, |d| d.bayes),
        mean_ht_variance: draws.iter().map(|d| d.ht_var).sum::<f64>() / reps as f64,
        improper_fallbacks: draws.iter().filter(|d| d.fallback).count() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HtDesignSummary {
    pub reps: u64,
    /// Mean of `θ` over the sampled units.
    pub target: f64,
    pub mean_estimate: f64,
    pub rmse: f64,
}

/// Horvitz–Thompson error with `θ` and the sampled units held fixed; only the
/// outcomes are redrawn.
pub fn mc_ht_fixed_design(seed: Seed, theta: &ThetaVector, units: &[usize], reps: u64) -> Result<HtDesignSummary> {
    if reps == 0 {
        return Err(Error::InvalidConfig("need at least one replicate".into()));
    }
    let target = theta.mean_over(units)?;
    let estimates: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.stream(r);
            observe(&mut rng, theta, units).map(|d| ht_estimator(&d))
        })
        .collect::<Result<_>>()?;
    let r = reps as f64;
    Ok(HtDesignSummary {
        reps,
        target,
        mean_estimate: estimates.iter().sum::<f64>() / r,
        rmse: (estimates.iter().map(|e| (e - target).powi(2)).sum::<f64>() / r).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_is_one_far_left() {
        let cfg = OneWayConfig::balanced(3, 4, 1.0).unwrap();
        let eff = EffectSpec::IidNormal { epsilon2: 0.09 };
        let est = mc_tail_oracle(Seed(5), &[-1e6], &cfg, &eff, 10_000).unwrap();
        assert_eq!(est[0].estimate, 1.0);
        assert_eq!(est[0].se, 0.0);
    }

    #[test]
    fn tail_needs_enough_reps() {
        let cfg = OneWayConfig::balanced(3, 4, 1.0).unwrap();
        let eff = EffectSpec::IidNormal { epsilon2: 0.09 };
        assert!(mc_tail_oracle(Seed(5), &[0.0], &cfg, &eff, 9_999).is_err());
    }

    #[test]
    fn samples_replay_under_any_thread_count() {
        let cfg = OneWayConfig::balanced(4, 3, 1.0).unwrap();
        let eff = EffectSpec::IidNormal { epsilon2: 0.25 };
        let a = mc_log_bf_samples(Seed(9), &cfg, &eff, 500).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mc_log_bf_samples(Seed(9), &cfg, &eff, 500).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn census_ht_error_is_bernoulli_noise() {
        let mv = BetaMeanVar::new(0.4, 0.02).unwrap();
        let hp = HyperPrior::beta(1.0, 1.0).unwrap();
        let s = mc_estimator_oracle(Seed(2), 40, &mv, 40, &hp, 4_000).unwrap();
        // census: S/B − ψ_B has mean 0 and variance Σθ(1−θ)/B²
        let envelope = s.mean_ht_variance.sqrt();
        assert!(s.ht.bias_vs_psi_b.abs() < 4.0 * envelope / (s.reps as f64).sqrt());
        assert!((s.ht.rmse_vs_psi_b / envelope - 1.0).abs() < 0.05);
        assert_eq!(s.improper_fallbacks, 0);
    }

    #[test]
    fn improper_fallbacks_are_counted() {
        let mv = BetaMeanVar::new(0.05, 0.001).unwrap();
        let s = mc_estimator_oracle(Seed(3), 30, &mv, 3, &HyperPrior::improper_limit(), 1_000).unwrap();
        assert!(s.improper_fallbacks > 500);
    }

    #[test]
    fn fixed_design_target() {
        let theta = ThetaVector::new(vec![0.0, 1.0, 0.5, 0.5]).unwrap();
        let s = mc_ht_fixed_design(Seed(1), &theta, &[1, 2], 100).unwrap();
        assert_eq!(s.target, 0.5);
        assert_eq!(s.rmse, 0.0);
    }
}
