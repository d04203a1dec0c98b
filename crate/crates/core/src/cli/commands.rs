use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use super::manifest::OutputDir;
use super::svg::median_curve_svg;
use super::table::{Cell, Table};
use super::verify::run_suites;
use super::{AsymptoticsArgs, CliError, Cli, Command, Format, MedianCurveArgs, OnewayBfArgs, SurveyArgs, VerifyArgs};
use crate::numerics::Seed;
use crate::oneway::{
    asymptotic_slope, critical_epsilon, least_squares, log_bayes_factor, median_curve, posterior_prob_model2,
    simulate_dataset, BalancedAsymptotics, EffectSpec, ModelPrior, OneWayConfig, OneWaySufficient,
};
use crate::survey::{
    bayes_psi_b, correction_bound, ht_estimator, psi_hat, simulate_hierarchical, simulate_survey, BetaMeanVar,
    HyperPrior, SurveyData, SurveyRecord, ThetaVector,
};
use crate::Error;

const LN_10: f64 = std::f64::consts::LN_10;

/// Settings shared by every command after merging flags over the config file.
#[derive(Debug, Clone, Serialize)]
struct RunSettings {
    seed: u64,
    reps: Option<u64>,
    format: Format,
    #[serde(skip)]
    out: Option<PathBuf>,
    #[serde(skip)]
    threads: Option<usize>,
}

/// What a command produced, before anything is written.
#[derive(Default)]
struct Report {
    tables: Vec<(&'static str, Table)>,
    files: Vec<(&'static str, Vec<u8>)>,
    external: Vec<(PathBuf, Vec<u8>)>,
    text: Option<String>,
    parameters: Value,
    failure: Option<String>,
}

pub(super) fn dispatch(cli: Cli, command_line: Vec<String>) -> Result<(), CliError> {
    let cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let run = RunSettings {
        seed: cli.common.seed.or(cfg.run.seed).unwrap_or(Seed::default().value()),
        reps: cli.common.reps.or(cfg.run.reps),
        format: cli.common.format.or(cfg.run.format).unwrap_or_default(),
        out: cli.common.out.clone().or_else(|| cfg.run.out.clone()),
        threads: cli.common.threads.or(cfg.run.threads),
    };
    if run.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.threads.unwrap_or(0))
        .build()
        .map_err(CliError::io)?;
    let report = pool.install(|| match &cli.command {
        Command::OnewayBf(a) => oneway_bf(a, &cfg, &run),
        Command::MedianCurve(a) => median_curve_cmd(a, &cfg, &run),
        Command::OnewayAsymptotics(a) => asymptotics(a, &cfg),
        Command::SurveyEstimate(a) => survey_estimate(a, &cfg, &run),
        Command::Verify(a) => verify(a, &run),
    })?;
    emit(report, &run, command_line)
}

fn emit(report: Report, run: &RunSettings, command_line: Vec<String>) -> Result<(), CliError> {
    let ext = run.format.extension();
    for (path, bytes) in &report.external {
        std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if let Some(text) = &report.text {
        print!("{text}");
    }
    match &run.out {
        Some(dir) => {
            let mut out = OutputDir::create(dir)?;
            for (name, table) in &report.tables {
                out.write(&format!("{name}.{ext}"), &table.render(run.format, name)?)?;
            }
            for (name, bytes) in &report.files {
                out.write(name, bytes)?;
            }
            for (path, _) in &report.external {
                out.record_external(path);
            }
            let mut parameters = report.parameters;
            parameters["run"] = serde_json::to_value(run).map_err(CliError::io)?;
            out.finish(command_line, run.seed, parameters)?;
        }
        None if report.text.is_none() && report.external.is_empty() => {
            if let Some((name, table)) = report.tables.first() {
                let bytes = table.render(run.format, name)?;
                print!("{}", String::from_utf8_lossy(&bytes));
            }
        }
        None => {}
    }
    match report.failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn positive_tau(tau: f64) -> Result<f64, CliError> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(CliError::Usage(format!("tau must be finite and nonnegative, got {tau}")));
    }
    Ok(tau)
}

fn read_groups(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let bad = |msg: String| CliError::Usage(format!("{}:{line}: {msg}", path.display()));
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields `group,value`, found {}", record.len())));
        }
        let value: f64 = match record[1].parse() {
            Ok(v) => v,
            Err(_) if line == 1 => continue,
            Err(_) => return Err(bad(format!("value `{}` is not a number", &record[1]))),
        };
        if !value.is_finite() {
            return Err(bad(format!("value `{}` is not finite", &record[1])));
        }
        let next = groups.len();
        let g = *index.entry(record[0].to_owned()).or_insert(next);
        if g == next {
            groups.push(Vec::new());
        }
        groups[g].push(value);
    }
    if groups.is_empty() {
        return Err(CliError::Usage(format!("{}: no observations", path.display())));
    }
    Ok(groups)
}

#[derive(Serialize)]
struct OnewayParams {
    mode: &'static str,
    input: Option<String>,
    n: Option<u32>,
    k: usize,
    tau: f64,
    epsilon: Option<f64>,
    mu: Option<Vec<f64>>,
    pi2: f64,
    freeze_mu: bool,
    reps: u64,
}

const ONEWAY_COLUMNS: [&str; 7] = ["replicate", "k", "n", "tau", "log_f", "log10_f", "post_prob_model2"];

fn oneway_bf(a: &OnewayBfArgs, cfg: &ExperimentConfig, run: &RunSettings) -> Result<Report, CliError> {
    let c = &cfg.oneway;
    let tau = positive_tau(a.tau.or(c.tau).unwrap_or(1.0))?;
    let pi2 = a.pi2.or(c.pi2).unwrap_or(0.5);
    let prior = ModelPrior::from_null(pi2)?;
    let mut table = Table::new(ONEWAY_COLUMNS.to_vec());

    if let Some(path) = &a.input {
        let groups = read_groups(path)?;
        let sizes: Vec<u32> = groups.iter().map(|g| g.len() as u32).collect();
        let owc = OneWayConfig::new(sizes, tau * tau, prior)?;
        let data = OneWaySufficient::from_groups(&groups);
        let log_f = log_bayes_factor(&data, &owc)?;
        table.push(vec![
            Cell::Missing,
            owc.k().into(),
            owc.common_size().into(),
            tau.into(),
            log_f.into(),
            (log_f / LN_10).into(),
            posterior_prob_model2(log_f, prior).into(),
        ]);
        let parameters = serde_json::to_value(OnewayParams {
            mode: "input",
            input: Some(path.display().to_string()),
            n: owc.common_size(),
            k: owc.k(),
            tau,
            epsilon: None,
            mu: None,
            pi2,
            freeze_mu: false,
            reps: 1,
        })
        .map_err(CliError::io)?;
        return Ok(Report { tables: vec![("oneway_bf", table)], parameters, ..Report::default() });
    }
    if !a.simulate {
        return Err(CliError::Usage("oneway-bf needs --input <file> or --simulate".into()));
    }

    let n = a.n.or(c.n).unwrap_or(10);
    let mu = a.mu.clone().or_else(|| if a.epsilon.is_some() { None } else { c.mu.clone() });
    let k = match (&mu, a.k.or(c.k)) {
        (Some(m), Some(k)) if m.len() != k as usize => {
            return Err(CliError::Usage(format!("--mu has {} values but k = {k}", m.len())))
        }
        (Some(m), _) => m.len(),
        (None, k) => k.unwrap_or(50) as usize,
    };
    let epsilon = if mu.is_some() { None } else { Some(a.epsilon.or(c.epsilon).unwrap_or(0.3)) };
    let freeze = a.freeze_mu || c.freeze_mu.unwrap_or(false);
    let reps = run.reps.unwrap_or(1);
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let owc = OneWayConfig::balanced(k, n, tau * tau)?.with_model_prior(prior);
    let seed = Seed(run.seed);
    let mut eff = match (&mu, epsilon) {
        (Some(m), _) => EffectSpec::Fixed(m.clone()),
        (None, Some(e)) => EffectSpec::IidNormal { epsilon2: e * e },
        (None, None) => unreachable!("epsilon defaults when mu is absent"),
    };
    eff.validate(&owc)?;
    if freeze {
        eff = EffectSpec::Fixed(eff.draw_means(&mut seed.shared(), k));
    }
    let log_fs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = simulate_dataset(&mut seed.stream(r), &owc, &eff)?;
            log_bayes_factor(&data, &owc)
        })
        .collect::<Result<_, Error>>()?;
    for (r, log_f) in log_fs.into_iter().enumerate() {
        table.push(vec![
            r.into(),
            k.into(),
            n.into(),
            tau.into(),
            log_f.into(),
            (log_f / LN_10).into(),
            posterior_prob_model2(log_f, prior).into(),
        ]);
    }
    let parameters = serde_json::to_value(OnewayParams {
        mode: "simulate",
        input: None,
        n: Some(n),
        k,
        tau,
        epsilon,
        mu,
        pi2,
        freeze_mu: freeze,
        reps,
    })
    .map_err(CliError::io)?;
    Ok(Report { tables: vec![("oneway_bf", table)], parameters, ..Report::default() })
}

#[derive(Serialize)]
struct CurveParams {
    n: u32,
    tau: f64,
    epsilon: f64,
    k_min: u32,
    k_max: u32,
}

/// Lower end of the k window used for the straight-line summary.
const FIT_FROM_K: u32 = 50;

fn median_curve_cmd(a: &MedianCurveArgs, cfg: &ExperimentConfig, run: &RunSettings) -> Result<Report, CliError> {
    let c = &cfg.oneway;
    let n = a.n.or(c.n).unwrap_or(10);
    let tau = positive_tau(a.tau.or(c.tau).unwrap_or(1.0))?;
    let epsilon = a.epsilon.or(c.epsilon).unwrap_or(0.3);
    let k_min = a.k_min.or(c.k_min).unwrap_or(1);
    let k_max = a.k_max.or(c.k_max).unwrap_or(200);
    if k_min == 0 {
        return Err(CliError::Usage("--k-min must be at least 1".into()));
    }
    let asym = BalancedAsymptotics::new(n, tau * tau, epsilon * epsilon)?;
    let points = median_curve(k_min, k_max, &asym)?;

    let mut curve = Table::new(vec!["k", "median_log_f", "median_log10_f"]);
    for p in &points {
        curve.push(vec![p.k.into(), p.median_log_f.into(), p.median_log10_f().into()]);
    }
    let mut tables = vec![("median_curve", curve.clone())];

    let window: Vec<_> = points.iter().filter(|p| p.k >= FIT_FROM_K.max(k_min)).collect();
    if window.len() >= 2 {
        let xs: Vec<f64> = window.iter().map(|p| f64::from(p.k)).collect();
        let ys: Vec<f64> = window.iter().map(|p| p.median_log10_f()).collect();
        let fit = least_squares(&xs, &ys)?;
        let mut t = Table::new(vec!["k_from", "k_to", "slope_log10", "slope_log", "intercept_log10", "r_squared"]);
        t.push(vec![
            window[0].k.into(),
            k_max.into(),
            fit.slope.into(),
            (fit.slope * LN_10).into(),
            fit.intercept.into(),
            fit.r_squared.into(),
        ]);
        tables.push(("median_fit", t));
    }

    let title = format!("Median Bayes factor (n = {n}, tau = {tau}, epsilon = {epsilon})");
    let svg = median_curve_svg(&points, &title).into_bytes();
    let mut external = Vec::new();
    if let Some(path) = &a.csv {
        external.push((path.clone(), curve.render(Format::Csv, "median_curve")?));
    }
    if let Some(path) = &a.svg {
        external.push((path.clone(), svg.clone()));
    }
    let files = if run.out.is_some() { vec![("median_curve.svg", svg)] } else { Vec::new() };
    let parameters = serde_json::to_value(CurveParams { n, tau, epsilon, k_min, k_max }).map_err(CliError::io)?;
    Ok(Report { tables, files, external, parameters, ..Report::default() })
}

fn asymptotics(a: &AsymptoticsArgs, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let c = &cfg.oneway;
    let n = a.n.or(c.n).unwrap_or(10);
    let tau = positive_tau(a.tau.or(c.tau).unwrap_or(1.0))?;
    let epsilon = a.epsilon.or(c.epsilon).unwrap_or(0.3);
    let asym = BalancedAsymptotics::new(n, tau * tau, epsilon * epsilon)?;
    let slope2 = asymptotic_slope(&asym);
    let crit = critical_epsilon(n, tau * tau)?;
    let verdict = if slope2 > 0.0 {
        "F -> infinity exponentially in k (submodel favored)"
    } else if slope2 < 0.0 {
        "F -> 0 exponentially in k (submodel rejected)"
    } else {
        "no exponential trend"
    };
    let text = format!(
        "a = n tau^2              {a}\n\
         slope of 2 log F / k     {s2}\n\
         slope of log F / k       {s1}\n\
         critical epsilon         {crit}\n\
         limit                    {verdict}\n\
         note: log F / k converges to half the slope of 2 log F / k\n",
        a = super::table::format_sig(asym.a()),
        s2 = super::table::format_sig(slope2),
        s1 = super::table::format_sig(slope2 / 2.0),
        crit = super::table::format_sig(crit),
    );
    let mut t = Table::new(vec![
        "n",
        "tau",
        "epsilon",
        "a",
        "slope_2logf_per_k",
        "slope_logf_per_k",
        "critical_epsilon",
        "submodel_favored",
    ]);
    t.push(vec![
        n.into(),
        tau.into(),
        epsilon.into(),
        asym.a().into(),
        slope2.into(),
        (slope2 / 2.0).into(),
        crit.into(),
        (slope2 > 0.0).into(),
    ]);
    let parameters = serde_json::json!({ "n": n, "tau": tau, "epsilon": epsilon });
    Ok(Report { tables: vec![("asymptotics", t)], text: Some(text), parameters, ..Report::default() })
}

#[derive(Serialize)]
struct SurveyParams {
    mode: &'static str,
    input: Option<String>,
    population: usize,
    sample_size: Option<usize>,
    psi: Option<f64>,
    eta: Option<f64>,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    improper: bool,
    fixed_theta: bool,
    reps: u64,
}

const SURVEY_COLUMNS: [&str; 12] = [
    "replicate",
    "population",
    "sample_size",
    "successes",
    "psi_hat",
    "psi_ht",
    "bayes_psi_b",
    "correction_bound",
    "psi_b",
    "error_bayes",
    "error_ht",
    "fallback",
];

struct SurveyRow {
    psi_hat: f64,
    bayes: f64,
    fallback: bool,
}

fn estimate(data: &SurveyData, hp: &HyperPrior) -> Result<SurveyRow, CliError> {
    match (psi_hat(data, hp), bayes_psi_b(data, hp)) {
        (Ok(h), Ok(b)) => Ok(SurveyRow { psi_hat: h, bayes: b, fallback: false }),
        (Err(Error::ImproperPosterior { .. }), _) => {
            let ht = ht_estimator(data);
            Ok(SurveyRow { psi_hat: ht, bayes: ht, fallback: true })
        }
        (Err(e), _) | (_, Err(e)) => Err(e.into()),
    }
}

fn survey_row(replicate: Option<u64>, data: &SurveyData, hp: &HyperPrior, psi_b: Option<f64>) -> Result<(Vec<Cell>, bool), CliError> {
    let est = estimate(data, hp)?;
    let ht = ht_estimator(data);
    Ok((
        vec![
            replicate.into(),
            data.population().into(),
            data.sample_size().into(),
            data.successes().into(),
            est.psi_hat.into(),
            ht.into(),
            est.bayes.into(),
            correction_bound(hp, data.population()).into(),
            psi_b.into(),
            psi_b.map(|p| est.bayes - p).into(),
            psi_b.map(|p| ht - p).into(),
            est.fallback.into(),
        ],
        est.fallback,
    ))
}

fn survey_estimate(a: &SurveyArgs, cfg: &ExperimentConfig, run: &RunSettings) -> Result<Report, CliError> {
    let c = &cfg.survey;
    let improper = a.improper || c.improper.unwrap_or(false);
    let (alpha0, beta0) = (a.alpha0.or(c.alpha0).unwrap_or(1.0), a.beta0.or(c.beta0).unwrap_or(1.0));
    let hp = if improper { HyperPrior::improper_limit() } else { HyperPrior::beta(alpha0, beta0)? };
    let shape = |v: f64| (!improper).then_some(v);
    let mut table = Table::new(SURVEY_COLUMNS.to_vec());
    let mut fallbacks = 0u64;

    let parameters = if let Some(path) = &a.input {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let record: SurveyRecord =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let data = SurveyData::try_from(record).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let (row, fb) = survey_row(None, &data, &hp, None)?;
        fallbacks += u64::from(fb);
        table.push(row);
        SurveyParams {
            mode: "input",
            input: Some(path.display().to_string()),
            population: data.population(),
            sample_size: Some(data.sample_size()),
            psi: None,
            eta: None,
            alpha0: shape(alpha0),
            beta0: shape(beta0),
            improper,
            fixed_theta: false,
            reps: 1,
        }
    } else if a.simulate {
        let fixed = c.theta.clone().map(ThetaVector::new).transpose()?;
        let population = match &fixed {
            Some(t) => t.len(),
            None => a.population.or(c.population).unwrap_or(1000),
        };
        let sample_size = a.sample_size.or(c.sample_size).unwrap_or(10);
        let psi = a.psi.or(c.psi).unwrap_or(0.3);
        let eta = a.eta.or(c.eta).unwrap_or(0.01);
        let mv = BetaMeanVar::new(psi, eta)?;
        let reps = run.reps.unwrap_or(1);
        if reps == 0 {
            return Err(CliError::Usage("--reps must be at least 1".into()));
        }
        let seed = Seed(run.seed);
        let sims: Vec<(ThetaVector, SurveyData)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed.stream(r);
                let theta = match &fixed {
                    Some(t) => t.clone(),
                    None => simulate_hierarchical(&mut rng, population, &mv)?,
                };
                let data = simulate_survey(&mut rng, &theta, sample_size)?;
                Ok((theta, data))
            })
            .collect::<Result<_, Error>>()?;
        for (r, (theta, data)) in sims.iter().enumerate() {
            let (row, fb) = survey_row(Some(r as u64), data, &hp, Some(theta.psi_b()))?;
            fallbacks += u64::from(fb);
            table.push(row);
        }
        SurveyParams {
            mode: "simulate",
            input: None,
            population,
            sample_size: Some(sample_size),
            psi: fixed.is_none().then_some(psi),
            eta: fixed.is_none().then_some(eta),
            alpha0: shape(alpha0),
            beta0: shape(beta0),
            improper,
            fixed_theta: fixed.is_some(),
            reps,
        }
    } else {
        return Err(CliError::Usage("survey-estimate needs --input <file> or --simulate".into()));
    };
    if fallbacks > 0 {
        eprintln!(
            "warning: improper-limit posterior undefined (S = 0 or S = |J|) in {fallbacks} row(s); \
             reported the Horvitz-Thompson estimate instead"
        );
    }
    let parameters = serde_json::to_value(parameters).map_err(CliError::io)?;
    Ok(Report { tables: vec![("survey_estimate", table)], parameters, ..Report::default() })
}

fn verify(a: &VerifyArgs, run: &RunSettings) -> Result<Report, CliError> {
    let outcomes = run_suites(a.suite, a.level, Seed(run.seed))?;
    let mut table = Table::new(vec!["suite", "check", "max_deviation", "tolerance", "status", "worst_instance"]);
    let mut text = String::new();
    let mut failed = Vec::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!(
            "{status} {}/{}  max deviation {:.3e}  tolerance {:.3e}\n",
            o.suite, o.name, o.max_deviation, o.tolerance
        ));
        if !o.passed {
            text.push_str(&format!("     instance: {}  seed: {}\n", o.worst_instance, run.seed));
            failed.push(format!("{}/{}", o.suite, o.name));
        }
        table.push(vec![
            o.suite.into(),
            o.name.into(),
            o.max_deviation.into(),
            o.tolerance.into(),
            status.into(),
            o.worst_instance.as_str().into(),
        ]);
    }
    let failure = (!failed.is_empty()).then(|| format!("{} check(s) failed: {}", failed.len(), failed.join(", ")));
    let parameters = serde_json::json!({ "suite": a.suite, "level": a.level });
    Ok(Report { tables: vec![("verify", table)], text: Some(text), parameters, failure, ..Report::default() })
}
