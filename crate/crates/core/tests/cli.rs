use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_overprior");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect("column present");
    r.records().map(|rec| rec.unwrap()[idx].to_owned()).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn zero_dataset(dir: &Path) -> String {
    let mut body = String::from("group,value\n");
    for g in 0..5 {
        for _ in 0..10 {
            body.push_str(&format!("g{g},0\n"));
        }
    }
    write(dir, "zeros.csv", &body)
}

#[test]
fn oneway_bf_zero_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let input = zero_dataset(tmp.path());
    let o = run(&["oneway-bf", "--input", &input, "--tau", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "replicate,k,n,tau,log_f,log10_f,post_prob_model2");
    assert_eq!(column(&out, "log_f"), vec!["5.994738182"]);
    assert_eq!(column(&out, "k"), vec!["5"]);
    assert_eq!(column(&out, "n"), vec!["10"]);
}

#[test]
fn oneway_bf_zero_tau_gives_zero_log_f() {
    let o = run(&["oneway-bf", "--simulate", "--k", "4", "--reps", "6", "--tau", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&stdout(&o), "log_f"), vec!["0"; 6]);
}

#[test]
fn oneway_bf_same_seed_same_bytes() {
    let args = ["oneway-bf", "--simulate", "--k", "8", "--reps", "50", "--seed", "99"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["oneway-bf", "--simulate", "--k", "8", "--reps", "50", "--seed", "100"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn oneway_bf_malformed_input_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.csv", "group,value\na,1.0\nb,oops\n");
    let o = run(&["oneway-bf", "--input", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv:3"), "{}", stderr(&o));

    let short = write(tmp.path(), "short.csv", "a,1\na\n");
    let o = run(&["oneway-bf", "--input", &short]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("short.csv:2"), "{}", stderr(&o));
}

#[test]
fn oneway_bf_mu_list_and_json() {
    let o = run(&["oneway-bf", "--simulate", "--mu", "0.5,-0.5,0.25", "--reps", "2", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
    assert_eq!(doc["rows"][0]["k"], 3);
    let mismatch = run(&["oneway-bf", "--simulate", "--mu", "0.5,-0.5", "--k", "3"]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn median_curve_svg_is_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let svg = tmp.path().join("fig.svg");
    let csv_path = tmp.path().join("fig.csv");
    let o = Command::new(BIN)
        .args(["median-curve", "--k-min", "3", "--k-max", "130", "--svg"])
        .arg(&svg)
        .arg("--csv")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let root = doc.root_element();
    assert_eq!(root.attribute("viewBox"), Some("0 0 800 600"));
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].attribute("points").unwrap().split_whitespace().count(), 128);
    let labels: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    for k in ["25", "50", "75", "100", "125"] {
        assert!(labels.contains(&k), "missing tick {k}");
    }
    let rows = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(rows.lines().count(), 129);
}

#[test]
fn median_curve_point_at_200() {
    let o = run(&["median-curve"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let ks = column(&out, "k");
    let medians = column(&out, "median_log_f");
    assert_eq!(ks.len(), 200);
    let v: f64 = medians[199].parse().unwrap();
    assert!((v - 67.637_669_69).abs() < 1e-7, "{v}");
}

#[test]
fn median_curve_rejects_zero_k() {
    assert_eq!(run(&["median-curve", "--k-min", "0"]).status.code(), Some(2));
}

#[test]
fn asymptotics_report() {
    let o = run(&["oneway-asymptotics", "--n", "10", "--tau", "1", "--epsilon", "0.3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("0.6706225455"), "{out}");
    assert!(out.contains("0.4046831847"), "{out}");
    assert!(out.contains("half"), "{out}");

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("a");
    let o = run(&["oneway-asymptotics", "--epsilon", "0.5", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("rejected"));
    let table = fs::read_to_string(dir.join("asymptotics.csv")).unwrap();
    let slope: f64 = column(&table, "slope_2logf_per_k")[0].parse().unwrap();
    assert!(slope < 0.0);
    assert_eq!(column(&table, "submodel_favored"), vec!["0"]);
}

fn survey_json(dir: &Path, population: usize, sample: &[usize], outcomes: &[(usize, u8)]) -> String {
    let outs: Vec<serde_json::Value> =
        outcomes.iter().map(|(u, y)| serde_json::json!({ "unit": u, "y": y })).collect();
    let doc = serde_json::json!({ "population": population, "sample": sample, "outcomes": outs });
    write(dir, "survey.json", &doc.to_string())
}

#[test]
fn survey_estimate_documented_example() {
    let tmp = tempfile::tempdir().unwrap();
    let sample: Vec<usize> = (1..=10).collect();
    let outcomes: Vec<(usize, u8)> = sample.iter().map(|&j| (j, u8::from(j <= 3))).collect();
    let input = survey_json(tmp.path(), 1000, &sample, &outcomes);
    let o = run(&["survey-estimate", "--input", &input, "--alpha0", "1", "--beta0", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(column(&out, "psi_hat"), vec!["0.3333333333"]);
    assert_eq!(column(&out, "bayes_psi_b"), vec!["0.3331666667"]);
    assert_eq!(column(&out, "psi_ht"), vec!["0.3000000000"]);
    assert_eq!(column(&out, "psi_b"), vec![""]);
}

#[test]
fn survey_estimate_improper_equals_ht() {
    let o = run(&["survey-estimate", "--simulate", "--improper", "--reps", "40", "--sample-size", "25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(column(&out, "bayes_psi_b"), column(&out, "psi_ht"));
}

#[test]
fn survey_estimate_improper_fallback_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let input = survey_json(tmp.path(), 20, &[1, 2], &[(1, 1), (2, 1)]);
    let o = run(&["survey-estimate", "--input", &input, "--improper"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    assert_eq!(column(&stdout(&o), "fallback"), vec!["1"]);
}

#[test]
fn survey_estimate_census_within_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let sample: Vec<usize> = (1..=12).collect();
    let outcomes: Vec<(usize, u8)> = sample.iter().map(|&j| (j, u8::from(j % 3 == 0))).collect();
    let input = survey_json(tmp.path(), 12, &sample, &outcomes);
    let o = run(&["survey-estimate", "--input", &input, "--alpha0", "2.5", "--beta0", "0.5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let hat: f64 = column(&out, "psi_hat")[0].parse().unwrap();
    let b: f64 = column(&out, "bayes_psi_b")[0].parse().unwrap();
    let bound: f64 = column(&out, "correction_bound")[0].parse().unwrap();
    assert!((b - hat).abs() <= bound);
}

#[test]
fn survey_estimate_rejects_bad_records() {
    let tmp = tempfile::tempdir().unwrap();
    let outside = survey_json(tmp.path(), 10, &[1, 2], &[(1, 1), (3, 0)]);
    assert_eq!(run(&["survey-estimate", "--input", &outside]).status.code(), Some(2));
    let dup = survey_json(tmp.path(), 10, &[1, 1], &[(1, 1)]);
    assert_eq!(run(&["survey-estimate", "--input", &dup]).status.code(), Some(2));
    let unknown = write(tmp.path(), "u.json", r#"{"population": 3, "sample": [1], "outcomes": [], "extra": 1}"#);
    assert_eq!(run(&["survey-estimate", "--input", &unknown]).status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "exp.toml",
        "[run]\nseed = 5\nreps = 3\n[oneway]\nk = 4\nn = 6\ntau = 0.5\nepsilon = 0.2\n",
    );
    let out_dir = tmp.path().join("run");
    let o = run(&["oneway-bf", "--simulate", "--config", &cfg, "--reps", "7", "--out", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out_dir.join("oneway_bf.csv")).unwrap();
    assert_eq!(column(&table, "k"), vec!["4"; 7]);
    assert_eq!(column(&table, "n"), vec!["6"; 7]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["parameters"]["tau"], 0.5);
    assert_eq!(manifest["parameters"]["pi2"], 0.5);
    assert_eq!(manifest["outputs"], serde_json::json!(["oneway_bf.csv"]));
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let bad = write(tmp.path(), "bad.toml", "[oneway]\nkk = 4\n");
    let o = run(&["oneway-bf", "--simulate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["oneway-bf", "--simulate", "--tau", "-1"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let file = write(tmp.path(), "plain", "x");
    let o = run(&["median-curve", "--k-max", "10", "--out", &format!("{file}/sub")]);
    assert_eq!(o.status.code(), Some(3));
    let missing = tmp.path().join("missing.csv");
    assert_eq!(run(&["oneway-bf", "--input", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn verify_quick_oneway_passes() {
    let o = run(&["verify", "--suite", "oneway", "--level", "quick"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
    assert!(out.contains("tail-law"));
}

#[test]
fn median_curve_outputs_listed_in_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("m");
    let o = run(&["median-curve", "--k-max", "60", "--format", "json", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_owned()).collect();
    for name in &listed {
        assert!(dir.join(name).exists(), "{name}");
    }
    let mut on_disk: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(on_disk, sorted);
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("median_fit.json")).unwrap()).unwrap();
    assert!(fit["rows"][0]["r_squared"].as_f64().unwrap() > 0.999);
}
