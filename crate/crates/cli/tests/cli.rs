use std::path::Path;
use std::process::{Command, Output};

fn srp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

fn json_out(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).expect("json on stdout")
}

#[test]
fn alpha0_prints_root_with_small_residual() {
    let o = srp(&["alpha0", "--log-mu", "1"]);
    assert!(o.status.success());
    let v = json_out(&o);
    let a = v["alpha0"].as_f64().unwrap();
    assert!((a - 0.9272932710655705).abs() < 1e-12);
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn alpha0_rejects_negative_log_mu() {
    let o = srp(&["alpha0", "--log-mu", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("log_mu"));
}

#[test]
fn constants_match_closed_form() {
    let o = srp(&["constants", "--alpha", "3", "--log-mu", "1", "--delta", "1"]);
    assert!(o.status.success());
    let v = json_out(&o);
    let c0 = v[0]["c0"].as_f64().unwrap();
    let expected = 3.0 + 0.5 * (1.0 + (-6.0f64).exp()).ln() - (1.0f64.exp() + 1.0).ln();
    assert!((c0 - expected).abs() < 1e-12, "{c0} vs {expected}");
}

#[test]
fn constants_below_alpha0_fail() {
    let o = srp(&["constants", "--alpha", "0.5", "--log-mu", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = srp(&["verify", "no-such-suite"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = srp(&["tails", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_writes_junit_report() {
    let dir = tempfile::tempdir().unwrap();
    let junit = dir.path().join("report.xml");
    let o = srp(&["verify", "prop31", "--junit", junit.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let xml = std::fs::read_to_string(&junit).unwrap();
    assert!(xml.contains("<testsuite name=\"prop31\""));
    assert!(xml.contains("failures=\"0\""));
}

#[test]
fn capacity_errors_exit_with_three() {
    // a 10x10 grid is far beyond the exact enumeration cap
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"geometry": {"kind": "grid", "rows": 10, "cols": 10},
            "analysis": {"kind": "tails", "exact_max_vertices": 200}}"#,
    )
    .unwrap();
    let o = srp(&["tails", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

fn parse_csv(path: &Path) -> (serde_json::Value, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (meta, rows)
}

#[test]
fn exact_tails_on_square_match_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tails.csv");
    let o = srp(&["tails", "--grid", "2x2", "--alpha", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (meta, rows) = parse_csv(&out);
    assert_eq!(meta["command"], "tails");
    assert_eq!(meta["config"]["geometry"]["rows"], 2);
    assert_eq!(rows[0], ["alpha", "ell", "tail", "lo", "hi", "overlay", "method"]);
    let tail: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    // weights of the 2x2 grid: identity 1, four 2-cycles and two pairs of them
    // at e^-2 each pair, two directed 4-cycles at e^-4
    let e2 = (-2.0f64).exp();
    let z = 1.0 + 4.0 * e2 + 2.0 * e2 * e2 + 2.0 * e2 * e2;
    let p_ge4 = 2.0 * e2 * e2 / z;
    assert!((tail[3] - p_ge4).abs() < 1e-10, "{} vs {p_ge4}", tail[3]);
    assert_eq!(tail[4], 0.0);
    assert!(rows[1..].iter().all(|r| r[6] == "exact"));
}

#[test]
fn tails_below_alpha0_warn_and_omit_overlay() {
    let o = srp(&["tails", "--grid", "2x2", "--alpha", "0.5", "--log-mu", "1"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("overlay omitted"));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[5].is_empty()));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sample.csv");
    let args = [
        "sample",
        "--grid",
        "3x3",
        "--alpha",
        "1,2",
        "--samples",
        "50",
        "--chains",
        "2",
        "--seed",
        "9",
        "--out",
    ];
    let run = || {
        let mut a = args.to_vec();
        a.push(out.to_str().unwrap());
        assert!(srp(&a).status.success());
        std::fs::read(&out).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let (_, rows) = parse_csv(&out);
    assert_eq!(rows.len(), 1 + 2 * 2 * 50);

    let a = srp(&["sample", "--grid", "3x3", "--samples", "20", "--seed", "9"]);
    let b = srp(&["sample", "--grid", "3x3", "--samples", "20", "--seed", "10"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn open_sampling_and_regen_run_on_small_cylinder() {
    let o = srp(&["sample", "--model", "open", "--n", "2", "--samples", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2 + 5);

    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("regen.json");
    let o = srp(&[
        "regen",
        "--n",
        "4",
        "--alpha",
        "2",
        "--samples",
        "200",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["meta"]["command"], "regen");
    assert_eq!(v["summaries"][0]["stats"]["samples"], 200);
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("alpha,statistic"));
}

#[test]
fn census_counts_square_lattice_walks() {
    let o = srp(&["census", "--grid", "3x3", "--n-max", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let saw: Vec<u64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(saw, [1, 4, 12, 36, 100]);
}

#[test]
fn run_dispatches_on_the_analysis_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gw.json");
    std::fs::write(
        &cfg,
        r#"{"analysis": {"kind": "gw", "offspring": {"0": 0.5, "1": 0.5}, "ell_max": 10, "draws": 2000}}"#,
    )
    .unwrap();
    let o = srp(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().starts_with("ell,exact_at_least"));
    let first: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(first[1].parse::<f64>().unwrap(), 1.0);

    assert_eq!(srp(&["run"]).status.code(), Some(2));
}
