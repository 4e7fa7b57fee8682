use std::process::{Command, Output};

use serde_json::Value;

fn hua(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hua-lab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn circle_integral_prints_two() {
    let out = hua(&["eval", "rhs", "--family", "group", "--group", "u", "--n", "1", "--lambda", "1", "--mu", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["value"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["formula_id"], "group_integral");
    assert_eq!(v["schema"], 1);
    assert_eq!(v["job"]["command"], "eval");
    assert!(v["build"].as_str().unwrap().starts_with("hua-lab-"));
}

#[test]
fn symplectic_identities_pass() {
    let out = hua(&["verify", "identities", "--group", "sp", "--n", "4", "--trials", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["max_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn so2_integral_matches_one_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("so2.csv");
    let out = hua(&[
        "verify", "integral", "--family", "group", "--group", "so", "--n", "2", "--lambda", "0,1", "--samples", "1000000", "--seed", "1",
        "--json", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["closed_form"]["value"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["z_score"].as_f64().unwrap().abs() <= 4.0);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn usage_and_domain_errors_exit_two() {
    let out = hua(&["verify", "integral", "--family", "group"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = hua(&["eval", "rhs", "--family", "group", "--group", "so", "--n", "3", "--lambda", "0,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hua(&["eval", "rhs", "--family", "ball-constant", "--group", "u", "--n", "1", "--tau", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hua(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    // a sign bug planted in Υ must be caught
    let out = hua(&["suite", "--profile", "quick", "--inject-fault", "upsilon-sign"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn quick_suite_passes_and_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("quick.csv");
    let a = hua(&["suite", "--profile", "quick", "--csv", csv.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = Command::new(env!("CARGO_BIN_EXE_hua-lab"))
        .args(["suite", "--profile", "quick", "--csv", csv.to_str().unwrap()])
        .env("HUA_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    let cells: usize = v["criteria"].as_array().unwrap().iter().map(|c| c["cells"].as_array().unwrap().len()).sum();
    let rows = std::fs::read_to_string(csv).unwrap().lines().count();
    assert_eq!(rows, cells + 1);
    // the summary table goes to the diagnostic stream
    assert!(String::from_utf8_lossy(&a.stderr).contains("exact identity suite"));
}

#[test]
fn haar_samples_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("haar.json");
    let out = hua(&["sample", "haar", "--group", "sp", "--n", "3", "--count", "5", "--seed", "11", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let samples: Vec<hua_lab::haar::HaarSample> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(samples.len(), 5);
    for (i, s) in samples.iter().enumerate() {
        assert_eq!((s.seed, s.index), (11, i as u64));
        assert!(s.element.matrix().unitarity_residual() < 1e-10);
    }
    assert_eq!(samples, hua_lab::haar::sample_haar(hua_lab::Group::Sp, 3, 5, 11, 0).unwrap());
}

#[test]
fn job_files_reproduce_reports() {
    let first = hua(&["verify", "pickrell", "--lambda-base", "0", "--deviations", "2:1", "--kmax", "2", "--samples", "200000", "--seed", "4"]);
    assert_eq!(first.status.code(), Some(0));
    let v = json(&first);
    assert!(v["z_score"].as_f64().unwrap().abs() <= 4.0);
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.json");
    std::fs::write(&job, v["job"].to_string()).unwrap();
    let again = hua(&["run", "--job", job.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(first.stdout, again.stdout);
}

#[test]
fn eval_families_cover_the_closed_forms() {
    let cases: [&[&str]; 5] = [
        &["--family", "jn", "--n", "2", "--lambda", "1", "--mu", "1"],
        &["--family", "ball-constant", "--group", "u", "--n", "1", "--tau", "2"],
        &["--family", "ball", "--group", "so", "--n", "1", "--lambda", "1", "--alpha", "2"],
        &["--family", "group-theta", "--group", "so", "--n", "3", "--lambda", "0,0,0", "--theta", "0,0,1"],
        &["--family", "pickrell", "--lambda-base", "1", "--rule", "geometric:0.5", "--kmax", "15"],
    ];
    let expect = [1.5 * std::f64::consts::PI, std::f64::consts::PI / 2.0, f64::NAN, f64::NAN, f64::NAN];
    for (args, want) in cases.iter().zip(expect) {
        let mut full = vec!["eval", "rhs"];
        full.extend_from_slice(args);
        let out = hua(&full);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out)["value"][0].as_f64().unwrap();
        assert!(v.is_finite() && v > 0.0);
        if want.is_finite() {
            assert!((v - want).abs() < 1e-12, "{args:?}: {v}");
        }
    }
}
