use std::fs;
use std::process::{Command, Output};

fn locprob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locprob"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8")
}

const ESTIMATE: [&str; 12] = [
    "estimate", "--n", "300", "--a", "0.2", "--b", "0.099", "--seed", "1", "--trials", "1000", "--quiet",
];

#[test]
fn estimate_is_byte_identical() {
    let first = locprob(&ESTIMATE);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = locprob(&ESTIMATE);
    assert_eq!(first.stdout, second.stdout);
    for workers in ["1", "4"] {
        let mut args = ESTIMATE.to_vec();
        args.extend(["--workers", workers]);
        assert_eq!(locprob(&args).stdout, first.stdout, "workers={workers}");
    }
}

#[test]
fn csv_layout() {
    let out = locprob(&ESTIMATE);
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# locprob "), "{comment}");
    assert!(comment.contains("\"seed\":1"), "{comment}");
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    for col in [
        "n",
        "k",
        "a",
        "b",
        "p_f",
        "p_loc",
        "method",
        "variant",
        "trials",
        "successes",
        "ci_low",
        "ci_high",
        "seed",
        "protocol",
    ] {
        assert!(header.contains(&col), "missing {col}");
    }
    assert_eq!(lines.count(), 1);
}

#[test]
fn threshold_reports_both_values() {
    let out = locprob(&["threshold", "--n", "300", "--b", "0.15"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let closed: f64 = row[3].parse().unwrap();
    let numeric: f64 = row[4].parse().unwrap();
    assert!((closed - 0.70172).abs() < 1e-5);
    assert!((numeric - 0.70172).abs() < 1e-3);
}

#[test]
fn figure_to_file_with_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.csv");
    let out = locprob(&["figure", "fig1", "--check", "--quiet", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2 + 18 * 101);
}

#[test]
fn invalid_inputs_exit_one() {
    assert_eq!(locprob(&["figure", "fig5"]).status.code(), Some(1));
    assert_eq!(
        locprob(&["estimate", "--n", "300", "--a", "0.2", "--b", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        locprob(&["estimate", "--n", "300", "--a", "0.2", "--b", "0.1", "--trials", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(locprob(&["threshold", "--n", "300"]).status.code(), Some(1));
    assert_eq!(locprob(&["frobnicate"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"mode":"analytic","n":[],"a":[0.2],"b":[0.3]}"#).unwrap();
    let out = locprob(&["sweep", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty grid"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ not json").unwrap();
    assert_eq!(locprob(&["sweep", broken.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(locprob(&["sweep", "/nonexistent/config.json"]).status.code(), Some(1));
}

#[test]
fn unstable_method_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("shadow.json");
    fs::write(
        &config,
        r#"{"mode":"shadow","n":50,"k":10,"b_o":0.2,"method":"alternating_sum"}"#,
    )
    .unwrap();
    let out = locprob(&["sweep", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    let out = dir.path().join("sim.csv");
    fs::write(
        &config,
        r#"{"mode":"simulate","n":100,"a":[0.2,0.5],"b":0.3,"trials":50,"seed":3}"#,
    )
    .unwrap();
    let run = locprob(&[
        "sweep",
        config.to_str().unwrap(),
        "--trials",
        "20",
        "--protocol",
        "all",
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"trials\":20"));
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",all/fixed")), "{rows:?}");
}

#[test]
fn paper_variant_propagates() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("anchor.json");
    fs::write(&config, r#"{"mode":"analytic","n":4,"a":0,"b":0.7071067811865476}"#).unwrap();
    let paper = stdout(&locprob(&["sweep", config.to_str().unwrap(), "--variant", "paper"]));
    let row: Vec<&str> = paper.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[6], "closed_paper");
    assert!((row[4].parse::<f64>().unwrap() - 1.125).abs() < 1e-9);
}
