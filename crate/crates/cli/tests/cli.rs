use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use twosided::instances::binary_side_information;
use twosided::special::{dedicated_rd, degenerate_source, AvailabilityPattern};

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("specs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twosided"))
        .args(args)
        .env_remove("TWOSIDED_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn bsc_capacity_report() {
    let out = ok(&["capacity", p(&spec("bsc.json"))]);
    assert!(out.contains("capacity: 0.531004 bits"), "{out}");
    assert!(out.contains("x = f(u, s1)"));
}

#[test]
fn malformed_json_is_a_parse_error_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"channel\", ").unwrap();
    let csv = dir.path().join("out.csv");
    let o = run(&["capacity", p(&bad), "--csv", p(&csv)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!csv.exists());
}

#[test]
fn validation_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(spec("bsc.json"))
        .unwrap()
        .replace("[0.1, 0.9]", "[0.1, 0.8]");
    std::fs::write(&bad, text).unwrap();
    let o = run(&["capacity", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("channel"));
    assert!(o.stdout.is_empty());

    let o = run(&["capacity", p(&spec("binary_hamming.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["reduce", p(&spec("bsc.json")), "--pattern", "12"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn infeasible_distortion_names_d_min() {
    let o = run(&["rd", p(&spec("binary_hamming.json")), "--d=-0.1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d_min"));
}

#[test]
fn budget_and_memory_guards() {
    let o = run(&[
        "capacity",
        p(&spec("stuck_at.json")),
        "--oracle",
        "--max-points",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(5));
    let o = run(&[
        "simulate",
        p(&spec("stuck_at.json")),
        "--n",
        "40",
        "--rate",
        "0.4",
        "--trials",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn stuck_at_with_oracle_reports_both_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cap.csv");
    let out = ok(&[
        "capacity",
        p(&spec("stuck_at.json")),
        "--oracle",
        "--csv",
        p(&csv),
    ]);
    assert!(
        out.contains("capacity: 0.800000") && out.contains("oracle: ") && out.contains("|diff|: "),
        "{out}"
    );
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 1);
    let value: f64 = rows[0][2].parse().unwrap();
    let oracle: f64 = rows[0][3].parse().unwrap();
    let diff: f64 = rows[0][4].parse().unwrap();
    assert!((value - 0.8).abs() < 1e-2 && (oracle - 0.8).abs() < 1e-2);
    assert!((diff - (value - oracle).abs()).abs() <= 1e-6);
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("instance,u_size,value_bits,oracle_bits,diff\n"));
}

#[test]
fn hamming_points_and_sweep() {
    let out = ok(&["rd", p(&spec("binary_hamming.json")), "--d", "0.5"]);
    assert!(out.contains("= 0.000000 bits"), "{out}");

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rd.csv");
    ok(&[
        "rd",
        p(&spec("binary_hamming.json")),
        "--sweep",
        "20",
        "--csv",
        p(&csv),
    ]);
    let rows = csv_rows(&csv);
    assert!(rows.len() >= 2);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0));
    for (d, r) in pts {
        assert!((r - (1.0 - h2(d))).abs() < 2e-3, "R({d}) = {r}");
    }
}

#[test]
fn reductions() {
    let out = ok(&["reduce", p(&spec("two_state.json")), "--pattern", "00"]);
    assert!(out.trim_end().ends_with("pass"), "{out}");

    // Encoder-only state: the general value equals the no-state formula.
    let out = ok(&[
        "reduce",
        p(&spec("wyner_ziv.json")),
        "--pattern",
        "10",
        "--d",
        "0.1",
    ]);
    let src = binary_side_information(0.25).unwrap();
    let r00 = dedicated_rd(&src, AvailabilityPattern::NONE, 0.1).unwrap();
    let general: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("general:"))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((general - r00).abs() < 1e-3, "{general} vs {r00}");

    let out = ok(&[
        "reduce",
        p(&spec("wyner_ziv.json")),
        "--pattern",
        "01",
        "--d",
        "0",
    ]);
    let joint = degenerate_source(&src, AvailabilityPattern::RECEIVER).unwrap();
    let h = joint
        .source_joint()
        .conditional_entropy(&["x"], &["s2"])
        .unwrap();
    let general: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("general:"))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((general - h).abs() < 2e-3, "{general} vs {h}");
}

#[test]
fn single_trial_simulation_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv");
    ok(&[
        "simulate",
        p(&spec("stuck_at.json")),
        "--n",
        "1",
        "--rate",
        "0.4",
        "--trials",
        "1",
        "--csv",
        p(&csv),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n,error_rate,ci,e1,e2,e3\n"));
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 1);
    assert!(rows[0][1] == "0.000000" || rows[0][1] == "1.000000");
}

#[test]
fn stuck_at_error_rate_falls_with_blocklength() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv");
    ok(&[
        "simulate",
        p(&spec("stuck_at.json")),
        "--n",
        "4,8,12",
        "--rate",
        "0.4",
        "--csv",
        p(&csv),
    ]);
    let rates: Vec<f64> = csv_rows(&csv)
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn seed_flag_beats_environment() {
    let wz = spec("wyner_ziv.json");
    let args = [
        "simulate",
        p(&wz),
        "--n",
        "6",
        "--d",
        "0.1",
        "--trials",
        "200",
    ];
    let with_env = |seed: &str, extra: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_twosided"))
            .args(args)
            .args(extra)
            .env("TWOSIDED_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success());
        stdout(&o)
    };
    assert_eq!(
        with_env("1", &["--seed", "5"]),
        with_env("2", &["--seed", "5"])
    );
    assert_eq!(with_env("5", &[]), with_env("9", &["--seed", "5"]));
    assert_ne!(with_env("5", &[]), with_env("6", &[]));
}

#[test]
fn duality_table() {
    let out = ok(&["duality", "--kind", "channel"]);
    assert!(out.contains("C_10 <-> R_01"), "{out}");
    assert!(out
        .lines()
        .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["Y", "<->", "X"]));
    assert!(out
        .lines()
        .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["X", "<->", "Xhat"]));
    let out = ok(&["duality", "--kind", "source"]);
    assert!(out.contains("R_01 <-> C_10"));
    assert_eq!(run(&["duality", "--kind", "pipe"]).status.code(), Some(3));
}
