use std::fs;
use std::io::Write;

use qprotect::cli::{run, EXIT_DEGENERATE, EXIT_OK, EXIT_USAGE};

const POINT: [&str; 16] = [
    "--theta", "1.0471975512", "--r", "0.3", "--alpha", "0", "--p", "0.5", "--p1", "0", "--p2",
    "0", "--gamma-plus", "0", "--gamma-minus", "0",
];

fn argv<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["qprotect"];
    v.extend(head);
    v.extend(tail);
    v
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.txt");
    let o = out.to_str().unwrap();
    assert_eq!(run(argv(&["simulate", "-o", o], &POINT)), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "G=1.000000"), "{text}");

    let mut bad = POINT;
    bad[7] = "1.5";
    assert_eq!(run(argv(&["simulate"], &bad)), EXIT_USAGE);
    assert_eq!(run(["qprotect", "simulate", "--theta", "1"]), EXIT_USAGE);

    // projective preweak with both postweak branches fully abandoning
    let mut gone = POINT;
    gone[3] = "0";
    gone[7] = "1";
    gone[9] = "1";
    gone[11] = "1";
    assert_eq!(run(argv(&["simulate"], &gone)), EXIT_DEGENERATE);
}

#[test]
fn verify_subcommand_passes() {
    assert_eq!(run(["qprotect", "verify", "--draws", "200", "--seed", "42"]), EXIT_OK);
}

#[test]
fn trace_check_passes() {
    assert_eq!(run(argv(&["trace", "--input-state", "minus", "--check"], &POINT)), EXIT_OK);
}

#[test]
fn sweep_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let code = run([
        "qprotect", "sweep", "--theta", "60", "--deg", "--r", "0.5", "--alpha-grid", "0:90:45",
        "--p-grid", "0:1:0.5", "--definite", "--seed", "3", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# tool: qprotect "));
    assert!(text.contains("# seed: 3\n"));
    assert!(!text.contains('\r'));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0].split(',').count(), 17);
    assert_eq!(rows.len(), 1 + 3 * 3);
    // angles were converted to radians
    assert!(rows[1].starts_with("1.0471975512,"), "{}", rows[1]);
}

#[test]
fn sweep_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    let code = run([
        "qprotect", "sweep", "--theta", "1", "--r", "0.5", "--alpha-grid", "0", "--p-grid",
        "0:1:0.5", "--definite", "--format", "json", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines[0].get("meta").is_some());
    assert_eq!(lines.len(), 4);
    assert!(lines[1]["G"].as_f64().unwrap() > 0.999_999);
}

#[test]
fn oversized_grid_is_refused_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("big.csv");
    let code = run([
        "qprotect", "sweep", "--theta", "1", "--r", "0.5", "--cap", "10", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!out.exists());
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    let mut f = fs::File::create(&cfg).unwrap();
    writeln!(f, "# comment\ntheta = 0.5\nr = 0.9\nalpha-grid = 0\np-grid = 0.5\ndefinite = true").unwrap();
    drop(f);
    let out = dir.path().join("s.csv");
    let code = run([
        "qprotect", "--config", cfg.to_str().unwrap(), "sweep", "--r", "0.2", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("# config: r=0.2\n"), "{text}");
    assert!(text.contains("# config: theta=0.5\n"));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "thetta = 1\n").unwrap();
    let code = run(["qprotect", "--config", bad.to_str().unwrap(), "sweep", "--r", "0.2"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn heatmap_matrix_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let code = run([
        "qprotect", "heatmap", "--r", "1", "--axis1", "s-plus:0:1:0.5", "--axis2",
        "theta:0:1.5:0.5", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
}

#[test]
fn compare_and_definite_opt_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let common = ["--theta", "0.5235987756", "--s-plus", "0.3333333333", "--r", "0.8"];
    let o = out.to_str().unwrap();
    assert_eq!(run(argv(&["definite-opt", "-o", o], &common)), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let fams: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(fams, ["gqcc", "qcc", "helstrom", "ffc"]);

    assert_eq!(run(argv(&["compare", "--definite", "--baseline", "helstrom", "-o", o], &common)), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let row = text.lines().last().unwrap();
    let delta: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(delta > 0.0, "{row}");
    assert_eq!(run(argv(&["compare", "--baseline", "gqcc"], &common)), EXIT_USAGE);
}

#[test]
fn validate_closed_form_emits_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.jsonl");
    let code = run([
        "qprotect", "validate-closed-form", "--theta", "0.3", "--r", "1", "--alpha-points", "8",
        "--p-points", "5", "--gamma-points", "8", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    assert!(text.contains("reduced_fidelity_r1_bound"));
}
