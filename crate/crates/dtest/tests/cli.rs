//! End-to-end CLI tests: report payloads, exit codes, golden error objects,
//! and JSON-schema conformance of every command's output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

fn stderr_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stderr).expect("stderr is JSON")
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn assert_matches_golden(bytes: &[u8], name: &str) {
    let expected = std::fs::read(golden_path(name))
        .unwrap_or_else(|e| panic!("missing golden file {name}: {e}"));
    assert_eq!(
        bytes,
        expected.as_slice(),
        "output differs from golden {name}:\n{}",
        String::from_utf8_lossy(bytes)
    );
}

fn five_by_31_csv() -> String {
    let mut csv = String::from("id");
    for j in 0..31 {
        csv.push_str(&format!(",d{j}"));
    }
    csv.push('\n');
    for i in 0..5 {
        csv.push_str(&format!("asset{i}"));
        for j in 0..31 {
            csv.push_str(&format!(",{}", ((i * 13 + j * 7) % 17) as f64 * 0.25));
        }
        csv.push('\n');
    }
    csv
}

#[test]
fn discretize_sign_5x31_to_5x30() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "prices.csv", &five_by_31_csv());
    let output_path = dir.path().join("disc.csv");
    let out = dtest(&[
        "discretize",
        "--input",
        input.to_str().unwrap(),
        "--header",
        "--method",
        "sign",
        "--output",
        output_path.to_str().unwrap(),
        "--stable",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["results"]["rows"], 5);
    assert_eq!(report["results"]["cols"], 30);
    assert_eq!(report["elapsed_ms"], 0);

    let written = std::fs::read_to_string(&output_path).unwrap();
    let lines: Vec<&str> = written.lines().collect();
    assert_eq!(lines.len(), 6); // header + 5 rows
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 31); // label + 30 symbols
        assert!(cells[1..].iter().all(|c| *c == "0" || *c == "1"));
    }
}

#[test]
fn tests_command_lists_minimal_tests() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "m.csv", "a,0,0\nb,1,1\n");
    let out = dtest(&["tests", "--input", input.to_str().unwrap(), "--stable"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    let tests = report["results"]["tests"].as_array().unwrap();
    let columns: Vec<Vec<u64>> = tests
        .iter()
        .map(|t| {
            t["columns"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(columns, vec![vec![0], vec![1]]);
    assert_eq!(report["results"]["min_length"], 1);
    assert_eq!(report["results"]["exhausted"], true);
    assert_eq!(report["results"]["budget_hit"], "none");
}

#[test]
fn duplicate_rows_exit_3_with_pair_list() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "dup.csv", "a,0,1\nb,0,1\nc,1,0\n");
    let out = dtest(&["tests", "--input", input.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
    assert!(out.stdout.is_empty());
    assert_matches_golden(&out.stderr, "error_indistinguishable.json");
    let error = stderr_json(&out);
    assert_eq!(error["error"]["kind"], "indistinguishable-rows");
    assert_eq!(error["error"]["details"]["pairs"][0][0], "a");
    assert_eq!(error["error"]["details"]["pairs"][0][1], "b");
}

#[test]
fn quantile_with_one_level_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "raw.csv", "a,1.0,2.0\n");
    let out = dtest(&[
        "discretize",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "quantile",
        "--levels",
        "1",
        "--output",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert_matches_golden(&out.stderr, "error_levels1.json");
}

#[test]
fn oversized_exact_exits_4() {
    let out = dtest(&[
        "prob", "rows", "--n", "1000000", "--m", "4096", "--k", "2", "--exact",
    ]);
    assert_eq!(exit_code(&out), 4);
    assert_matches_golden(&out.stderr, "error_exact_intractable.json");
}

#[test]
fn zero_trials_exits_2() {
    let out = dtest(&["mc", "rows", "--n", "2", "--ks", "2,2", "--trials", "0", "--seed", "1"]);
    assert_eq!(exit_code(&out), 2);
    assert_eq!(stderr_json(&out)["error"]["kind"], "parameter");
}

#[test]
fn sign_on_single_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "one.csv", "a,1.0\nb,2.0\nc,3.0\n");
    let out = dtest(&[
        "discretize",
        "--input",
        input.to_str().unwrap(),
        "--method",
        "sign",
        "--output",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert_eq!(stderr_json(&out)["error"]["kind"], "shape");
}

#[test]
fn cluster_reports_matching_submatrices() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "m.csv", "a,0,1\nb,0,1\nc,1,0\n");

    let all = dtest(&["cluster", "--input", input.to_str().unwrap(), "--stable"]);
    assert_eq!(exit_code(&all), 0);
    let report = stdout_json(&all);
    let clusters = report["results"]["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2);
    assert_eq!(clusters[0]["rows"], serde_json::json!(["a", "b"]));
    assert_eq!(clusters[0]["matching_submatrix"], true);
    assert_eq!(clusters[1]["matching_submatrix"], false);

    let empty = dtest(&[
        "cluster",
        "--input",
        input.to_str().unwrap(),
        "--columns",
        "",
        "--stable",
    ]);
    assert_eq!(exit_code(&empty), 0);
    let report = stdout_json(&empty);
    assert_eq!(report["results"]["clusters"].as_array().unwrap().len(), 1);
    assert_eq!(report["results"]["clusters"][0]["size"], 3);
    // Not computed over all columns, so never flagged as matching.
    assert_eq!(report["results"]["clusters"][0]["matching_submatrix"], false);

    let bad = dtest(&[
        "cluster",
        "--input",
        input.to_str().unwrap(),
        "--columns",
        "99",
    ]);
    assert_eq!(exit_code(&bad), 2);
    assert_eq!(stderr_json(&bad)["error"]["kind"], "column-out-of-range");
}

#[test]
fn prob_values_match_known_cases() {
    let out = dtest(&["prob", "rows", "--n", "2", "--m", "1", "--k", "2", "--stable"]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(stdout_json(&out)["results"]["float"], 0.5);

    let out = dtest(&[
        "prob", "matching-test", "--n", "2", "--ks", "2,2", "--l", "1", "--stable",
    ]);
    assert_eq!(exit_code(&out), 0);
    assert_eq!(stdout_json(&out)["results"]["float"], 0.75);

    let out = dtest(&["prob", "rows", "--n", "2", "--ks", "2,3", "--exact", "--stable"]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["results"]["exact"]["numerator"], "1");
    assert_eq!(report["results"]["exact"]["denominator"], "6");
}

#[test]
fn prob_requires_exactly_one_profile_form() {
    let neither = dtest(&["prob", "rows", "--n", "2"]);
    assert_eq!(exit_code(&neither), 2);
    let both = dtest(&["prob", "rows", "--n", "2", "--ks", "2,2", "--m", "2", "--k", "2"]);
    assert_eq!(exit_code(&both), 2);
}

#[test]
fn mc_invocations_are_reproducible() {
    let args = [
        "mc", "rows", "--n", "3", "--ks", "2,2,3", "--trials", "20000", "--seed", "7",
        "--workers", "2", "--stable",
    ];
    let first = dtest(&args);
    let second = dtest(&args);
    assert_eq!(exit_code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn mc_min_length_histogram_for_two_rows() {
    let out = dtest(&[
        "mc",
        "min-length",
        "--n",
        "2",
        "--ks",
        "2,2,2,2,2,2,2,2",
        "--trials",
        "200",
        "--seed",
        "5",
        "--workers",
        "2",
        "--stable",
    ]);
    assert_eq!(exit_code(&out), 0);
    let report = stdout_json(&out);
    let histogram = report["results"]["histogram"].as_object().unwrap();
    assert!(histogram.keys().all(|k| k == "1"));
    assert_eq!(report["results"]["unresolved"], 0);
}

#[test]
fn reports_conform_to_schema() {
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/report.schema.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");

    let dir = tempfile::tempdir().unwrap();
    let raw = write_file(dir.path(), "raw.csv", &five_by_31_csv());
    let disc = dir.path().join("disc.csv");
    let disc_str = disc.to_str().unwrap().to_string();
    let raw_str = raw.to_str().unwrap().to_string();

    let invocations: Vec<Vec<&str>> = vec![
        vec![
            "discretize", "--input", &raw_str, "--header", "--method", "quantile",
            "--levels", "3", "--output", &disc_str,
        ],
        vec!["tests", "--input", &disc_str, "--header"],
        vec!["importance", "--input", &disc_str, "--header"],
        vec!["cluster", "--input", &disc_str, "--header"],
        vec!["prob", "rows", "--n", "3", "--m", "2", "--k", "2", "--exact"],
        vec!["prob", "matching-test", "--n", "2", "--ks", "2,3", "--l", "1"],
        vec!["prob", "rows", "--n", "1", "--m", "2", "--k", "2"],
        vec![
            "mc", "rows", "--n", "2", "--ks", "2,2", "--trials", "1000", "--seed", "1",
            "--workers", "1",
        ],
        vec![
            "mc", "matching-test", "--n", "2", "--ks", "2,2", "--l", "1", "--trials",
            "1000", "--seed", "1", "--workers", "1",
        ],
        vec![
            "mc", "min-length", "--n", "2", "--ks", "2,2", "--trials", "50", "--seed",
            "1", "--workers", "1",
        ],
    ];
    for args in invocations {
        let out = dtest(&args);
        assert_eq!(
            exit_code(&out),
            0,
            "{:?}: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
        let report = stdout_json(&out);
        let errors: Vec<String> = validator
            .iter_errors(&report)
            .map(|e| format!("{e}"))
            .collect();
        assert!(errors.is_empty(), "{args:?} schema errors: {errors:?}");
    }
}

#[test]
fn error_objects_conform_to_schema() {
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/error.schema.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");

    let dir = tempfile::tempdir().unwrap();
    let dup = write_file(dir.path(), "dup.csv", "a,0,1\nb,0,1\n");
    let dup_str = dup.to_str().unwrap().to_string();
    let missing = dir.path().join("missing.csv");
    let missing_str = missing.to_str().unwrap().to_string();

    let failing: Vec<(Vec<&str>, i32)> = vec![
        (vec!["tests", "--input", &dup_str], 3),
        (vec!["tests", "--input", &missing_str], 2),
        (
            vec!["prob", "rows", "--n", "99999", "--m", "4096", "--k", "2", "--exact"],
            4,
        ),
        (vec!["mc", "rows", "--n", "2", "--ks", "1,2", "--trials", "5", "--seed", "0"], 2),
    ];
    for (args, expected_code) in failing {
        let out = dtest(&args);
        assert_eq!(exit_code(&out), expected_code, "{args:?}");
        let error = stderr_json(&out);
        let errors: Vec<String> = validator
            .iter_errors(&error)
            .map(|e| format!("{e}"))
            .collect();
        assert!(errors.is_empty(), "{args:?} schema errors: {errors:?}");
    }
}

#[test]
fn stable_reports_are_byte_identical_and_timed_ones_not_zeroed() {
    let args = ["prob", "rows", "--n", "4", "--m", "3", "--k", "2", "--stable"];
    let first = dtest(&args);
    let second = dtest(&args);
    assert_eq!(first.stdout, second.stdout);

    let timed = dtest(&["prob", "rows", "--n", "4", "--m", "3", "--k", "2"]);
    let report = stdout_json(&timed);
    assert!(report["elapsed_ms"].is_u64());
}
