//! End-to-end tests of the `idest` binary: exit codes, file outputs, and
//! byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn idest(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idest"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_line_fixture(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("line.csv");
    std::fs::write(&path, "0,0\n1,0\n3,0\n").unwrap();
    path
}

#[test]
fn estimate_smoke_on_a_tiny_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_line_fixture(dir.path());
    let out = idest(
        dir.path(),
        &[
            "estimate",
            "line.csv",
            "--method",
            "twonn-mle",
            "--level",
            "0.95",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("line.estimate.json")).unwrap(),
    )
    .unwrap();
    assert!(json["d_hat"].as_f64().unwrap().is_finite());
    assert_eq!(json["method"], "twonn-mle");

    let csv = std::fs::read_to_string(dir.path().join("line.estimate.csv")).unwrap();
    assert!(csv.starts_with("method,d_hat,interval_low,interval_high,level,n_eff,scale"));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("line.estimate.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(manifest["input_digest"].as_str().unwrap().len() == 64);
    assert!(manifest["timestamp"].is_string());
}

#[test]
fn insufficient_neighbor_order_suggests_the_needed_k() {
    let dir = tempfile::tempdir().unwrap();
    write_line_fixture(dir.path());
    let out = idest(
        dir.path(),
        &[
            "estimate", "line.csv", "--method", "gride", "--n1", "20", "--n2", "40", "--k", "10",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--k 40"), "stderr: {stderr}");
}

#[test]
fn repeated_seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let gen = idest(
        dir.path(),
        &[
            "generate",
            "spiral",
            "--n",
            "400",
            "--seed",
            "1",
            "spiral.csv",
        ],
    );
    assert!(gen.status.success());

    for output in ["a.json", "b.json"] {
        let out = idest(
            dir.path(),
            &[
                "estimate",
                "spiral.csv",
                "--method",
                "gride",
                "--n1",
                "2",
                "--n2",
                "4",
                "--uncertainty",
                "bootstrap",
                "--bootstrap-reps",
                "50",
                "--seed",
                "7",
                "--output",
                output,
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b, "seeded estimate JSON must be byte-identical");
}

#[test]
fn generate_rejects_missing_required_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = idest(dir.path(), &["generate", "pivot", "--n", "100", "out.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generated_files_reload_through_the_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let gen = idest(
        dir.path(),
        &[
            "generate",
            "hypercube",
            "--n",
            "500",
            "--d",
            "2",
            "--seed",
            "9",
            "cube.csv",
        ],
    );
    assert!(gen.status.success());
    let rows = std::fs::read_to_string(dir.path().join("cube.csv")).unwrap();
    assert_eq!(rows.lines().count(), 500);

    let est = idest(
        dir.path(),
        &["estimate", "cube.csv", "--method", "twonn-ls"],
    );
    assert!(
        est.status.success(),
        "{}",
        String::from_utf8_lossy(&est.stderr)
    );
}

#[test]
fn duplicate_rows_fail_unless_deduped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.csv");
    std::fs::write(&path, "0,0\n1,0\n0,0\n3,0\n").unwrap();

    let out = idest(
        dir.path(),
        &["estimate", "dup.csv", "--method", "twonn-mle"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("degenerate distance"), "stderr: {stderr}");

    let deduped = idest(
        dir.path(),
        &["estimate", "dup.csv", "--method", "twonn-mle", "--dedupe"],
    );
    assert!(deduped.status.success());
}

#[test]
fn sweep_outputs_a_wellformed_table() {
    let dir = tempfile::tempdir().unwrap();
    let gen = idest(
        dir.path(),
        &[
            "generate",
            "hypercube",
            "--n",
            "400",
            "--d",
            "2",
            "--seed",
            "2",
            "cube.csv",
        ],
    );
    assert!(gen.status.success());

    let sweep = idest(
        dir.path(),
        &["sweep", "cube.csv", "--n1-max", "4", "--seed", "5"],
    );
    assert!(
        sweep.status.success(),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );

    let csv = std::fs::read_to_string(dir.path().join("cube.sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n1,n2,mean_scale,d_hat,ci_low,ci_high,level,n_eff,method"
    );
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        for numeric in &fields[..8] {
            assert!(numeric.parse::<f64>().is_ok(), "field {numeric:?}");
        }
        rows += 1;
    }
    assert_eq!(rows, 3); // n1 in {1, 2, 4}

    let decimation = idest(
        dir.path(),
        &[
            "sweep",
            "cube.csv",
            "--protocol",
            "decimation",
            "--halvings",
            "1",
            "--replicates",
            "2",
            "--seed",
            "5",
            "--output",
            "dec.csv",
        ],
    );
    assert!(decimation.status.success());
    let csv = std::fs::read_to_string(dir.path().join("dec.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + 2 steps
}

#[test]
fn knn_subcommand_exports_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    write_line_fixture(dir.path());

    let missing = idest(dir.path(), &["knn", "line.csv"]);
    assert_eq!(missing.status.code(), Some(2));

    let out = idest(dir.path(), &["knn", "line.csv", "--k", "2"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("line.knn.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "point_index,order,distance,neighbor_index");
    assert_eq!(lines[1], "0,1,1,1");
    assert_eq!(lines[2], "0,2,3,2");
    assert_eq!(lines.len(), 7);
}

#[test]
fn knn_cache_is_reused_on_the_second_run() {
    let dir = tempfile::tempdir().unwrap();
    let gen = idest(
        dir.path(),
        &[
            "generate",
            "hypercube",
            "--n",
            "300",
            "--d",
            "2",
            "--seed",
            "3",
            "cube.csv",
        ],
    );
    assert!(gen.status.success());

    let first = idest(
        dir.path(),
        &[
            "estimate",
            "cube.csv",
            "--method",
            "twonn-mle",
            "--knn-cache",
        ],
    );
    assert!(first.status.success());
    assert!(String::from_utf8_lossy(&first.stderr).contains("cached kNN table at"));

    let second = idest(
        dir.path(),
        &[
            "estimate",
            "cube.csv",
            "--method",
            "twonn-mle",
            "--knn-cache",
        ],
    );
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stderr).contains("using cached kNN table"));

    // Cached and uncached runs agree bit-for-bit.
    let cached: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("cube.estimate.json")).unwrap(),
    )
    .unwrap();
    let fresh = idest(
        dir.path(),
        &[
            "estimate",
            "cube.csv",
            "--method",
            "twonn-mle",
            "--output",
            "fresh.json",
        ],
    );
    assert!(fresh.status.success());
    let fresh: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fresh.json")).unwrap())
            .unwrap();
    assert_eq!(cached["d_hat"], fresh["d_hat"]);
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let gen = idest(
        dir.path(),
        &[
            "generate",
            "hypercube",
            "--n",
            "400",
            "--d",
            "3",
            "--seed",
            "4",
            "cube.csv",
        ],
    );
    assert!(gen.status.success());
    let run = |threads: &str, output: &str| {
        let out = idest(
            dir.path(),
            &[
                "estimate",
                "cube.csv",
                "--method",
                "gride",
                "--n1",
                "2",
                "--n2",
                "4",
                "--uncertainty",
                "bootstrap",
                "--bootstrap-reps",
                "64",
                "--seed",
                "11",
                "--threads",
                threads,
                "--output",
                output,
            ],
        );
        assert!(out.status.success());
        std::fs::read(dir.path().join(output)).unwrap()
    };
    assert_eq!(run("1", "t1.json"), run("2", "t2.json"));
}
