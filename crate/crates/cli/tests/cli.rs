//! End-to-end tests of the `adkit` binary: subcommand behavior, file
//! outputs and exit codes.

use std::path::PathBuf;
use std::process::Command;

fn adkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adkit"))
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("adkit-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn bench_writes_csv_and_markdown() {
    let csv_path = tmp_path("bench.csv");
    let md_path = tmp_path("bench.md");
    let status = adkit()
        .args([
            "bench",
            "--scenarios",
            "sum_of_squares",
            "--backends",
            "dual,tape",
            "--sizes",
            "16,32",
            "--prepared",
            "both",
            "--samples",
            "10",
            "--budget-ms",
            "80",
            "--out",
        ])
        .arg(&csv_path)
        .arg("--markdown")
        .arg(&md_path)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert_eq!(lines[0], adkit_harness::CSV_HEADER);
    let md = std::fs::read_to_string(&md_path).unwrap();
    assert!(md.starts_with("| scenario |"));

    std::fs::remove_file(csv_path).ok();
    std::fs::remove_file(md_path).ok();
}

#[test]
fn check_exit_zero_with_skips() {
    // skips (dual cannot do pullback) are not failures
    let status = adkit()
        .args([
            "check",
            "--scenarios",
            "stencil_vjp,sum_of_squares",
            "--backends",
            "dual,tape",
        ])
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn unknown_backend_exits_two() {
    let status = adkit()
        .args([
            "check",
            "--scenarios",
            "sum_of_squares",
            "--backends",
            "bogus",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_scenario_exits_two() {
    let out = tmp_path("unknown.csv");
    let status = adkit()
        .args(["bench", "--scenarios", "no_such", "--backends", "dual", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn composite_backends_parse_on_the_command_line() {
    let status = adkit()
        .args([
            "check",
            "--scenarios",
            "pairwise_product_hessian",
            "--backends",
            "secondorder(dual,tape),sparse(secondorder(dual,tape))",
        ])
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn pattern_subcommand_writes_text_format() {
    let out = tmp_path("pattern.txt");
    let status = adkit()
        .args(["pattern", "--scenario", "tridiagonal_stencil", "--size", "6", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("6 6\n"));
    assert_eq!(text.lines().count(), 1 + 16);
    std::fs::remove_file(out).ok();
}

#[test]
fn pattern_unknown_scenario_exits_two() {
    let out = tmp_path("nope.txt");
    let status = adkit()
        .args(["pattern", "--scenario", "nope", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
