use std::path::Path;
use std::process::{Command, Output};

use spoofsim::report::{aggregate, ExperimentReport};

fn spoofsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spoofsim")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const WEAK: &str = r#"
schema_version = 1
seed = 21
trials = 12

[experiment]
kind = "weak-perm"
l = 6
fresh = 500
distinguishers = ["coin-flip", "exact-recompute:unbounded"]
"#;

#[test]
fn run_writes_a_replayable_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "weak.toml", WEAK);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let status = spoofsim(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let load = |p: &Path| ExperimentReport::from_json(&std::fs::read_to_string(p).unwrap()).unwrap();
    let (mut ra, mut rb) = (load(&a), load(&b));
    ra.config.jobs = 0;
    rb.config.jobs = 0;
    ra.config.output = None;
    rb.config.output = None;
    assert_eq!(ra.canonical_json(), rb.canonical_json());
    assert_eq!(aggregate(&ra.config, &ra.records), ra.aggregates);

    let csv = dir.path().join("agreement.csv");
    let shown = spoofsim(&["report", a.to_str().unwrap(), "--verdict", "--csv", csv.to_str().unwrap()]);
    assert!(shown.status.success());
    let text = String::from_utf8(shown.stdout).unwrap();
    assert!(text.contains("exact-recompute:unbounded"));
    assert!(text.contains("training consistency"));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 13);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let no_seed = write(dir.path(), "a.toml", "schema_version = 1\n[experiment]\nkind = \"weak-perm\"\n");
    assert_eq!(spoofsim(&["run", "--config", &no_seed]).status.code(), Some(2));
    let future = write(dir.path(), "b.toml", &WEAK.replace("schema_version = 1", "schema_version = 9"));
    assert_eq!(spoofsim(&["run", "--config", &future]).status.code(), Some(2));
    let unknown = write(dir.path(), "c.toml", &format!("{WEAK}\nbogus = 1\n"));
    assert_eq!(spoofsim(&["run", "--config", &unknown]).status.code(), Some(2));
    assert_eq!(spoofsim(&["strong-sim"]).status.code(), Some(2));
    assert_eq!(spoofsim(&["strong-sim", "--config", &write(dir.path(), "d.toml", WEAK)]).status.code(), Some(2));
}

#[test]
fn gen_learn_distinguish_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "weak.toml", WEAK);
    let samples = dir.path().join("samples.json");
    let model = dir.path().join("model.spfm");
    let s = samples.to_str().unwrap();
    let m = model.to_str().unwrap();
    assert!(spoofsim(&["gen", "--config", &config, "--out", s]).status.success());
    let learned = spoofsim(&["learn", "--config", &config, "--samples", s, "--out", m]);
    assert!(learned.status.success(), "{}", String::from_utf8_lossy(&learned.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&learned.stdout).unwrap();
    let v = summary["v"].as_bool().unwrap();
    assert_eq!(&std::fs::read(&model).unwrap()[..4], b"SPFM");
    let judged = spoofsim(&["distinguish", "--samples", s, "--model", m, "--distinguisher", "exact-recompute:unbounded"]);
    assert!(judged.status.success());
    let outcome: serde_json::Value = serde_json::from_slice(&judged.stdout).unwrap();
    let expected = if v { "generalizes" } else { "memorized" };
    assert_eq!(outcome["outcome"], expected);
}

#[test]
fn kind_subcommands_run_from_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("g.spdt");
    let out = spoofsim(&[
        "diagonalize",
        "--seed",
        "1",
        "--table",
        table.to_str().unwrap(),
        "--out",
        dir.path().join("d.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(&std::fs::read(table).unwrap()[..4], b"SPDT");
    let oracle = spoofsim(&["test-oracle", "--seed", "3", "--trials", "4"]);
    assert!(oracle.status.success());
    let report = ExperimentReport::from_json(std::str::from_utf8(&oracle.stdout).unwrap()).unwrap();
    assert_eq!(report.records.len(), 4);
}

#[test]
fn pipe_oracle_answers_requests() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_spoofsim-pipe-oracle"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let m = spoofsim_core::finite_math::MatrixModP::from_rows(
        &[vec![1, 2], vec![3, 4]],
        spoofsim_core::finite_math::PrimeModulus::new(101).unwrap(),
    )
    .unwrap();
    let request = spoofsim_core::oracle::format_request(&m) + "\n";
    child.stdin.take().unwrap().write_all(request.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "10");
}
