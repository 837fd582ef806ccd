use std::path::Path;
use std::process::{Command, Output};

use lmcf::dataset::read_results;

fn lmcf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LMCF_DATASET")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synth(kind: &str, dir: &Path, length: &str) {
    let out = lmcf(
        &[
            "synth",
            "--kind",
            kind,
            "--out",
            dir.to_str().unwrap(),
            "--length",
            length,
        ],
        dir.parent().unwrap(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lmcf(&[], dir.path())), 2);
    assert_eq!(code(&lmcf(&["track"], dir.path())), 2);
    assert_eq!(code(&lmcf(&["track", "--seq", "x", "--init", "1,2"], dir.path())), 2);
    assert_eq!(code(&lmcf(&["bench", "--out", "r"], dir.path())), 2);
    assert_eq!(code(&lmcf(&["--help"], dir.path())), 0);
    assert_eq!(code(&lmcf(&["--version"], dir.path())), 0);
}

#[test]
fn load_and_config_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmcf(&["track", "--seq", "missing"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));

    let seq = dir.path().join("Seq");
    synth("translate", &seq, "4");
    std::fs::write(dir.path().join("bad.cfg"), "eta = lots\n").unwrap();
    assert_eq!(
        code(&lmcf(&["track", "--seq", "Seq", "--config", "bad.cfg"], dir.path())),
        2
    );
    std::fs::write(dir.path().join("bad.cfg"), "theta = 2\n").unwrap();
    assert_eq!(
        code(&lmcf(&["track", "--seq", "Seq", "--config", "bad.cfg"], dir.path())),
        2
    );
    assert_eq!(
        code(&lmcf(&["track", "--seq", "Seq", "--config", "nope.cfg"], dir.path())),
        1
    );
    assert_eq!(
        code(&lmcf(&["bench", "--dataset", "nowhere", "--out", "r"], dir.path())),
        1
    );
}

#[test]
fn track_writes_log_and_overlays() {
    let dir = tempfile::tempdir().unwrap();
    synth("occlude", &dir.path().join("Occ"), "6");
    std::fs::write(
        dir.path().join("lmcf.cfg"),
        "# tuned\nmode = kernel-gaussian\neta = 0.02\n",
    )
    .unwrap();
    let out = lmcf(
        &[
            "track",
            "--seq",
            "Occ",
            "--config",
            "lmcf.cfg",
            "--always-update",
            "--overlay",
            "ov",
            "--jobs",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("6 frames") && stdout.contains("update rate 1.000"),
        "{stdout}"
    );
    let log = read_results(&dir.path().join("Occ.jsonl")).unwrap();
    assert_eq!(log.records.len(), 6);
    assert_eq!(log.config.eta, 0.02);
    assert!(log.config.always_update);
    assert!(log.records.iter().all(|r| r.latency_ms.is_none()));
    assert_eq!(std::fs::read_dir(dir.path().join("ov")).unwrap().count(), 6);
}

#[test]
fn init_box_allows_unannotated_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("Bare");
    synth("translate", &seq, "3");
    std::fs::remove_file(seq.join("groundtruth_rect.txt")).unwrap();
    assert_eq!(code(&lmcf(&["track", "--seq", "Bare"], dir.path())), 1);
    let out = lmcf(
        &["track", "--seq", "Bare", "--init", "44,84,32,32", "--out", "b.jsonl"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(read_results(&dir.path().join("b.jsonl")).unwrap().records.len(), 3);
}

#[test]
fn bench_reports_filtered_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    std::fs::create_dir(&ds).unwrap();
    synth("translate", &ds.join("A"), "5");
    synth("distractor", &ds.join("B"), "5");
    synth("scale-ramp", &ds.join("C"), "5");
    let out = Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(["bench", "--out", "rep", "--filter", "A,C", "--timing"])
        .current_dir(dir.path())
        .env("LMCF_DATASET", &ds)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = dir.path().join("rep");
    for f in [
        "report.json",
        "summary.txt",
        "precision_overall.csv",
        "success_overall.csv",
        "results/A.jsonl",
    ] {
        assert!(rep.join(f).is_file(), "{f}");
    }
    assert!(!rep.join("results/B.jsonl").exists());
    let report = lmcf::benchmark::BenchmarkReport::read(&rep.join("report.json")).unwrap();
    let names: Vec<&str> = report.sequences.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["A", "C"]);
    assert!(report.sequences.iter().all(|s| s.fps.is_some()));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmcf(&["selftest", "--instances", "25", "--seed", "9"], dir.path());
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7, "{stdout}");
}
