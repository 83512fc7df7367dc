use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_patchweave"));
    c.env_remove("PATCHWEAVE_RESULTS");
    c
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_exits_zero_everywhere() {
    for sub in [
        vec![],
        vec!["extract"],
        vec!["repair"],
        vec!["campaign"],
        vec!["stats"],
        vec!["config"],
        vec!["minijava"],
        vec!["minijava", "build"],
        vec!["minijava", "test"],
    ] {
        let mut args = sub.clone();
        args.push("--help");
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{sub:?}");
        assert!(stdout(&o).contains("Usage"), "{sub:?}");
    }
}

#[test]
fn extract_matches_golden() {
    let dir = corpus().join("fixtures/extract");
    let o = run(&[
        "extract",
        "--buggy",
        path(&dir.join("Shapes.buggy.mj")),
        "--fixed",
        path(&dir.join("Shapes.fixed.mj")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let got: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let want: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn extract_identical_and_missing_files() {
    let f = corpus().join("fixtures/extract/Shapes.buggy.mj");
    let o = run(&["extract", "--buggy", path(&f), "--fixed", path(&f)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap(), serde_json::json!([]));
    let o = run(&["extract", "--buggy", "/definitely/missing.mj", "--fixed", path(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/definitely/missing.mj"));
}

#[test]
fn extract_directories() {
    let bug = corpus().join("mini/Grid-1");
    let o = run(&[
        "extract",
        "--buggy",
        path(&bug.join("buggy")),
        "--fixed",
        path(&bug.join("fixed")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let hunks: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let files: Vec<&str> = hunks
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["chunk"]["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["Grid.mj", "Point.mj"]);
}

fn report(results: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(results.join("report.json")).unwrap()).unwrap()
}

#[test]
fn repair_planted_bug_is_correct() {
    let out = tempfile::tempdir().unwrap();
    let bug = corpus().join("mini/Bank-1");
    let o = run(&["repair", "--project", path(&bug), "--results", path(out.path())]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let r = report(out.path());
    assert_eq!(r["bugs"][0]["best_verdict"], "CR");
    assert_eq!(r["totals"]["cr"], 1);
    for f in ["block.txt", "candidates.jsonl", "combined.jsonl", "verdicts.jsonl", "logs"] {
        assert!(out.path().join("Bank-1").join(f).exists(), "{f}");
    }
}

#[test]
fn repair_with_one_combination_misses_a_combined_fix() {
    let out = tempfile::tempdir().unwrap();
    let bug = corpus().join("mini/Grid-1");
    let o = run(&["repair", "--project", path(&bug), "--mc", "1", "--results", path(out.path())]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let r = report(out.path());
    assert_eq!(r["bugs"][0]["patches_examined"], 1);
    assert_ne!(r["bugs"][0]["best_verdict"], "CR");
}

#[test]
fn usage_errors_exit_two() {
    let bug = corpus().join("mini/Grid-1");
    for args in [
        vec!["repair", "--project", path(&bug), "--no-such-flag"],
        vec!["repair"],
        vec!["repair", "--project", path(&bug), "--mc", "0"],
        vec!["repair", "--project", path(&bug), "--mc", "many"],
        vec!["repair", "--project", "/no/such/project"],
        vec!["bogus"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn repair_from_candidates_file_and_external_generator() {
    let first = tempfile::tempdir().unwrap();
    let bug = corpus().join("mini/Calc-1");
    let o = run(&["repair", "--project", path(&bug), "--results", path(first.path())]);
    assert_eq!(o.status.code(), Some(0));
    let candidates = first.path().join("Calc-1/candidates.jsonl");

    let second = tempfile::tempdir().unwrap();
    let o = run(&[
        "repair",
        "--project",
        path(&bug),
        "--candidates",
        path(&candidates),
        "--results",
        path(second.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let third = tempfile::tempdir().unwrap();
    let cmd = format!("cp {} {{output}}", path(&candidates));
    let o = run(&[
        "repair",
        "--project",
        path(&bug),
        "--generator",
        &cmd,
        "--results",
        path(third.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = std::fs::read_to_string(second.path().join("report.json")).unwrap();
    let b = std::fs::read_to_string(third.path().join("report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(report(second.path())["bugs"][0]["best_verdict"], "CR");
}

#[test]
fn results_root_from_environment() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["repair", "--project", path(&corpus().join("mini/Calc-1"))])
        .env("PATCHWEAVE_RESULTS", out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.path().join("report.json").is_file());
}

#[test]
fn config_file_and_flag_overrides() {
    let o = run(&["config"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("mc = 10000"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, text.replace("mc = 10000", "mc = 1")).unwrap();
    let bug = corpus().join("mini/Grid-1");
    let res = dir.path().join("res");
    let o = run(&["repair", "--project", path(&bug), "--config", path(&cfg), "--results", path(&res)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&res)["config"]["mc"], 1);
    let o = run(&[
        "repair", "--project", path(&bug), "--config", path(&cfg), "--mc", "50", "--results", path(&res),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&res)["config"]["mc"], 50);
    std::fs::write(&cfg, "mc = 5\nunknown_key = 1\n").unwrap();
    let o = run(&["repair", "--project", path(&bug), "--config", path(&cfg), "--results", path(&res)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stats_published_empty_and_malformed() {
    let o = run(&["stats", "--results", path(&corpus().join("published/results.csv")), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["chunks"], serde_json::json!({"1": 44, "2": 18, "3": 3}));
    assert_eq!(
        v["locations"],
        serde_json::json!({"1": 37, "2": 12, "3": 7, "4": 2, "5-9": 4, ">=10": 3})
    );
    assert_eq!(v["types"]["total"], 65);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "bug_id,chunk_count,location_count,verdict\n").unwrap();
    let o = run(&["stats", "--results", path(&empty)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(">=10: 0"));
    assert!(stdout(&o).contains("total: 0"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "bug_id,chunk_count,location_count,verdict\nA-1,1,1,CR\nA-2,one,1,CR\n").unwrap();
    let o = run(&["stats", "--results", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn campaign_is_deterministic_and_honours_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "excluded_module_ids = [\"Calc\"]\n").unwrap();
    let mut reports = Vec::new();
    for k in 0..2 {
        let res = dir.path().join(format!("r{k}"));
        let o = run(&[
            "campaign",
            "--corpus",
            path(&corpus().join("mini")),
            "--bugs",
            "Calc-1,Stack-1,Bank-1",
            "--config",
            path(&cfg),
            "--jobs",
            if k == 0 { "1" } else { "3" },
            "--results",
            path(&res),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        reports.push(std::fs::read(res.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let r: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(r["excluded"], serde_json::json!(["Calc-1"]));
    assert_eq!(r["totals"]["bugs"], 2);
    let o = run(&["campaign", "--corpus", path(&corpus().join("mini")), "--bugs", "Nope-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_toolchain_commands() {
    let bug = corpus().join("mini/Calc-1");
    assert_eq!(run(&["minijava", "build", path(&bug.join("buggy"))]).status.code(), Some(0));
    let o = run(&["minijava", "test", path(&bug.join("buggy"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CalcTest.testAdd"));
    assert_eq!(run(&["minijava", "test", path(&bug.join("fixed"))]).status.code(), Some(0));
    assert_eq!(run(&["minijava", "test", "/no/such/dir"]).status.code(), Some(2));
}
