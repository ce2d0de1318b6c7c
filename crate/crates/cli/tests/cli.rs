use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn negotiate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negotiate"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn negotiate")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a plan into `dir` using absolute paths to the checked-in game and templates.
fn write_plan(dir: &Path, endpoints: serde_json::Value, seeds: &str) -> PathBuf {
    let plan = serde_json::json!({
        "config": repo().join("games/synthetic.json"),
        "templates": repo().join("templates"),
        "endpoints": endpoints,
        "cot": 5,
        "seeds": seeds,
        "parallelism": 2,
        "out": "out",
    });
    let path = dir.join("plan.json");
    std::fs::write(&path, serde_json::to_string_pretty(&plan).unwrap()).unwrap();
    path
}

fn oracle_run(dir: &Path, seeds: &str) -> PathBuf {
    let plan = write_plan(
        dir,
        serde_json::json!({"default": {"kind": "scripted", "policy": "oracle-negotiator"}}),
        seeds,
    );
    let out = negotiate(&["run", "--plan", path_str(&plan)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("out")
}

#[test]
fn analyze_game_matches_checked_in_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("analysis.json");
    let tsv = tmp.path().join("deals.tsv");
    let config = repo().join("games/synthetic.json");
    let out = negotiate(&[
        "analyze-game",
        "--config",
        path_str(&config),
        "--no-batna",
        "--out",
        path_str(&json),
        "--dump-deals",
        path_str(&tsv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("acceptable                91/720"), "{stdout}");
    assert!(stdout.contains("front without batna"));

    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(repo().join("games/synthetic.analysis.json")).unwrap()).unwrap();
    let ours: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(ours, golden);

    let table = std::fs::read_to_string(&tsv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 721);
    assert!(lines[0].starts_with("deal\taccept_count\tsuccess"));
    let successes = lines[1..]
        .iter()
        .filter(|l| l.split('\t').nth(2) == Some("true"))
        .count();
    assert_eq!(successes, 91);
}

#[test]
fn missing_config_is_a_config_error_naming_the_path() {
    let out = negotiate(&["analyze-game", "--config", "/no/such/game.json"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("/no/such/game.json"), "{err}");
    assert_eq!(err.matches("os error").count(), 1, "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let plan = repo().join("plans/scripted-oracle.json");
    for args in [
        vec!["run", "--plan", path_str(&plan), "--cot-row", "9"],
        vec!["run", "--plan", path_str(&plan), "--mode", "solo"],
        vec!["run", "--plan", path_str(&plan), "--seed", "1", "--seeds", "1-3"],
        vec!["frobnicate"],
    ] {
        let out = negotiate(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn run_score_and_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = oracle_run(tmp.path(), "1-4");
    for name in ["report.json", "report.txt", "manifest.json"] {
        assert!(run_dir.join(name).is_file(), "missing {name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiments"], 4);
    assert_eq!(report["failed_pct"], 0.0);
    assert_eq!(report["any_pct"], 100.0);

    let scored = tmp.path().join("scored");
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let out = negotiate(&["score", path_str(&run_dir), "--out", path_str(&scored)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        bytes.push(std::fs::read(scored.join("report.json")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], std::fs::read(run_dir.join("report.json")).unwrap());

    let plots = tmp.path().join("plots");
    let out = negotiate(&["report", path_str(&run_dir), "--out", path_str(&plots)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let progression = std::fs::read_to_string(plots.join("progression.tsv")).unwrap();
    let mut series: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    for line in progression.lines().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 4, "{line}");
        series
            .entry(fields[0].parse().unwrap())
            .or_default()
            .push(fields[1].parse().unwrap());
    }
    assert_eq!(series.keys().copied().collect::<Vec<_>>(), [1, 2, 3, 4]);
    for rounds in series.values() {
        assert!(rounds.windows(2).all(|w| w[0] < w[1]), "{rounds:?}");
    }
    let gini = std::fs::read_to_string(plots.join("gini.tsv")).unwrap();
    assert_eq!(gini.lines().count(), 5);
    for line in gini.lines().skip(1) {
        let g: f64 = line.split('\t').nth(2).unwrap().parse().unwrap();
        assert!((0.0..1.0).contains(&g));
    }
}

#[test]
fn rerun_reuses_transcripts() {
    let tmp = tempfile::tempdir().unwrap();
    oracle_run(tmp.path(), "1-2");
    let out = negotiate(&["run", "--plan", path_str(&tmp.path().join("plan.json"))]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 executed, 2 reused"));
}

#[test]
fn failed_experiments_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write_plan(
        tmp.path(),
        serde_json::json!({
            "default": {"kind": "scripted", "policy": "oracle-negotiator"},
            "parties": {"3": {"kind": "scripted", "policy": "failing", "params": {"seeds": [2]}}}
        }),
        "1-3",
    );
    let out = negotiate(&["run", "--plan", path_str(&plan)]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("1 experiment(s) failed"));

    let out = negotiate(&["score", path_str(&tmp.path().join("out"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn schema_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = oracle_run(tmp.path(), "1");
    let file = run_dir.join("transcripts").join("seed-0001.jsonl");
    let mut text = std::fs::read_to_string(&file).unwrap();
    text = text.replacen('\n', "\n{\"event\": \"bogus\"}\n", 1);
    std::fs::write(&file, text).unwrap();
    let out = negotiate(&["score", path_str(&run_dir)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("seed-0001.jsonl:2"), "{}", stderr(&out));
}

#[test]
fn incomplete_transcripts_are_skipped_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = oracle_run(tmp.path(), "1-2");
    let file = run_dir.join("transcripts").join("seed-0002.jsonl");
    let text = std::fs::read_to_string(&file).unwrap();
    let cut: Vec<&str> = text.lines().take(5).collect();
    std::fs::write(&file, cut.join("\n") + "\n").unwrap();

    let out = negotiate(&["score", path_str(&run_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("seed-0002.jsonl"), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiments"], 1);

    std::fs::remove_file(run_dir.join("transcripts").join("seed-0001.jsonl")).unwrap();
    let out = negotiate(&["score", path_str(&run_dir)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn remote_plan_without_credential_fails_every_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = repo().join("plans/remote-example.json");
    let out_dir = tmp.path().join("remote");
    let out = Command::new(env!("CARGO_BIN_EXE_negotiate"))
        .args([
            "run",
            "--plan",
            path_str(&plan),
            "--seed",
            "1",
            "--out",
            path_str(&out_dir),
        ])
        .env_remove("NEGOTIATION_API_KEY")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let plan = &manifest["plan"];
    assert_eq!(plan["endpoints"][0]["api_key_env"], "NEGOTIATION_API_KEY");
    assert_eq!(plan["endpoints"][5]["kind"], "scripted");
    assert_eq!(plan["incentives"][3]["kind"], "greedy");
    assert_eq!(
        plan["incentives"][4],
        serde_json::json!({"kind": "adversarial_targeted", "target": 1})
    );
}
