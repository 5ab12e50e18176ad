use std::process::Command;

fn adapt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adapt"))
}

#[test]
fn experiment_writes_the_three_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        "# tiny run\ndomain = sudoku\npolicies = fbca, binary\nn_players = 3\niterations = 4\nseeds = 5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = adapt()
        .args(["experiment", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["mae_report.csv", "playtraces.jsonl", "population_model.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert!(!text.is_empty(), "{f}");
    }
    let playtraces = std::fs::read_to_string(out.join("playtraces.jsonl")).unwrap();
    assert_eq!(playtraces.lines().count(), 2 * 3 * 4);
}

#[test]
fn corpus_command_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.txt");
    let status = adapt()
        .args(["corpus", "--seed", "3", "--size", "25", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let corpus = adapt_core::roguelike::Corpus::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(corpus.len(), 25);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "policies = fbca\n").unwrap();
    let out = adapt()
        .args(["experiment", "--config"])
        .arg(&config)
        .args(["--out", "unused"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
