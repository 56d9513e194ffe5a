use std::process::Command;

fn tuner() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sspe-tuner"))
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"env": {"horizon": 5}, "training": {"episodes": 1}}"#).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"env": {"horizon": 0}, "surprise": 1}"#).unwrap();
    let out = dir.path().join("run");

    let ok = tuner().args(["train", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(summary["steps"], 5);

    let invalid = tuner().args(["oracle", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(invalid.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("surprise"));

    let missing = tuner()
        .args(["compare", "--config"])
        .arg(&good)
        .arg("--checkpoint")
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"env": {"horizon": 5}, "training": {"episodes": 1}}"#).unwrap();
    let run = |seed: &str, out: &str| {
        let o = dir.path().join(out);
        let s = tuner().args(["train", "--seed", seed, "--config"]).arg(&cfg).arg("--out").arg(&o).status().unwrap();
        assert!(s.success());
        std::fs::read(o.join("rewards.csv")).unwrap()
    };
    assert_eq!(run("4", "a"), run("4", "b"));
    assert_ne!(run("4", "c"), run("5", "d"));
}
