use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relemb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relemb")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    relemb(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The `[default: ..]` shown for `flag` in a subcommand's help.
fn help_default(sub: &str, flag: &str) -> String {
    let out = relemb(&[sub, "--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with(&format!("--{flag} ")))
        .unwrap_or_else(|| panic!("{sub} has no --{flag}:\n{text}"));
    let start = line.find("[default: ").unwrap_or_else(|| panic!("no default: {line}")) + 10;
    line[start..line[start..].find(']').unwrap() + start].to_string()
}

#[test]
fn help_shows_documented_defaults() {
    for (sub, flag, want) in [
        ("train-w2v", "dim", "300"),
        ("train-w2v", "epochs", "10"),
        ("train-w2v", "window", "full"),
        ("train-w2v", "negatives", "5"),
        ("train-transh", "dim", "50"),
        ("train-transh", "epochs", "1000"),
        ("train-transh", "lr", "0.001"),
        ("train-lstm", "lr", "0.001"),
        ("train-lstm", "batch", "1024"),
        ("corpus", "samples", "6"),
        ("corpus", "strategy", "base"),
        ("eval-complete", "negatives", "99"),
        ("train-w2v", "seed", "0"),
        ("train-w2v", "workers", "1"),
    ] {
        assert_eq!(help_default(sub, flag), want, "{sub} --{flag}");
    }
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "ingest", "synth", "split", "corpus", "train-w2v", "build-kg", "train-transh", "train-lstm", "eval-sim",
        "eval-complete", "report", "run",
    ] {
        assert_eq!(code(&[sub, "--help"]), 0, "{sub}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&["train-w2v", "--bogus"]), 1);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["corpus", "--data", "d", "--strategy", "zzz", "--out", "o"]), 1);
    assert_eq!(code(&["--workers", "0", "build-kg", "--data", "d", "--out", "o"]), 1);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "nonsense = [").unwrap();
    assert_eq!(code(&["run", "--config", s(&bad)]), 1);
    fs::write(&bad, "unknown_key = 1").unwrap();
    assert_eq!(code(&["run", "--config", s(&bad)]), 1);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let out = relemb(&["ingest", "--data", s(&p("absent")), "--out", s(&p("i"))]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("absent"), "{msg}");
    // the OS error is reported once
    assert_eq!(msg.matches("os error").count(), 1, "{msg}");

    fs::write(p("garbage.txt"), "not an embedding file\n").unwrap();
    assert_eq!(code(&["train-transh", "--triples", s(&p("garbage.txt")), "--out", s(&p("t"))]), 2);
}

#[test]
fn non_finite_training_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(
        code(&["--seed", "1", "synth", "--directors", "12", "--clusters", "2", "--actors", "30", "--out", s(&p("s"))]),
        0
    );
    let data = p("s").join("data");
    assert_eq!(code(&["corpus", "--data", s(&data), "--out", s(&p("c.txt"))]), 0);
    let out = relemb(&[
        "train-w2v", "--corpus", s(&p("c.txt")), "--dim", "8", "--epochs", "2", "--alpha", "1e200", "--out",
        s(&p("w.txt")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!p("w.txt").exists());
}

#[test]
fn outputs_get_sidecar_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    assert_eq!(code(&["synth", "--directors", "12", "--clusters", "2", "--actors", "30", "--out", s(&p("s"))]), 0);
    assert!(p("s").join("manifest.json").exists());
    assert_eq!(code(&["build-kg", "--data", s(&p("s").join("data")), "--out", s(&p("kg.tsv"))]), 0);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("kg.tsv.manifest.json")).unwrap()).unwrap();
    let outputs = m["outputs"].as_object().unwrap();
    assert_eq!(outputs.len(), 1);
    let digest = outputs.values().next().unwrap().as_str().unwrap();
    assert_eq!(digest.len(), 64);
}
