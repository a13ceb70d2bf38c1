use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fuzzkb"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fuzzkb")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

/// Synthetic split plus 1p queries and a briefly trained checkpoint.
struct Fixture {
    _tmp: TempDir,
    kb: PathBuf,
    queries: PathBuf,
    ckpt: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = TempDir::new().unwrap();
    let kb = tmp.path().join("kb");
    let queries = tmp.path().join("q");
    let ckpt = tmp.path().join("model.bin");
    ok(&["synth", "--out", s(&kb), "--seed", "0"]);
    ok(&["sample", "--kb", s(&kb), "--out", s(&queries), "--split", "train", "--enumerate"]);
    for split in ["valid", "test"] {
        ok(&["sample", "--kb", s(&kb), "--out", s(&queries), "--split", split, "--enumerate"]);
    }
    ok(&[
        "train",
        "--kb",
        s(&kb),
        "--queries",
        s(&queries),
        "--checkpoint",
        s(&ckpt),
        "--dim",
        "8",
        "--max-steps",
        "30",
        "--batch-size",
        "32",
        "--valid-interval",
        "10",
    ]);
    Fixture {
        _tmp: tmp,
        kb,
        queries,
        ckpt,
    }
}

#[test]
fn help_lists_commands_and_training_fields() {
    let top = ok(&["--help"]);
    for cmd in ["ingest", "synth", "sample", "train", "eval", "answer", "gradcheck"] {
        assert!(top.contains(cmd), "{cmd} missing from help");
    }
    let train = ok(&["train", "--help"]);
    for flag in [
        "--lr",
        "--dim",
        "--batch-size",
        "--max-steps",
        "--patience",
        "--tnorm",
        "--seed",
        "--no-ins",
        "--config",
    ] {
        assert!(train.contains(flag), "{flag} missing from train help");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["sample", "--kb", "x", "--out", "y", "--split", "nope"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nothing");
    let out = run(&["eval", "--kb", s(&missing), "--queries", s(&missing), "--checkpoint", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn ingest_and_sample_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let src = tmp.path().join("src");
    ok(&["synth", "--out", s(&src), "--seed", "3"]);
    let mut outputs = Vec::new();
    for i in 0..2 {
        let kb = tmp.path().join(format!("kb{i}"));
        let q = tmp.path().join(format!("q{i}"));
        ok(&[
            "ingest",
            "--tbox",
            s(&src.join("tbox.tsv")),
            "--abox-ee",
            s(&src.join("abox_ee.tsv")),
            "--abox-ec",
            s(&src.join("abox_ec.tsv")),
            "--out",
            s(&kb),
            "--threshold",
            "1",
            "--seed",
            "5",
        ]);
        ok(&["sample", "--kb", s(&kb), "--out", s(&q), "--type", "1p,2p,2i", "--n", "30", "--seed", "2"]);
        outputs.push((read_dir_sorted(&kb), read_dir_sorted(&q)));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].1.len(), 3);
}

#[test]
fn trained_model_answers_and_evaluates() {
    let f = fixture();
    let text = ok(&[
        "answer",
        "--kb",
        s(&f.kb),
        "--checkpoint",
        s(&f.ckpt),
        "-q",
        "(p r0 (e e000))",
        "-k",
        "3",
    ]);
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    assert!(!rows.is_empty() && rows.len() <= 6, "{text}");
    assert!(rows.iter().all(|r| r.split('\t').count() == 3));

    let json = ok(&[
        "answer",
        "--kb",
        s(&f.kb),
        "--checkpoint",
        s(&f.ckpt),
        "-q",
        "(and (p r0 (e e000)) (p r1 (e e001)))",
        "-k",
        "2",
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);

    let report = f.kb.parent().unwrap().join("report.json");
    ok(&[
        "eval",
        "--kb",
        s(&f.kb),
        "--queries",
        s(&f.queries),
        "--checkpoint",
        s(&f.ckpt),
        "--report",
        s(&report),
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let text = v.to_string();
    assert!(text.contains("TBox") && text.contains("ABox") && text.contains("\"avg\""));
}

#[test]
fn bad_query_and_k_zero_are_rejected() {
    let f = fixture();
    let base = ["answer", "--kb", s(&f.kb), "--checkpoint", s(&f.ckpt)];
    let mut a = base.to_vec();
    a.extend(["-q", "(p r0 (e nobody))"]);
    assert_eq!(run(&a).status.code(), Some(2));
    let mut a = base.to_vec();
    a.extend(["-q", "(p r0 (e e000)", "-k", "1"]);
    assert_eq!(run(&a).status.code(), Some(2));
    let mut a = base.to_vec();
    a.extend(["-q", "(p r0 (e e000))", "-k", "0"]);
    assert_eq!(run(&a).status.code(), Some(2));
}

#[test]
fn one_more_hop_needs_a_degraded_checkpoint() {
    let f = fixture();
    let out = run(&[
        "eval",
        "--kb",
        s(&f.kb),
        "--queries",
        s(&f.queries),
        "--checkpoint",
        s(&f.ckpt),
        "--mode",
        "one-more-hop",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_and_flags_override() {
    let f = fixture();
    let dir = f.kb.parent().unwrap();
    let saved = dir.join("run.toml");
    let ckpt = dir.join("m2.bin");
    ok(&[
        "train",
        "--kb",
        s(&f.kb),
        "--queries",
        s(&f.queries),
        "--checkpoint",
        s(&ckpt),
        "--dim",
        "8",
        "--max-steps",
        "5",
        "--save-config",
        s(&saved),
    ]);
    let text = fs::read_to_string(&saved).unwrap();
    assert!(text.contains("dim = 8") && text.contains("max_steps = 5"), "{text}");
    let ckpt2 = dir.join("m3.bin");
    ok(&[
        "train",
        "--config",
        s(&saved),
        "--kb",
        s(&f.kb),
        "--queries",
        s(&f.queries),
        "--checkpoint",
        s(&ckpt2),
        "--max-steps",
        "6",
    ]);
    assert_ne!(fs::read(&ckpt).unwrap(), fs::read(&ckpt2).unwrap());
    // a file with an unknown key is a configuration error
    let bad = dir.join("bad.toml");
    fs::write(&bad, "[train]\nlearning_rate = 0.1\n").unwrap();
    let out = run(&["train", "--config", s(&bad), "--kb", s(&f.kb), "--queries", s(&f.queries)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_command_passes() {
    let text = ok(&["gradcheck", "--dim", "4", "--entities", "12", "--concepts", "4"]);
    assert!(!text.is_empty());
}

#[test]
fn degraded_training_supports_one_more_hop() {
    let f = fixture();
    let dir = f.kb.parent().unwrap();
    let q = dir.join("hop");
    ok(&["sample", "--kb", s(&f.kb), "--out", s(&q), "--split", "train", "--enumerate"]);
    ok(&["sample", "--kb", s(&f.kb), "--out", s(&q), "--split", "test", "--type", "ip", "--n", "10"]);
    let ckpt = dir.join("degraded.bin");
    ok(&[
        "train",
        "--kb",
        s(&f.kb),
        "--queries",
        s(&q),
        "--checkpoint",
        s(&ckpt),
        "--dim",
        "8",
        "--max-steps",
        "10",
        "--degrade",
    ]);
    let table = ok(&[
        "eval",
        "--kb",
        s(&f.kb),
        "--queries",
        s(&q),
        "--checkpoint",
        s(&ckpt),
        "--mode",
        "one-more-hop",
    ]);
    assert!(table.contains("TBox") && table.contains("ip"), "{table}");
    // a degraded checkpoint does not fit the standard evaluation
    let out = run(&["eval", "--kb", s(&f.kb), "--queries", s(&q), "--checkpoint", s(&ckpt)]);
    assert_eq!(out.status.code(), Some(2));
}
