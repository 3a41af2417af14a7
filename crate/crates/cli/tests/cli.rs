//! End-to-end tests that drive the compiled `slotnav` binary as a
//! subprocess, covering the pipeline round trip, process exit codes, and
//! the rendered prompt layout.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slotnav"))
}

/// Model dimensions small enough that training steps take milliseconds.
fn tiny_model_flags() -> Vec<String> {
    [
        "model.d=8",
        "model.d_l=8",
        "model.slots=3",
        "model.ste.d_t=4",
        "model.ste.hidden=8",
        "model.ste.d_m=6",
        "model.reasoner.d_u=8",
        "model.reasoner.layers=1",
        "model.reasoner.heads=2",
        "model.reasoner.mlp_hidden=8",
    ]
    .iter()
    .flat_map(|s| [String::from("--set"), String::from(*s)])
    .collect()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn slotnav")
}

fn expect_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed: status {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gen_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let ckpt = dir.path().join("model.ckpt.json");
    let report = dir.path().join("report.json");
    let logs = dir.path().join("logs.jsonl");

    let gen = run(&[
        "gen-data",
        "--out",
        data.to_str().unwrap(),
        "--scenes",
        "1",
        "--easy",
        "4",
        "--seed",
        "7",
    ]);
    expect_ok(&gen, "gen-data");
    assert!(data.exists());
    assert!(dir.path().join("data.config.json").exists());

    let mut train_args: Vec<String> = [
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--set",
        "train.steps=3",
        "--set",
        "train.batch_size=1",
    ]
    .iter()
    .map(|s| String::from(*s))
    .collect();
    train_args.extend(tiny_model_flags());
    let train = bin().args(&train_args).output().unwrap();
    expect_ok(&train, "train");
    assert!(
        String::from_utf8_lossy(&train.stdout).contains("final loss"),
        "train should report the final loss on stdout"
    );
    assert!(ckpt.exists());

    let eval = run(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--logs",
        logs.to_str().unwrap(),
    ]);
    expect_ok(&eval, "eval");
    let table = String::from_utf8_lossy(&eval.stdout);
    for col in ["NE", "SR", "OSR", "SPL"] {
        assert!(table.contains(col), "metrics table missing {col}: {table}");
    }
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["full"]["n"].as_u64(), Some(4));
    let n_logs = std::fs::read_to_string(&logs).unwrap().lines().count();
    assert_eq!(n_logs, 4, "one trajectory log line per episode");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gen-data",
        "--out",
        dir.path().join("d.jsonl").to_str().unwrap(),
        "--easy",
        "1",
        "--set",
        "model.nonexistent=1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "stderr should explain: {err}");
}

#[test]
fn missing_dataset_exits_3() {
    let out = run(&[
        "eval",
        "--data",
        "/nonexistent/never/data.jsonl",
        "--agent",
        "replay",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn inspect_prompt_renders_sections_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let ckpt = dir.path().join("model.ckpt.json");

    let gen = run(&[
        "gen-data",
        "--out",
        data.to_str().unwrap(),
        "--easy",
        "2",
        "--seed",
        "3",
    ]);
    expect_ok(&gen, "gen-data");

    let mut train_args: Vec<String> = [
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--set",
        "train.steps=2",
        "--set",
        "train.batch_size=1",
    ]
    .iter()
    .map(|s| String::from(*s))
    .collect();
    train_args.extend(tiny_model_flags());
    expect_ok(&bin().args(&train_args).output().unwrap(), "train");

    let out = run(&[
        "inspect-prompt",
        "--data",
        data.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--steps",
        "2",
    ]);
    expect_ok(&out, "inspect-prompt");
    let text = String::from_utf8_lossy(&out.stdout);
    let sections = [
        "INSTRUCTION",
        "STATUS",
        "HISTORY WAYPOINTS",
        "CONTEXT SUMMARY",
    ];
    let positions: Vec<usize> = sections
        .iter()
        .map(|s| {
            text.find(s)
                .unwrap_or_else(|| panic!("missing section {s}: {text}"))
        })
        .collect();
    assert!(
        positions.windows(2).all(|w| w[0] < w[1]),
        "sections out of order: {positions:?}\n{text}"
    );
    assert!(text.contains("stop probability"));
}

#[test]
fn replay_agent_needs_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    expect_ok(
        &run(&[
            "gen-data",
            "--out",
            data.to_str().unwrap(),
            "--easy",
            "2",
            "--seed",
            "11",
        ]),
        "gen-data",
    );
    let out = run(&["eval", "--data", data.to_str().unwrap(), "--agent", "replay"]);
    expect_ok(&out, "replay eval");
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("1.000"), "replay should reach SR 1.0: {table}");
}

#[test]
fn grad_check_reports_every_parameter() {
    let out = run(&["grad-check", "--seed", "5"]);
    expect_ok(&out, "grad-check");
    let text = String::from_utf8_lossy(&out.stdout);
    for probe in ["shic", "ste", "pgm"] {
        assert!(
            text.contains(probe),
            "grad-check output missing {probe} probes: {text}"
        );
    }
    assert!(text.contains("0 failed"), "summary line missing: {text}");
}

/// The manifest pins the world; later stages must refuse to silently
/// reinterpret the same episodes under different physics.
#[test]
fn world_override_after_generation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    expect_ok(
        &run(&[
            "gen-data",
            "--out",
            data.to_str().unwrap(),
            "--easy",
            "1",
            "--seed",
            "2",
        ]),
        "gen-data",
    );
    let out = run(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--agent",
        "replay",
        "--set",
        "world.step_max=99",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn resume_flag_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let a = dir.path().join("a.ckpt.json");
    let b = dir.path().join("b.ckpt.json");
    expect_ok(
        &run(&[
            "gen-data",
            "--out",
            path_str(&data),
            "--easy",
            "2",
            "--seed",
            "4",
        ]),
        "gen-data",
    );
    let base: Vec<String> = ["train", "--data", data.to_str().unwrap()]
        .iter()
        .map(|s| String::from(*s))
        .collect();
    let mut first = base.clone();
    first.extend([
        String::from("--out"),
        String::from(path_str(&a)),
        String::from("--set"),
        String::from("train.steps=2"),
        String::from("--set"),
        String::from("train.batch_size=1"),
    ]);
    first.extend(tiny_model_flags());
    expect_ok(&bin().args(&first).output().unwrap(), "train 2");

    let mut second = base;
    second.extend([
        String::from("--out"),
        String::from(path_str(&b)),
        String::from("--resume"),
        String::from(path_str(&a)),
        String::from("--set"),
        String::from("train.steps=4"),
        String::from("--set"),
        String::from("train.batch_size=1"),
    ]);
    expect_ok(&bin().args(&second).output().unwrap(), "resume to 4");
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    assert_eq!(parsed["step"].as_u64(), Some(4));
}
