use std::path::Path;
use std::process::{Command, Output};

fn wizard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wizard-rl")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: [&str; 8] = [
    "--set",
    "dqn.hidden=16,16,16",
    "--set",
    "dqn.batch_size=32",
    "--set",
    "train.window=50",
    "--set",
    "dqn.play_capacity=5000",
];

fn train_tiny(out: &Path, seed: &str) -> Output {
    let mut args = vec!["train-dqn", "--rounds", "1..2", "--seed", seed, "--total", "300", "--quiet"];
    args.extend(TINY);
    args.extend(["--out", out.to_str().unwrap()]);
    wizard(&args)
}

#[test]
fn unknown_subcommand_fails() {
    let o = wizard(&["frobnicate"]);
    assert!(!o.status.success());
}

#[test]
fn training_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = wizard(&["train-dqn", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_key() {
    let o = wizard(&["eval-accuracy", "--agents", "random,random,random,random", "--seed", "1", "--set", "dqn.colour=3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dqn.colour"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[dqn]\nlearning_rate = fast\n").unwrap();
    let o = wizard(&["train-dqn", "--seed", "1", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dqn.learning_rate"), "{}", stderr(&o));
}

#[test]
fn bad_agent_specs_are_reported() {
    let o = wizard(&["eval-accuracy", "--agents", "random,random,random", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = wizard(&["eval-accuracy", "--agents", "dqn:/nonexistent,random,random,random", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent"), "{}", stderr(&o));
}

#[test]
fn random_evaluation_prints_csv() {
    let o = wizard(&["eval-accuracy", "--agents", "random,rule,random,rule", "--round", "3", "--n", "50", "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("round,seed,rounds_per_position,scope,index,agent"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("3,4,50,")).count(), 8);
}

#[test]
fn train_inspect_evaluate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = train_tiny(out, "3");
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["round_01.wnn", "round_02.wnn", "progress_round_01.csv", "progress_round_02.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let o = wizard(&["inspect-checkpoint", out.join("round_02.wnn").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("play."), "{}", stdout(&o));

    let bytes = std::fs::read(out.join("round_02.wnn")).unwrap();
    let cut = out.join("cut.wnn");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let o = wizard(&["inspect-checkpoint", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cut.wnn"), "{}", stderr(&o));

    let ck = out.to_str().unwrap();
    let agents = format!("dqn:{ck},random,tree:{ck}:uniform:k=2,rule");
    let reports = out.join("reports");
    let o = wizard(&[
        "eval-accuracy", "--agents", &agents, "--rounds", "1..2", "--n", "20", "--seed", "5", "--out",
        reports.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(reports.join("accuracy_round_02.csv").exists());

    let o = wizard(&[
        "eval-winshare", "--agents", &format!("dqn:{ck},random,random,random"), "--games", "10", "--max-round", "2",
        "--seed", "5", "--out", reports.to_str().unwrap(), "--json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(reports.join("winshare_r02.csv").exists());

    for (family, input) in [
        ("fig2", out.join("progress_round_01.csv")),
        ("fig4", reports.join("accuracy_round_01.csv")),
        ("fig12", reports.join("winshare_r02.csv")),
    ] {
        let o = wizard(&["gen-plot-data", "--family", family, input.to_str().unwrap()]);
        assert!(o.status.success(), "{family}: {}", stderr(&o));
        assert!(stdout(&o).lines().count() >= 2, "{family}: {}", stdout(&o));
    }
    let o = wizard(&[
        "gen-plot-data", "--family", "fig3",
        reports.join("accuracy_round_01.csv").to_str().unwrap(),
        reports.join("accuracy_round_02.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(train_tiny(a.path(), "8").status.success());
    assert!(train_tiny(b.path(), "8").status.success());
    for f in ["round_01.wnn", "round_02.wnn", "progress_round_02.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
