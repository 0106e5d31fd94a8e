use std::path::Path;
use std::process::{Command, Output};

fn good(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_good")).args(args).current_dir(cwd).output().unwrap()
}

fn synth(dir: &Path) {
    let out = good(&["synth", "--seed", "5", "--n-images", "20", "--out", "syn"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_paths_resolve_against_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    std::fs::write(
        tmp.path().join("syn/good.toml"),
        "dataset = \"dataset.json\"\nsplit = \"split.json\"\nout = \"stats\"\n",
    )
    .unwrap();
    let out = good(&["--config", "syn/good.toml", "split-stats"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("syn/stats/split_stats.json").exists());
}

#[test]
fn flags_override_config_values() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    std::fs::write(
        tmp.path().join("good.toml"),
        "dataset = \"syn/dataset.json\"\nsplit = \"syn/split.json\"\nk = 0\n",
    )
    .unwrap();
    let args = ["--config", "good.toml", "pseudo-label", "--proposals", "d=syn/proposals_depth.json", "--out", "p"];
    // k = 0 from the file is rejected
    assert_eq!(good(&args, tmp.path()).status.code(), Some(5));
    let mut with_k = args.to_vec();
    with_k.extend(["--k", "2"]);
    let out = good(&with_k, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("p/pseudo_pool.json").exists());
}

#[test]
fn unknown_config_key_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "nonsense = 1\n").unwrap();
    let out = good(&["--config", "bad.toml", "split-stats", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[parse]"));
}

#[test]
fn exit_codes_follow_error_category() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = good(&["split-stats", "--dataset", "nope.json", "--out", "o"], tmp.path());
    assert_eq!(missing.status.code(), Some(3));
    std::fs::write(tmp.path().join("broken.json"), "{").unwrap();
    let broken = good(&["split-stats", "--dataset", "broken.json", "--out", "o"], tmp.path());
    assert_eq!(broken.status.code(), Some(4));
    let usage = good(&["evaluate", "--no-such-flag"], tmp.path());
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn duplicate_tags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let out = good(
        &[
            "evaluate",
            "--dataset",
            "syn/dataset.json",
            "--split",
            "syn/split.json",
            "--detections",
            "a=syn/proposals_rgb.json",
            "--detections",
            "a=syn/proposals_depth.json",
            "--out",
            "e",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(5));
}
