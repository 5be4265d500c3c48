use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_decompcheck"));
    c.env_remove("DECOMPCHECK_API_KEY");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/replay_fixture").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn replay_claims(dir: &Path, configuration: &str, regime: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(format!("{configuration}-{regime}.jsonl"));
    let config = fixture("config.toml");
    let mut args = vec![
        "--config",
        config.to_str().unwrap(),
        "run-claims",
        "--configuration",
        configuration,
        "--regime",
        regime,
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (run(&args), out)
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&run(&["run-claims", "--configuration", "bogus", "--out", "x"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    // no dataset anywhere
    assert_eq!(code(&run(&["validate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"record\":\"header\",\"schema_version\":\"1.0\"}\n{\"record\":\"claim\"}\n").unwrap();
    assert_eq!(code(&run(&["validate", "--dataset", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["validate", "--dataset", "/does/not/exist.jsonl"])), 2);
}

#[test]
fn backend_errors_exit_3_and_keep_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chat.toml");
    std::fs::write(
        &config,
        format!(
            "dataset = {:?}\n[backend]\nkind = \"chat\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\n[backend.retry]\nmax_retries = 0\n",
            fixture("dataset.jsonl")
        ),
    )
    .unwrap();
    let out = dir.path().join("p.jsonl");
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "run-claims",
        "--configuration",
        "vanilla",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("p.jsonl.failures.jsonl").exists());
    assert!(dir.path().join("p.jsonl.manifest.json").exists());
}

#[test]
fn partial_coverage_exits_4_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = replay_claims(dir.path(), "vanilla", "none", &["--max-calls", "5"]);
    assert_eq!(code(&o), 0);
    let ds = fixture("dataset.jsonl");
    let args = ["evaluate", "--dataset", ds.to_str().unwrap(), "--predictions", out.to_str().unwrap()];
    assert_eq!(code(&run(&args)), 4);
    let mut allowed = args.to_vec();
    allowed.push("--allow-partial");
    let o = run(&allowed);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("5/12"));
}

#[test]
fn interrupted_run_resumes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let cache = cache.to_str().unwrap();
    let (o, partial) = replay_claims(dir.path(), "sae", "oracle", &["--cache", cache, "--max-calls", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&partial).unwrap().lines().count(), 3);
    let (o, resumed) = replay_claims(dir.path(), "sae", "oracle", &["--cache", cache]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 cached, 9 generated"));

    let fresh = tempfile::tempdir().unwrap();
    let (_, straight) = replay_claims(fresh.path(), "sae", "oracle", &[]);
    assert_eq!(std::fs::read_to_string(resumed).unwrap(), std::fs::read_to_string(straight).unwrap());
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = replay_claims(dir.path(), "vanilla", "none", &["--backend", "lexical", "--backend-tag", "lex", "--seeds", "4,5"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 24);
    assert!(text.contains("\"backend_tag\":\"lex\""));
    assert!(text.contains("\"seed\":5"));
}

#[test]
fn report_formats_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (_, vanilla) = replay_claims(dir.path(), "vanilla", "none", &[]);
    let (_, sae) = replay_claims(dir.path(), "sae", "oracle", &[]);
    let manifest = std::fs::read_to_string(dir.path().join("sae-oracle.jsonl.manifest.json")).unwrap();
    let template_hash = serde_json::from_str::<serde_json::Value>(&manifest).unwrap()["template_hash"]
        .as_str()
        .unwrap()
        .to_string();
    let config = fixture("config.toml");
    let runs = [
        format!("vanilla={}", vanilla.display()),
        format!("sae={}", sae.display()),
    ];
    for format in ["markdown", "csv", "json"] {
        let o = run(&[
            "--config",
            config.to_str().unwrap(),
            "report",
            "--run",
            &runs[0],
            "--run",
            &runs[1],
            "--baseline",
            "vanilla",
            "--format",
            format,
        ]);
        assert_eq!(code(&o), 0, "{format}");
        assert!(stdout(&o).contains(&template_hash), "{format}");
    }
}

#[test]
fn profile_and_iaa_run_on_shipped_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("config.toml");
    let subs = dir.path().join("subs.jsonl");
    let o = run(&["--config", config.to_str().unwrap(), "run-subclaims", "--out", subs.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "profile",
        "--predictions",
        &format!("fixture={}", subs.display()),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["seeds"][0]["profile"]["n"], 28);

    let ds = fixture("dataset.jsonl");
    let o = run(&["iaa", "--a", ds.to_str().unwrap(), "--b", ds.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["bennett_s"], 1.0);
    assert_eq!(v["mean_bleu"], 1.0);
}
