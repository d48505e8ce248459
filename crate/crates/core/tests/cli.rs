use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_outcome-rl"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn counterexample_run_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let o = run_config(&configs().join("q_counterexample.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("experiment,seed,grid,metric,value\n"));
    assert!(csv.contains("q_counterexample,summary,-,gap,3.3333333333333"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("advantage_pipeline.toml");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(run_config(&cfg, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run_config(&cfg, &b, &["--threads", "3"]).status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn failing_flag_exits_one() {
    // Seed 0 draws a 3.07 standard-error deviation at gap 0.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bt.toml",
        "experiment = \"bt_calibration\"\nseeds = [0]\nn_grid = [100000]\nreward_gaps = [0.0]\n",
    );
    let out = dir.path().join("bt.csv");
    let o = run_config(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL bt_calibration"));
    assert!(out.exists());
}

#[test]
fn empty_seed_grid_is_a_config_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.toml", "experiment = \"q_counterexample\"\nseeds = []\n");
    let out = dir.path().join("e.csv");
    let o = run_config(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E_INVALID_CONFIG"));
    assert!(!out.exists());
}

#[test]
fn distinct_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("experiment = \"bogus\"\nseeds = [1]\n", "E_UNKNOWN_EXPERIMENT"),
        (
            "experiment = \"lemma_sweep\"\nseeds = [1]\nmdp = \"missing.toml\"\n",
            "E_UNRESOLVABLE_SPEC",
        ),
        (
            "experiment = \"lemma_sweep\"\nseeds = [1]\nenumeration_cap = 1\n",
            "E_CAP_EXCEEDED",
        ),
    ];
    for (i, (text, code)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.toml"), text);
        let o = run_config(&cfg, &dir.path().join(format!("c{i}.csv")), &[]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains(code), "{code}");
    }
}

#[test]
fn environment_overrides_default_cap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.csv");
    let o = bin()
        .env("OUTCOME_RL_ENUM_CAP", "1")
        .args(["run", "--config"])
        .arg(configs().join("lemma_sweep.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E_CAP_EXCEEDED"));
}

#[test]
fn validate_and_show_mdp() {
    let o = bin()
        .args(["validate", "--config"])
        .arg(configs().join("pipeline_custom_mdp.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = bin()
        .args(["show-mdp", "--spec"])
        .arg(configs().join("counterexample_mdp.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("layer sizes: [1, 2]"));
    assert!(text.contains("optimal value: 1"));
}

#[test]
fn show_mdp_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "bad.toml",
        "horizon = 1\nlayers = [1]\nactions = 1\ninitial_state = 0\nrewards = [[[2.0]]]\n",
    );
    let o = bin().args(["show-mdp", "--spec"]).arg(&spec).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E_INVALID_MODEL"));
}
