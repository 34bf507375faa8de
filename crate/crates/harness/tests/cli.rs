use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-ukf"))
}

#[test]
fn demo_writes_artifacts_and_prints_the_dominant_term() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["demo", "duffing", "--seed", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("dominant term at the final step: theta_6 = x1^3"), "{stdout}");
    for name in ["trace.csv", "metrics.csv", "report.txt", "plots.gp", "config.toml"] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
}

#[test]
fn run_with_seed_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, "benchmark = \"golf\"\nseed = 1\nhorizon = 3.0\n").unwrap();
    let mut traces = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let status = bin()
            .args(["run", "--seed", "7", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        traces.push(fs::read(out_dir.join("trace.csv")).unwrap());
        let saved = fs::read_to_string(out_dir.join("config.toml")).unwrap();
        assert!(saved.contains("seed = 7"));
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn validate_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("benchmark = \"duffing\"\nseed = 1\nhorizon = -2.0\n", "horizon"),
        ("benchmark = \"duffing\"\nseed = 1\n[sparsity]\ngamma = 1.5\n", "gamma"),
        ("benchmark = \"duffing\"\nseed = 1\nlibrary = \"nope\"\n", "library"),
        ("benchmark = \"duffing\"\nseed = 1\nstep = 0.1\n", "step"),
        ("benchmark = \"duffing\"\n", "seed"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        fs::write(&path, text).unwrap();
        let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
        assert!(!out.status.success());
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert!(stderr.contains(field), "expected `{field}` in: {stderr}");
    }

    let good = dir.path().join("good.toml");
    fs::write(&good, "benchmark = \"golf\"\nseed = 2\n").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&good).output().unwrap();
    assert!(out.status.success());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_and_bad_usage_fail() {
    let out = bin().args(["run", "--config", "/nonexistent/exp.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["demo", "pendulum"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().output().unwrap();
    assert!(!out.status.success());
}
