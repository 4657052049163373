use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[space]
p = 3.0
dim = 10

[dictionary]
kind = "gaussian"
count = 30
seed = 4

[target]
membership = "a1"
sparsity = 4
seed = 5

[algorithm]
id = "wgafr"
iters = 40
"#;

fn greedy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greedy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", CONFIG);
    let out = dir.path().join("out");
    let o = greedy(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    for name in [
        "trace.csv",
        "trace.json",
        "report.json",
        "checks.csv",
        "config.toml",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
    let text = stdout(&o);
    assert!(
        text.contains("ml1_step") && text.contains("mt2_bound"),
        "{text}"
    );

    // identical config, identical bytes
    let again = dir.path().join("again");
    greedy(&["run", "--config", &cfg, "--out", again.to_str().unwrap()]);
    for name in ["trace.csv", "report.json"] {
        assert_eq!(
            std::fs::read(out.join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap()
        );
    }
}

#[test]
fn written_config_reruns_to_the_same_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", CONFIG);
    let first = dir.path().join("a");
    greedy(&["run", "--config", &cfg, "--out", first.to_str().unwrap()]);
    let second = dir.path().join("b");
    let o = greedy(&[
        "run",
        "--config",
        first.join("config.toml").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(first.join("report.json")).unwrap(),
        std::fs::read(second.join("report.json")).unwrap()
    );
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad_p = write(dir.path(), "p.toml", &CONFIG.replace("p = 3.0", "p = 0.5"));
    let o = greedy(&["run", "--config", &bad_p, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("space.p"), "{}", stderr(&o));

    let unknown = write(
        dir.path(),
        "u.toml",
        &CONFIG.replace("iters = 40", "iters = 40\nsteps = 3"),
    );
    let o = greedy(&["run", "--config", &unknown, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("steps"), "{}", stderr(&o));

    let o = greedy(&["run", "--config", "/nonexistent/exp.toml", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = greedy(&["verify", "--profile", "medium"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", CONFIG);
    // the output directory cannot be created under a regular file
    let blocker = write(dir.path(), "blocker", "");
    let o = greedy(&["run", "--config", &cfg, "--out", &format!("{blocker}/out")]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let base: String = CONFIG
        .lines()
        .map(|l| {
            if l.starts_with('[') {
                l.replacen('[', "[base.", 1)
            } else {
                l.to_owned()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let spec = format!(
        "replicate_seeds = 2\nmaster_seed = 11\naxes = [\n  {{ field = \"space.p\", values = [1.5, 2.0] }},\n  \
         {{ field = \"algorithm.id\", values = [\"wgafr\", \"gawr\"] }},\n]\n{base}"
    );
    let spec = write(dir.path(), "sweep.toml", &spec);
    let out = dir.path().join("sweep");
    let o = greedy(&["sweep", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(out.join("cell_00007").join("report.json").exists());

    let bad = write(
        dir.path(),
        "bad.toml",
        "axes = [{ field = \"space.q\", values = [1] }]\n",
    );
    let o = greedy(&["sweep", "--spec", &bad, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quick_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("verify.json");
    let o = greedy(&[
        "verify",
        "--profile",
        "quick",
        "--seed",
        "9",
        "--json",
        json.to_str().unwrap(),
    ]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS")).count(),
        14,
        "{text}"
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["criteria"].as_array().unwrap().len(), 14);
}
