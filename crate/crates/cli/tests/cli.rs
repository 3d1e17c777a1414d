use std::path::Path;
use std::process::{Command, Output};

use hypervis_cli::run::{load_scene, SceneDump};
use hypervis_core::visibility::visible_set;

fn hypervis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypervis"))
        .args(args)
        .env_remove("HYPERVIS_SEED")
        .output()
        .expect("run hypervis")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn analytic_values() {
    for (args, want) in [
        (
            vec!["analytic", "alpha", "--lambda", "1", "--radius", "1"],
            "2.350402",
        ),
        (vec!["analytic", "lambda-gv", "--radius", "1"], "0.425459"),
        (
            vec!["analytic", "f", "--r", "2", "--lambda", "0.1", "--radius", "1"],
            "0.444277",
        ),
        (
            vec!["analytic", "per", "--r", "2", "--theta", "1.5707963267948966"],
            "7.341902",
        ),
    ] {
        let o = hypervis(&args);
        assert!(o.status.success(), "{args:?}");
        assert_eq!(stdout(&o).trim(), want, "{args:?}");
    }
}

#[test]
fn config_errors_exit_2_with_code() {
    let dir = tempfile::tempdir().unwrap();
    let both = write(
        dir.path(),
        "both.json",
        r#"{"model": {"lambda": 1, "alpha": 1, "radius": 1}}"#,
    );
    let o = hypervis(&["tail", "--config", &both, "--r-grid", "1:2:1", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["code"], "E_CONFIG");

    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"model": {"lambda": 1, "radius": 1, "colour": 3}}"#,
    );
    let o = hypervis(&["tail", "--config", &unknown, "--r-grid", "1:2:1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = hypervis(&[
        "tail", "--lambda", "1", "--alpha", "1", "--radius", "1", "--r-grid", "1:2:1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = hypervis(&["analytic", "t-theta", "--theta", "2.0", "--c", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_config_and_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tail.json",
        r#"{"command": "tail", "model": {"alpha": 1.5, "radius": 1, "seed": 3}, "experiment": {"r_grid": "1:3:1", "n": 200}}"#,
    );
    let a = hypervis(&["tail", "--config", &cfg, "--lambda", "0.2"]);
    let b = hypervis(&[
        "tail", "--lambda", "0.2", "--radius", "1", "--seed", "3", "--r-grid", "1:3:1", "--n", "200",
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));

    let c = Command::new(env!("CARGO_BIN_EXE_hypervis"))
        .args(["tail", "--config", &cfg, "--lambda", "0.2"])
        .env("HYPERVIS_SEED", "4")
        .output()
        .unwrap();
    assert!(c.status.success());
    assert!(stdout(&c).contains(",4,"));

    let o = hypervis(&["moments", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "config written for another subcommand");
}

#[test]
fn tail_csv_schema() {
    let o = hypervis(&[
        "tail", "--alpha", "1.5", "--radius", "1", "--r-grid", "1:3:1", "--n", "500", "--seed", "9",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["r", "p_hat", "stderr", "n", "model_hash", "seed", "version"]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(&row[3], "500");
        assert_eq!(&row[5], "9");
        assert_eq!(&row[6], env!("CARGO_PKG_VERSION"));
        assert_eq!(row[4].len(), 16);
    }
    let report: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["config_hash"], rows[0][4].to_string());
}

#[test]
fn failed_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "j.json",
        r#"{"experiment": {"radii": [0.2], "n": 200, "tolerance": 0.0}}"#,
    );
    let o = hypervis(&["janson", "--config", &cfg, "--check"]);
    assert_eq!(o.status.code(), Some(3));
    let o = hypervis(&["janson", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn scene_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scene.json");
    let o = hypervis(&[
        "scene",
        "--lambda",
        "0.3",
        "--law",
        "0.5:0.5,1.5:0.5",
        "--r",
        "5",
        "--seed",
        "2",
        "--replicate",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dump: SceneDump = load_scene(&out).unwrap();
    assert!(!dump.scene.balls.is_empty());
    assert_eq!(visible_set(&dump.scene, dump.r).unwrap(), dump.visibility);

    let again = hypervis(&["scene", "--load", out.to_str().unwrap(), "--check"]);
    assert!(again.status.success());
    assert_eq!(stdout(&again), std::fs::read_to_string(&out).unwrap());
}

#[test]
fn thread_count_does_not_change_tables() {
    let run = |threads: &str| {
        stdout(&hypervis(&[
            "sweep",
            "--radius",
            "1",
            "--alphas",
            "1.5,0.9",
            "--r-max",
            "12",
            "--n",
            "300",
            "--n-grid",
            "16",
            "--seed",
            "5",
            "--threads",
            threads,
        ]))
    };
    let one = run("1");
    assert!(one.lines().count() == 3);
    assert_eq!(one, run("4"));
}
