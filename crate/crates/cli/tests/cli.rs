use std::path::Path;
use std::process::{Command, Output};

fn uavmec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavmec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("exp.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn gen_traces_then_train_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let net = dir.path().join("net.json");
    let out = uavmec(&[
        "gen-traces", "--rows", "4", "--cols", "4", "--vehicles", "10", "--horizon", "6",
        "--seed", "2", "--out", p(&trace), "--network", p(&net),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("t,vehicle_id,x,y,lane_id\n"));
    assert_eq!(text.lines().count(), 1 + 7 * 10);

    let cfg = write_config(
        dir.path(),
        r#"{"scenario": {"kind": "trace", "path": "trace.csv", "network": "net.json"},
            "lattice": {"x_max": 4, "y_max": 4}, "uavs": 2, "episodes": 3, "eval_episodes": 2}"#,
    );
    let run_dir = dir.path().join("run");
    let out = uavmec(&[
        "train", "--config", p(&cfg), "--algo", "q-multi", "--episodes", "4", "--seed", "8",
        "--out", p(&run_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("episode,algo,seed,total_reward,mos_total,mean_mos,offloading_uav_count,wallclock_ms")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.contains(",q-multi,8,")));

    // The config names no algorithm, so evaluation needs one matching the checkpoint.
    let cfg = write_config(
        dir.path(),
        r#"{"scenario": {"kind": "trace", "path": "trace.csv"}, "algo": "q-multi",
            "lattice": {"x_max": 4, "y_max": 4}, "uavs": 2, "eval_episodes": 2}"#,
    );
    let eval_dir = dir.path().join("eval");
    let out = uavmec(&[
        "evaluate", "--checkpoint", p(&run_dir.join("tabular/tabular.json")), "--config", p(&cfg),
        "--out", p(&eval_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = std::fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
    assert_eq!(eval.lines().count(), 3);
}

#[test]
fn sweep_writes_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"algo": "random", "vehicles": 20, "episodes": 2, "repetitions": 2}"#,
    );
    let out_dir = dir.path().join("sweep");
    let out = uavmec(&[
        "sweep", "--config", p(&cfg), "--vary", "uavs", "--values", "1,3", "--out", p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("sweep_value,episode,algo,seed,"));
    let values: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(values, ["1", "1", "1", "1", "3", "3", "3", "3"]);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"algo": "random", "episodes": 1}"#);
    let out_dir = dir.path().join("o");

    let out = uavmec(&["train", "--config", p(&cfg), "--algo", "dqn", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown algorithm"));

    let missing = dir.path().join("missing.json");
    let out = uavmec(&["train", "--config", p(&missing), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));

    let bad = write_config(dir.path(), r#"{"scenario": {"kind": "trace", "path": "gone.csv"}}"#);
    let out = uavmec(&["train", "--config", p(&bad), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("exp.json") && err.contains("gone.csv"), "{err}");

    let cfg = write_config(dir.path(), r#"{"algo": "random", "episodes": 1}"#);
    let out = uavmec(&[
        "sweep", "--config", p(&cfg), "--vary", "algo", "--values", "1", "--out", p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = uavmec(&[
        "sweep", "--config", p(&cfg), "--vary", "uavs", "--values", "x", "--out", p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("trace.csv"), "t,vehicle_id,x,y,lane_id\nnot,a,row\n").unwrap();
    let cfg = write_config(dir.path(), r#"{"scenario": {"kind": "trace", "path": "trace.csv"}, "algo": "random"}"#);
    let out = uavmec(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));

    let cfg = write_config(dir.path(), r#"{"algo": "magcdrl", "vehicles": 10}"#);
    let junk = dir.path().join("junk.magc");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let out = uavmec(&["evaluate", "--checkpoint", p(&junk), "--config", p(&cfg), "--out", p(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(3));
}
