use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zoomquant"));
    c.env_remove("ZOOMQUANT_OUT");
    c
}

fn run_ok(args: &[&str], out: &Path) {
    let status = bin().args(args).arg("--out").arg(out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--seed", "4", "--nodes", "10", "--max-steps", "40"];
    run_ok(&args, &dir.path().join("a"));
    run_ok(&args, &dir.path().join("b"));
    for f in ["history.csv", "summary.csv", "envelope.csv", "config.toml", "graph.txt"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn saved_config_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["run", "--seed", "5", "--nodes", "6", "--alpha", "0.1", "--max-steps", "25"], &dir.path().join("a"));
    let cfg = dir.path().join("a").join("config.toml");
    run_ok(&["run", "--config", cfg.to_str().unwrap()], &dir.path().join("b"));
    assert_eq!(
        fs::read(dir.path().join("a/history.csv")).unwrap(),
        fs::read(dir.path().join("b/history.csv")).unwrap()
    );
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--c-in", "1/2", "--out"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("c_in"));
}

#[test]
fn table1_prints_reference_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("table1").env("ZOOMQUANT_OUT", dir.path()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("11441.52") && text.contains("32629.52") && text.contains("--"));
    assert!(dir.path().join("remark2.csv").exists());
}

#[test]
fn sweep_and_compare_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["sweep", "--seeds", "0..3", "--nodes", "6", "--max-steps", "30"], &dir.path().join("s"));
    let agg = fs::read_to_string(dir.path().join("s/sweep_aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 4);
    assert_eq!(fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap().lines().count(), 4);

    run_ok(&["compare", "--nodes", "6", "--max-steps", "20"], &dir.path().join("c"));
    let cmp = fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    let mut lines = cmp.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 6);
    let k0: Vec<&str> = lines.next().unwrap().split(',').skip(1).collect();
    assert!(k0.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(cmp.lines().count(), 22);
}
