use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sortie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sortie")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SHORT_HOVER: &str = "duration = 15.0\nprofile = \"indoor\"\n[start]\nstate = \"MISSION\"\nposition = [0.0, 0.0, 4.15]\n";

#[test]
fn run_writes_logs_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_HOVER);
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    for o in ["a", "b"] {
        let r = sortie(&["run", "--config", &cfg, "--seed", "4", "--out", &out(o)]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    for f in ["runlog.csv", "fsm.csv", "nis.csv", "summary.toml"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let summary = fs::read_to_string(dir.path().join("a/summary.toml")).unwrap();
    assert!(summary.contains("seed = 4"), "{summary}");
    assert!(fs::read_to_string(dir.path().join("a/runlog.csv")).unwrap().starts_with("# sortie-runlog v1\n"));
}

#[test]
fn event_script_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SHORT_HOVER.replace("15.0", "60.0"));
    let events = configs().join("events/force_land.txt");
    let out = dir.path().join("o");
    let r = sortie(&["run", "--config", &cfg, "--seed", "1", "--events", events.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let fsm = fs::read_to_string(out.join("fsm.csv")).unwrap();
    assert!(fsm.contains("MISSION,ForceLand,RETURN_HOME"), "{fsm}");
}

#[test]
fn fault_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "duration = 20.0\nprofile = \"indoor\"\nmotor_fault = 1\n");
    let r = sortie(&["run", "--config", &cfg, "--seed", "1", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(dir.path().join("o/summary.toml").exists());
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad = write_config(dir.path(), "duration = -3.0\n");
    let r = sortie(&["run", "--config", &bad, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("duration"));

    let cfg = write_config(dir.path(), SHORT_HOVER);
    let script = dir.path().join("events.txt");
    fs::write(&script, "5 Teleport\n").unwrap();
    let r = sortie(&["run", "--config", &cfg, "--seed", "1", "--events", script.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));

    // Seedless config for a harness.
    let r = sortie(&["mc-landing", "--config", &cfg, "--runs", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let r = sortie(&["tag-error", "--config", &cfg, "--seed", "1", "--trials", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn monte_carlo_and_tag_error_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("indoor.toml");
    let out = dir.path().join("mc");
    let r = sortie(&["mc-landing", "--config", cfg.to_str().unwrap(), "--runs", "4", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let scatter = fs::read_to_string(out.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().filter(|l| !l.starts_with('#')).count(), 5, "{scatter}");
    assert!(fs::read_to_string(out.join("summary.toml")).unwrap().contains("runs = 4"));

    let out = dir.path().join("tag");
    let r = sortie(&["tag-error", "--config", cfg.to_str().unwrap(), "--trials", "100", "--heights", "1,4", "--sizes", "0.15,0.48", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = fs::read_to_string(out.join("tag_error.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 4, "{table}");
}

#[test]
fn short_endurance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let cfg = configs().join("endurance.toml");
    let r = sortie(&["endurance", "--config", cfg.to_str().unwrap(), "--hours", "0.2", "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("sawtooth = true"), "{summary}");
    assert!(out.join("sorties.csv").exists() && out.join("runlog.csv").exists());
}
