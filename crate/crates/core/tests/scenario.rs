use sortie_core::autonomy::{home_store_load, parse_event_script, EventScript};
use sortie_core::scenario::{run_scenario, ScenarioError};
use sortie_core::{EventKind, MasterState, RunLog, ScenarioConfig, Vec3, Waypoint, World};
use std::fs;

fn hover(indoor: bool, seed: u64) -> ScenarioConfig {
    let mut cfg = if indoor { ScenarioConfig::indoor() } else { ScenarioConfig::outdoor() };
    cfg.seed = Some(seed);
    cfg.duration = 30.0;
    cfg.start.state = MasterState::Mission;
    let p = cfg.pad.center() + Vec3::new(0.0, 0.0, 4.0);
    cfg.start.position = Some(p.into());
    cfg.mission.waypoints = vec![Waypoint::new(p, 0.0, 120.0)];
    cfg
}

#[test]
fn airborne_hover_holds_station() {
    let (log, s) = run_scenario(&hover(true, 4), EventScript::default()).unwrap();
    assert!(s.is_nominal(), "{s:?}");
    assert_eq!(s.final_state, "MISSION");
    assert!(log.fsm.is_empty());
    assert!(s.tracking_rms.unwrap() < 0.02);
    let last = log.rows.last().unwrap();
    assert!((last.time - 30.0).abs() < 0.06, "{}", last.time);
    // Logged at 20 Hz.
    assert!((log.rows.len() as i64 - 600).abs() <= 2, "{}", log.rows.len());
}

#[test]
fn force_land_returns_and_lands_on_pad() {
    let mut cfg = hover(false, 9);
    cfg.duration = 150.0;
    let mut w = World::new(&cfg, parse_event_script("10 ForceLand").unwrap()).unwrap();
    w.run_until(cfg.duration, |w| w.state() == MasterState::Charging);
    assert_eq!(w.state(), MasterState::Charging);
    let seq = w.log().state_sequence();
    assert_eq!(seq, [MasterState::ReturnHome, MasterState::Landing, MasterState::Charging]);
    assert!(w.touchdowns().last().unwrap().on_pad);
    let forced = &w.log().fsm[0];
    assert_eq!((forced.event, forced.state), (EventKind::ForceLand, MasterState::Mission));
    assert!((forced.time - 10.0).abs() < 0.06);
}

#[test]
fn logs_round_trip_through_files() {
    let (log, _) = run_scenario(&hover(false, 2), parse_event_script("20 ForceLand").unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("runlog.csv", log.runlog_csv()), ("fsm.csv", log.fsm_csv()), ("nis.csv", log.nis_csv())] {
        fs::write(dir.path().join(name), text).unwrap();
    }
    let read = |n: &str| fs::read_to_string(dir.path().join(n)).unwrap();
    let back = RunLog::parse(&read("runlog.csv"), &read("fsm.csv"), &read("nis.csv")).unwrap();
    assert_eq!(back, log);
    assert!(!back.nis.is_empty() && !back.fsm.is_empty());
}

#[test]
fn same_seed_same_bytes() {
    let cfg = hover(false, 6);
    let a = run_scenario(&cfg, EventScript::default()).unwrap().0;
    let b = run_scenario(&cfg, EventScript::default()).unwrap().0;
    assert_eq!(a.runlog_csv(), b.runlog_csv());
    assert_eq!(a.nis_csv(), b.nis_csv());
}

#[test]
fn takeoff_from_pad_persists_home() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("home.bin");
    let mut cfg = ScenarioConfig::indoor();
    cfg.seed = Some(3);
    cfg.duration = 40.0;
    cfg.home_store = Some(store.clone());
    let (log, s) = run_scenario(&cfg, EventScript::default()).unwrap();
    assert!(s.is_nominal());
    assert_eq!(log.state_sequence()[..2], [MasterState::Takeoff, MasterState::Mission]);
    let home = home_store_load(&store).unwrap();
    assert!((home.x - cfg.pad.center[0]).hypot(home.y - cfg.pad.center[1]) < 0.1, "{home:?}");
}

#[test]
fn corrupt_home_store_refuses_takeoff() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("home.bin");
    fs::write(&store, b"not a home record").unwrap();
    let mut cfg = ScenarioConfig::indoor();
    cfg.seed = Some(3);
    cfg.duration = 20.0;
    cfg.home_store = Some(store);
    let (log, s) = run_scenario(&cfg, EventScript::default()).unwrap();
    assert_eq!(s.final_state, "CHARGING");
    assert!(log.state_sequence().is_empty());
}

#[test]
fn motor_fault_is_detected_before_liftoff() {
    let mut cfg = ScenarioConfig::indoor();
    cfg.seed = Some(1);
    cfg.duration = 20.0;
    cfg.motor_fault = Some(2);
    let (_, s) = run_scenario(&cfg, EventScript::default()).unwrap();
    assert_eq!(s.final_state, "FAULT");
    assert!(!s.is_nominal());
}

#[test]
fn config_errors() {
    let mut cfg = ScenarioConfig::default();
    assert_eq!(run_scenario(&cfg, EventScript::default()).unwrap_err(), ScenarioError::MissingSeed);
    cfg.seed = Some(1);
    cfg.camera.rate_hz = 15.0;
    assert!(matches!(cfg.validate(), Err(ScenarioError::Invalid { ref path, .. }) if path == "camera.rate_hz"));

    assert!(matches!(ScenarioConfig::from_toml("duration = \"long\""), Err(ScenarioError::Parse(_))));
    assert!(matches!(ScenarioConfig::from_toml("duration = -1.0"), Err(ScenarioError::Invalid { ref path, .. }) if path == "duration"));
    let ok = ScenarioConfig::from_toml("seed = 5\nprofile = \"indoor\"").unwrap();
    assert_eq!(ok.seed, Some(5));
    assert_eq!(ScenarioConfig::from_toml(&ok.to_toml()).unwrap(), ok);
    assert!(matches!(ScenarioConfig::load(std::path::Path::new("/nonexistent/x.toml")), Err(ScenarioError::Io(_))));
}

#[test]
fn shipped_configs_load() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ScenarioConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
    EventScript::load(&std::path::Path::new(dir).join("events/force_land.txt")).unwrap();
}
