use std::fs;
use std::path::Path;

use twoch::scenarios::{run, solve, SimulationConfig, SCENARIOS};
use twoch::state::LagrangianState;

fn small(scenario: &str) -> SimulationConfig {
    SimulationConfig {
        scenario: scenario.into(),
        n: 512,
        nx: 401,
        t_end: 1.0,
        snapshot_dt: 0.5,
        ..Default::default()
    }
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(str::to_string)
        .collect()
}

#[test]
fn every_builtin_scenario_runs() {
    for (name, _) in SCENARIOS {
        let s = solve(&small(name)).unwrap();
        assert!(s.failure.is_none(), "{name}: {:?}", s.failure);
        assert_eq!(s.snapshots.len(), 3);
    }
}

#[test]
fn zero_data_writes_zero_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("constant-density");
    c.output_dir = Some(dir.path().to_path_buf());
    let summary = run(&c).unwrap();
    assert_eq!(summary.exit_code, 0);
    assert_eq!(summary.events, 0);
    for row in data_rows(&dir.path().join("snapshots.csv")) {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(&v[2..], &[0.0, 0.0, 0.0]);
    }
    assert!(data_rows(&dir.path().join("atoms.csv")).is_empty());
    assert!(data_rows(&dir.path().join("events.csv")).is_empty());
    for row in data_rows(&dir.path().join("energy.csv")) {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(&v[1..], &[0.0; 4]);
    }
}

#[test]
fn outputs_carry_the_config_hash_and_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut c = small("peakon-antipeakon");
    c.t_end = 3.0;
    c.snapshot_dt = 1.0;
    c.output_dir = Some(a.path().to_path_buf());
    let first = run(&c).unwrap();
    c.output_dir = Some(b.path().to_path_buf());
    let second = run(&c).unwrap();
    assert_eq!(first.config_hash, second.config_hash);
    assert_eq!(first.config_hash, c.hash());
    assert!(first.events > 0);
    for file in ["snapshots.csv", "atoms.csv", "energy.csv", "events.csv", "final_state.json"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between identical runs");
        let text = String::from_utf8(x).unwrap();
        if file.ends_with(".csv") {
            assert_eq!(text.lines().next().unwrap(), format!("# config_hash={}", c.hash()));
        } else {
            assert!(text.contains(&c.hash()));
        }
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("final_state.json")).unwrap()).unwrap();
    let state: LagrangianState = serde_json::from_value(json["state"].clone()).unwrap();
    assert_eq!(state.t, 3.0);
    assert!(state.frozen_count() > 0);
}

#[test]
fn hash_ignores_output_directory_only() {
    let mut c = small("gaussian-cubic");
    let h = c.hash();
    c.output_dir = Some("elsewhere".into());
    assert_eq!(c.hash(), h);
    c.params.epsilon = 0.01;
    assert_ne!(c.hash(), h);
}

#[test]
fn config_round_trips_through_json() {
    let mut c = small("step-asymptotics");
    c.params.c = 0.5;
    c.kappa = 0.2;
    let text = serde_json::to_string(&c).unwrap();
    let back: SimulationConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, c);
    let sparse: SimulationConfig = serde_json::from_str(r#"{"scenario": "peakon-antipeakon", "T": 2.0}"#).unwrap();
    assert_eq!(sparse.t_end, 2.0);
    assert_eq!(sparse.n, SimulationConfig::default().n);
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(solve(&small("no-such-scenario")).is_err());
    let mut c = small("gaussian-cubic");
    c.eta = -1.0;
    assert!(solve(&c).is_err());
    let mut c = small("gaussian-cubic");
    c.n = 1;
    assert!(solve(&c).is_err());
}

#[test]
fn density_suppresses_breaking_in_written_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = SimulationConfig { n: 1024, t_end: 2.5, snapshot_dt: 0.5, ..Default::default() };
    c.output_dir = Some(dir.path().join("vacuum"));
    run(&c).unwrap();
    c.params.epsilon = 0.01;
    c.output_dir = Some(dir.path().join("density"));
    run(&c).unwrap();
    assert!(!data_rows(&dir.path().join("vacuum/events.csv")).is_empty());
    assert!(data_rows(&dir.path().join("density/events.csv")).is_empty());
}
