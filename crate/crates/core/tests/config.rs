use std::path::PathBuf;

use haptica::config::*;
use haptica::mechanisms::MechanismModel;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn bundled_configs_load() {
    for n in ["paper_fig4.cfg", "paper_fig6.cfg", "paper_fig10.cfg", "paper_fig12.cfg", "paper_fig15.cfg"] {
        let c = ScenarioConfig::load(&bundled(n)).unwrap_or_else(|e| panic!("{n}: {e}"));
        assert_eq!(c.mechanisms.len(), 3, "{n}");
    }
}

#[test]
fn fig4_uses_heavier_carried_motor() {
    let c = ScenarioConfig::load(&bundled("paper_fig4.cfg")).unwrap();
    let m = c.mechanisms(Some("serial_rotational")).unwrap();
    let MechanismModel::SerialRotational(s) = &m[0].1 else { panic!("wrong kind") };
    assert_eq!(s.carried_motor_mass, 1.15);
    assert_eq!(c.grid_for("serial_rotational").unwrap(), c.grid.build().unwrap());
}

#[test]
fn fig6_grids_per_mechanism() {
    let c = ScenarioConfig::load(&bundled("paper_fig6.cfg")).unwrap();
    let lin = c.grid_for("parallel_linear").unwrap();
    let rot = c.grid_for("parallel_rotational").unwrap();
    let p = lin.points();
    let q = rot.points();
    assert!((p[0].x + 0.22).abs() < 1e-12 && (p[0].y - 0.263).abs() < 1e-12);
    assert!((q[0].x - 0.24).abs() < 1e-12 && (q.last().unwrap().x - 0.84).abs() < 1e-12);
}

#[test]
fn default_round_trips_through_toml() {
    let c = ScenarioConfig::default();
    let back = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
    assert_eq!(back.to_toml(), c.to_toml());
}

#[test]
fn empty_file_means_defaults() {
    let c = ScenarioConfig::from_toml("").unwrap();
    assert_eq!(c.to_toml(), ScenarioConfig::default().to_toml());
}

#[test]
fn unknown_keys_are_errors() {
    for text in [
        "sed = 3",
        "[actuator]\nmotor_constnat = 3.0",
        "[mechanisms.a]\nkind = \"serial_rotational\"\ngear = [1.0, 1.0]",
        "[stiffness_limit.classifier]\nwindow_ms = 50",
    ] {
        assert!(matches!(ScenarioConfig::from_toml(text), Err(ConfigError::Parse(_))), "{text}");
    }
}

#[test]
fn unknown_mechanism_kind_is_an_error() {
    let e = ScenarioConfig::from_toml("[mechanisms.a]\nkind = \"delta\"").unwrap_err();
    assert!(matches!(e, ConfigError::Parse(_)));
}

#[test]
fn mechanism_table_replaces_defaults() {
    let c = ScenarioConfig::from_toml("[mechanisms.solo]\nkind = \"parallel_rotational\"\ngear_ratio = [10.0, 10.0]").unwrap();
    let m = c.mechanisms(None).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].1.kind_name(), "parallel_rotational");
    assert!(matches!(c.mechanisms(Some("nope")), Err(ConfigError::Invalid(_))));
}

#[test]
fn semantic_validation() {
    for text in [
        "[grid]\nresolution = 0",
        "[grid_overrides.ghost]\nresolution = 4",
        "[sweep]\ndirections = 0",
        "[actuator]\nrotor_mass = -1.0",
        "[freq_response]\namplitude = 500.0",
        "[render]\nmeasure_window = [3.0, 60.0]",
        "[stiffness_limit]\nsweep_min = 50.0\nsweep_max = 10.0",
        "[stiffness_limit]\nencoder_bits = []\nunquantized = false",
        "[sim]\ndt = 0.01",
    ] {
        assert!(matches!(ScenarioConfig::from_toml(text), Err(ConfigError::Invalid(_))), "{text}");
    }
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(ScenarioConfig::load(&PathBuf::from("/nonexistent/x.cfg")), Err(ConfigError::Io { .. })));
}
