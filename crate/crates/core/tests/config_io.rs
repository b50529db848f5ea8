use std::f64::consts::PI;
use std::path::Path;

use proptest::prelude::*;
use viscojoint::{ingest_tracker, ColumnMap, Provenance, ToolConfig};

fn shipped() -> ToolConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    ToolConfig::load(&path).unwrap()
}

#[test]
fn shipped_config_equals_defaults() {
    let cfg = shipped();
    assert_eq!(cfg.to_toml_string(), ToolConfig::default().to_toml_string());
    assert_eq!(cfg.provenance("damper.n_fins"), Some(Provenance::File));
}

#[test]
fn save_and_load_echo_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ToolConfig::default();
    cfg.set_assignment("damper.wall_width_mm=0.7").unwrap();
    cfg.set_assignment("catch.campaign.trials=40").unwrap();
    let path = dir.path().join("c.toml");
    cfg.save(&path).unwrap();
    let first = std::fs::read_to_string(&path).unwrap();
    let again = ToolConfig::load(&path).unwrap();
    assert_eq!(again.to_toml_string(), first);
    assert!((again.damper.wall_width - 0.7e-3).abs() < 1e-15);
    assert_eq!(again.campaign.trials, 40);
}

#[test]
fn cp_and_degree_suffixes_convert() {
    let cfg = ToolConfig::from_toml_str("[fluid]\nviscosity_cP = 185000.0\n[pendulum.run]\ntheta0_deg = 90.0\n").unwrap();
    assert!((cfg.fluid.viscosity - 185.0).abs() < 1e-9);
    assert!((cfg.run.theta0 - PI / 2.0).abs() < 1e-15);
}

fn track(t: &[f64], theta: &[f64], radius: f64) -> String {
    let mut s = String::from("t,x,y\n");
    for (t, a) in t.iter().zip(theta) {
        s.push_str(&format!("{t},{},{}\n", radius * a.sin(), radius * a.cos()));
    }
    s
}

proptest! {
    #[test]
    fn spinning_mass_unwraps_to_a_line(
        start in 0.0..2.0 * PI,
        rate in -30.0..30.0f64,
        radius in 0.05..2.0f64,
        n in 5usize..200,
    ) {
        let dt = 0.01;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let theta: Vec<f64> = t.iter().map(|t| start + rate * t).collect();
        let tr = ingest_tracker(track(&t, &theta, radius).as_bytes(), (0.0, 0.0), &ColumnMap::default()).unwrap();
        prop_assert_eq!(tr.len(), n);
        for (k, a) in tr.angles.iter().enumerate() {
            prop_assert!((a - theta[k]).abs() < 1e-9, "sample {}: {} vs {}", k, a, theta[k]);
        }
    }

    #[test]
    fn jittered_track_resamples_linearly(rate in -5.0..5.0f64, jitter in 0.002..0.004f64) {
        // a straight-line angle is reproduced exactly by linear interpolation
        let dt = 0.01;
        let t: Vec<f64> = (0..50).map(|k| k as f64 * dt + if k % 7 == 3 { jitter } else { 0.0 }).collect();
        let theta: Vec<f64> = t.iter().map(|t| 2.0 + rate * t).collect();
        let tr = ingest_tracker(track(&t, &theta, 1.0).as_bytes(), (0.0, 0.0), &ColumnMap::default()).unwrap();
        prop_assert!((tr.dt - dt).abs() < 1e-12);
        for (k, a) in tr.angles.iter().enumerate() {
            prop_assert!((a - (2.0 + rate * tr.time(k))).abs() < 1e-9);
        }
    }
}
