use std::fs;
use std::path::{Path, PathBuf};

use magsense::harness::{emit_outputs, read_summary_csv, run_ensemble, write_bound_csv, RunManifest, ScenarioConfig, SUMMARY_HEADER};

fn config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    let mut cfg = ScenarioConfig::load(&path).unwrap();
    cfg.ensemble = 4;
    cfg
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("magsense-outputs-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn short_ou() -> ScenarioConfig {
    let mut cfg = config("ou_tracking.json");
    cfg.grid.t_final = 5e-4;
    cfg.grid.record_every = 50;
    cfg
}

#[test]
fn shipped_configs_validate() {
    for name in ["sme_constant.json", "ou_tracking.json", "cardiac.json"] {
        let cfg = config(name);
        cfg.validate().unwrap();
        assert!(cfg.dt() > 0.0 && cfg.n_steps() > 0, "{name}");
    }
}

#[test]
fn ensembles_are_reproducible_across_worker_counts() {
    let cfg = short_ou();
    let a = run_ensemble(&cfg, 1).unwrap();
    let b = run_ensemble(&cfg, 3).unwrap();
    let (da, db) = (scratch("det-a"), scratch("det-b"));
    emit_outputs(&a, &cfg, &da, true).unwrap();
    emit_outputs(&b, &cfg, &db, true).unwrap();
    for f in ["ensemble.csv", "trajectories/traj_00003.csv"] {
        assert_eq!(fs::read(da.join(f)).unwrap(), fs::read(db.join(f)).unwrap(), "{f}");
    }
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_ensemble(&other, 1).unwrap();
    assert_ne!(a.summary.omega_hat, c.summary.omega_hat);
}

#[test]
fn summary_csv_round_trips() {
    let cfg = short_ou();
    let r = run_ensemble(&cfg, 1).unwrap();
    let dir = scratch("csv");
    let paths = emit_outputs(&r, &cfg, &dir, false).unwrap();
    let text = fs::read_to_string(&paths.summary).unwrap();
    assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
    let cols = read_summary_csv(&paths.summary).unwrap();
    assert_eq!(cols[0], r.summary.t);
    assert_eq!(cols[3], r.summary.amse);
    assert_eq!(cols[0].len(), cfg.record_times().len());
}

#[test]
fn bound_csv_is_bit_identical_between_writes() {
    let cfg = config("sme_constant.json");
    let dir = scratch("bound");
    fs::create_dir_all(&dir).unwrap();
    let (p1, p2) = (dir.join("b1.csv"), dir.join("b2.csv"));
    assert!(write_bound_csv(&p1, &cfg).unwrap());
    assert!(write_bound_csv(&p2, &cfg).unwrap());
    let bytes = fs::read(&p1).unwrap();
    assert_eq!(bytes, fs::read(&p2).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,v_cs,sqrt_v_cs,steady");
    assert_eq!(text.lines().count(), cfg.record_times().len() + 1);
    assert!(!write_bound_csv(&dir.join("none.csv"), &config("cardiac.json")).unwrap());
}

#[test]
fn manifest_reproduces_the_run() {
    let cfg = short_ou();
    let r = run_ensemble(&cfg, 1).unwrap();
    let dir = scratch("manifest");
    let paths = emit_outputs(&r, &cfg, &dir, true).unwrap();
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(&paths.manifest).unwrap()).unwrap();
    assert_eq!(m.seed, cfg.seed);
    assert_eq!(m.dt, cfg.dt());
    assert_eq!(m.n_steps, cfg.n_steps());
    assert!(m.dt < m.dt_guard);
    assert_eq!(m.files.len(), 2 + cfg.ensemble);
    for f in &m.files {
        assert!(dir.join(f).exists(), "{f}");
    }
    let again = run_ensemble(&m.config, 1).unwrap();
    assert_eq!(again.summary.omega_hat, r.summary.omega_hat);
    let text = serde_json::to_string(&m.config).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), m.config);
}
