//! CSV and manifest output for ensemble runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EnsembleResult, EnsembleSummary, ScenarioConfig, Trajectory};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: [&str; 8] = ["t", "omega_true", "omega_hat", "amse", "sigma_oo", "xi2_cond", "xi2_uncond", "jx_mean"];

const TRAJECTORY_HEADER: [&str; 10] = ["t", "omega_true", "omega_hat", "sigma_oo", "jx", "jy", "vy", "xi2_hat", "u", "nees"];

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub version: String,
    pub seed: u64,
    pub dt: f64,
    pub n_steps: usize,
    pub dt_guard: f64,
    pub files: Vec<String>,
}

/// Paths written by [`emit_outputs`].
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub summary: PathBuf,
    pub bound: Option<PathBuf>,
    pub manifest: PathBuf,
    pub trajectories: Vec<PathBuf>,
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn write_summary_csv(path: &Path, s: &EnsembleSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for i in 0..s.t.len() {
        w.write_record([s.t[i], s.omega_true[i], s.omega_hat[i], s.amse[i], s.sigma_oo[i], s.xi2_cond[i], s.xi2_uncond[i], s.jx_mean[i]].map(f))?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a summary CSV as columns in header order.
pub fn read_summary_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Config(format!("unexpected summary header {header:?}")));
    }
    let mut cols = vec![Vec::new(); SUMMARY_HEADER.len()];
    for rec in r.records() {
        for (c, v) in cols.iter_mut().zip(rec?.iter()) {
            c.push(v.parse::<f64>().map_err(|e| Error::Config(format!("bad number {v:?}: {e}")))?);
        }
    }
    Ok(cols)
}

/// Bound curve with t, the variance, its square root and the regime flag t ≥ t_SS.
pub fn write_bound_csv(path: &Path, cfg: &ScenarioConfig) -> Result<bool> {
    let Some(curve) = cfg.bound_curve()? else {
        return Ok(false);
    };
    let bp = cfg.bound_params().expect("bound curve implies parameters");
    let t_ss = if bp.q_omega > 0.0 { (bp.kappa_q() / bp.q_omega).sqrt() } else { f64::INFINITY };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "v_cs", "sqrt_v_cs", "steady"])?;
    for (t, v) in cfg.record_times().into_iter().zip(curve) {
        w.write_record([f(t), f(v), f(v.sqrt()), (t >= t_ss).to_string()])?;
    }
    w.flush()?;
    Ok(true)
}

pub fn trajectory_csv(path: &Path, tr: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for s in &tr.samples {
        w.write_record([s.t, s.omega_true, s.omega_hat, s.sigma_oo, s.jx, s.jy, s.vy, s.xi2_hat, s.u, s.nees].map(f))?;
    }
    w.flush()?;
    Ok(())
}

/// Write the ensemble CSV, the bound CSV, optional per-trajectory CSVs and the manifest into `dir`.
pub fn emit_outputs(result: &EnsembleResult, cfg: &ScenarioConfig, dir: &Path, keep_trajectories: bool) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("ensemble.csv");
    write_summary_csv(&summary, &result.summary)?;
    let mut files = vec!["ensemble.csv".to_string()];
    let bound_path = dir.join("bound.csv");
    let bound = if write_bound_csv(&bound_path, cfg)? {
        files.push("bound.csv".into());
        Some(bound_path)
    } else {
        None
    };
    let mut trajectories = Vec::new();
    if keep_trajectories {
        let tdir = dir.join("trajectories");
        fs::create_dir_all(&tdir)?;
        for tr in &result.trajectories {
            let name = format!("traj_{:05}.csv", tr.index);
            let p = tdir.join(&name);
            trajectory_csv(&p, tr)?;
            files.push(format!("trajectories/{name}"));
            trajectories.push(p);
        }
    }
    let mut config = cfg.clone();
    config.grid.dt = Some(cfg.dt());
    let manifest = RunManifest {
        config,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        dt: cfg.dt(),
        n_steps: cfg.n_steps(),
        dt_guard: super::dt_guard(&cfg.sensor),
        files,
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(OutputPaths { summary, bound, manifest: manifest_path, trajectories })
}
