//! Run a closed-loop scenario from a JSON config and write the ensemble CSVs.
//!
//! cargo run --release --example ensemble_tracking -- configs/ou_tracking.json out/ou

use std::path::PathBuf;

use magsense::harness::{emit_outputs, run_ensemble, ScenarioConfig};

fn main() -> magsense::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let cfg_path = args.next().map(PathBuf::from).unwrap_or_else(|| root.join("configs/ou_tracking.json"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("magsense-ensemble"));
    let cfg = ScenarioConfig::load(&cfg_path)?;
    let result = run_ensemble(&cfg, 0)?;
    let s = &result.summary;
    println!("{} trajectories of {} steps, dt = {:.3e}", result.trajectories.len(), cfg.n_steps(), result.dt);
    println!("{:>10} {:>12} {:>12} {:>12} {:>10}", "t", "aMSE", "filter var", "bound", "xi^2 dB");
    let stride = (s.t.len() / 10).max(1);
    for i in (0..s.t.len()).step_by(stride) {
        let b = s.bound.as_ref().map_or(f64::NAN, |b| b[i]);
        println!("{:>10.3e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.2}", s.t[i], s.amse[i], s.sigma_oo[i], b, 10.0 * s.xi2_cond[i].log10());
    }
    let paths = emit_outputs(&result, &cfg, &out, false)?;
    println!("summary written to {}", paths.summary.display());
    Ok(())
}
