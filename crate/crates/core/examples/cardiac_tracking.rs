//! Track a cardiac-like Van der Pol field with the moment engine and the EKF.

use magsense::harness::{coverage, run_ensemble, ScenarioConfig};

fn main() -> magsense::error::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/cardiac.json");
    let cfg = ScenarioConfig::load(&path)?;
    let result = run_ensemble(&cfg, 0)?;
    let traj = &result.trajectories[0];
    println!("{:>8} {:>12} {:>12} {:>10}", "t [ms]", "omega", "estimate", "sd");
    for s in traj.samples.iter().step_by((traj.samples.len() / 20).max(1)) {
        println!("{:>8.2} {:>12.4} {:>12.4} {:>10.4}", s.t * 1e3, s.omega_true, s.omega_hat, s.sigma_oo.sqrt());
    }
    println!("ensemble of {}: {:.1}% of samples within 3 sd after 20 ms", cfg.ensemble, 100.0 * coverage(&result, 0.02, 3.0));
    Ok(())
}
