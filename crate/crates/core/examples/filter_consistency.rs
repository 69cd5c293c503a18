//! NEES of the Kalman-Bucy filter when the truth follows the filter's own linear-Gaussian model.

use magsense::control::Controller;
use magsense::harness::consistency::{lg_consistency, LgScenario};
use magsense::harness::{nees_interval, Prior};
use magsense::sme::SensorParams;
use magsense::stochastic::OuParams;

fn main() -> magsense::error::Result<()> {
    let runs = 200;
    let sc = LgScenario {
        sensor: SensorParams::new(100.0, 1.0, 1.0, 0.1, 0.0)?,
        ou: OuParams::new(1.0, 0.02, 0.0)?,
        prior: Prior { mu0: 0.0, sigma0: 0.1 },
        controller: Controller::Compensation,
        dt: 5e-4,
        t_final: 0.5,
        record_every: 100,
        runs,
        seed: 3,
    };
    let r = lg_consistency(&sc, 0)?;
    for i in 0..r.t.len() {
        println!("t = {:.2}: NEES {:.3}, aMSE {:.4e}, filter var {:.4e}", r.t[i], r.nees[i], r.amse[i], r.sigma_oo[i]);
    }
    let (lo, hi) = nees_interval(2, runs);
    println!("time-averaged NEES {:.3}, 95% interval for one time [{lo:.3}, {hi:.3}]", r.time_averaged_nees(0.0));
    Ok(())
}
