//! Drive the moment engine and the EKF by hand with LQR feedback, without the scenario runner.

use magsense::cog::CogEngine;
use magsense::control::lqr_control;
use magsense::filters::{Ekf, EkfModel};
use magsense::harness::dt_guard;
use magsense::sme::SensorParams;
use magsense::stochastic::{wiener_increment, RngStream, SignalModel};

fn main() -> magsense::error::Result<()> {
    let p = SensorParams::new(1e3, 1.0, 1.0, 0.01, 0.0)?;
    let mut engine = CogEngine::new(p)?;
    let mut ekf = Ekf::new(EkfModel { sensor: p, signal: SignalModel::Constant }, 0.0, 1.0)?;
    let mut rng = RngStream::new(42, 0);
    let omega = 0.7;
    let dt = dt_guard(&p) / 2.0;
    let mut u = 0.0;
    let steps = (2.0 / dt) as usize;
    for k in 1..=steps {
        let dw = wiener_increment(&mut rng, dt)?;
        let rec = engine.step(omega, u, dt, dw)?;
        ekf.step(rec.dy, u, dt)?;
        u = lqr_control(ekf.omega_hat(), ekf.mean_jy_hat(), 1.0 / p.j());
        if k % (steps / 10) == 0 {
            println!("t = {:.2}: omega_hat = {:.6} +- {:.2e}, u = {:.4}, <Jy> = {:.3e}", k as f64 * dt, ekf.omega_hat(), ekf.sigma_omega().sqrt(), u, rec.moments.mean[1]);
        }
    }
    Ok(())
}
