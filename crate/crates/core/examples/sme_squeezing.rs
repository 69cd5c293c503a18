//! One conditional SME trajectory: continuous Jy measurement squeezes the spin.

use magsense::sme::{SensorParams, SmeEngine};
use magsense::spin::css_x;
use magsense::stochastic::{wiener_increment, RngStream};

fn main() -> magsense::error::Result<()> {
    let n = 100;
    let p = SensorParams::new(n as f64, 1.0, 1.0, 0.0, 0.0)?;
    let mut engine = SmeEngine::new(p)?;
    let mut rho = css_x(n)?;
    let mut rng = RngStream::new(1, 0);
    let dt = 1e-4;
    println!("{:>8} {:>10} {:>10} {:>10}", "t", "<Jx>", "Var(Jy)", "xi^2 [dB]");
    for k in 1..=5000 {
        let dw = wiener_increment(&mut rng, dt)?;
        let rec = engine.step(&mut rho, 0.0, 0.0, dt, dw)?;
        if k % 500 == 0 {
            let xi2 = rec.moments.xi2_y(n)?;
            println!("{:>8.3} {:>10.4} {:>10.4} {:>10.2}", k as f64 * dt, rec.moments.mean[0], rec.moments.var_y(), 10.0 * xi2.log10());
        }
    }
    let r = rho.report(true);
    println!("trace error {:.1e}, min eigenvalue {:.1e}", r.trace_error, r.min_eigenvalue.unwrap_or(f64::NAN));
    Ok(())
}
