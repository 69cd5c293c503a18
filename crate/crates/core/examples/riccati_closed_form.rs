//! Kalman-Bucy covariance of the linear-Gaussian model: numeric Riccati vs closed forms.

use nalgebra::DMatrix;

use magsense::bounds::{kf_amse_noiseless, kf_ss_error};
use magsense::cog::{lg_model, lg_model_steady};
use magsense::filters::integrate_riccati;
use magsense::ode::Tolerance;
use magsense::sme::SensorParams;
use magsense::stochastic::OuParams;

fn main() -> magsense::error::Result<()> {
    let (n, m, sigma0) = (1e6, 1.0, 1.0);
    let p = SensorParams::new(n, m, 1.0, 0.0, 0.0)?;
    let still = OuParams::new(0.0, 0.0, 0.0)?;
    let times: Vec<f64> = (0..=8).map(|k| 1e-7 * 10f64.powi(k)).collect();
    let s0 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, sigma0 * sigma0]);
    let sol = integrate_riccati(|t| lg_model(t, &p, &still), 0.0, &s0, &times, Tolerance::default())?;
    println!("constant field, N = {n:e}");
    println!("{:>10} {:>14} {:>14}", "t", "Riccati", "closed form");
    for (t, s) in times.iter().zip(sol.entry(1, 1)) {
        println!("{t:>10.1e} {s:>14.6e} {:>14.6e}", kf_amse_noiseless(*t, n, m, 1.0, sigma0)?);
    }

    let (m, q, kc) = (1e5, 1e14, 0.1);
    let p = SensorParams::new(1e9, m, 1.0, kc, 0.0)?;
    let walk = OuParams::new(0.0, q, 0.0)?;
    let model = lg_model_steady(&p, &walk)?;
    let s0 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let sol = integrate_riccati(|_| Ok(model.clone()), 0.0, &s0, &[1e-3], Tolerance::default())?;
    println!("random walk steady state: Riccati {:.6e}, formula {:.6e}", sol.sigma[0][(1, 1)], kf_ss_error(1e9, m, 1.0, q, kc)?);
    Ok(())
}
