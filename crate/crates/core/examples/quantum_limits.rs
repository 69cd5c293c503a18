//! Dephasing-limited precision bounds, characteristic times and the discrete recursion.

use magsense::bounds::{cs_limit, cs_recursion, timescales, BoundParams};

fn main() -> magsense::error::Result<()> {
    let bp = BoundParams { q_omega: 1.0, kappa_coll: 1e-3, kappa_loc: 0.0, n_atoms: 1e6, sigma0: f64::INFINITY };
    println!("{:>10} {:>14} {:>12}", "t", "bound var", "bound sd");
    for k in -3..=4 {
        let t = 10f64.powi(k);
        let b = cs_limit(t, &bp)?;
        println!("{t:>10.0e} {:>14.4e} {:>12.4e}", b.variance, b.sqrt());
    }
    let ts = timescales(bp.n_atoms, 1.0, 1.0, bp.q_omega, bp.kappa_coll)?;
    println!("t_CS = {:.3e} s, t_SS = {:.3e} s, t'_SS = {:.3e} s", ts.t_cs, ts.t_ss, ts.t_ss_prime);

    let dt = 1e-4 * ts.t_ss;
    let steps = 30_000;
    let rec = cs_recursion(steps, dt, 0.0, &bp)?;
    let cont = cs_limit(steps as f64 * dt, &bp)?.variance;
    println!("recursion after {steps} steps {rec:.6e}, continuous {cont:.6e}");
    Ok(())
}
