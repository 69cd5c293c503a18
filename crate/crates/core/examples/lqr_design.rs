//! Steady LQR gains for the spin-rotation plant and the algebraic Riccati residual.

use magsense::control::{are_residual, are_solution, lqr_gain, LqrWeights};

fn main() -> magsense::error::Result<()> {
    let j = 50.0;
    for (p_j, nu) in [(1.0, 1.0), (1e-6, 1.0), (1.0, 1e-4)] {
        let w = LqrWeights::new(p_j, 0.0, nu)?;
        for chi in [0.01, 1.0, 10.0] {
            let g = lqr_gain(&w, j, chi)?;
            let lam = are_solution(&w, j, chi)?;
            let res = are_residual(&lam, &w, j, chi).abs().max();
            println!("p_J = {p_j:e}, nu = {nu:e}, chi = {chi:>5}: g_y = {:.3e}, g_omega = {:.6}, ARE residual {res:.1e}", g.g_y, g.g_omega);
        }
    }
    Ok(())
}
