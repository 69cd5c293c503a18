//! Coherent spin state moments and its Wigner function on the sphere.
//!
//! cargo run --release --example spin_wigner -- 20 wigner.csv

use magsense::spin::wigner::{wigner_sphere, SphereGrid};
use magsense::spin::{build_collective_operators, css_x, moments};

fn main() -> magsense::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let state = css_x(n)?;
    let ops = build_collective_operators(n)?;
    let m = moments(&state, &ops)?;
    println!("N = {n}: <J> = ({:.4}, {:.4}, {:.4})", m.mean[0], m.mean[1], m.mean[2]);
    println!("Var(Jy) = {:.4} (N/4 = {:.4}), xi^2 = {:.6}", m.var_y(), n as f64 / 4.0, m.xi2_y(n)?);

    let grid = SphereGrid::for_atoms(n);
    let w = wigner_sphere(&state, &grid)?;
    let (theta, phi, peak) = w.argmax();
    println!("Wigner peak {peak:.4} at theta = {theta:.4}, phi = {phi:.4} ({} grid points)", grid.len());
    if let Some(path) = args.next() {
        w.write_csv(std::path::Path::new(&path))?;
        println!("wrote {path}");
    }
    Ok(())
}
