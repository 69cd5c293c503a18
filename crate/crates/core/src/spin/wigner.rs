//! Wigner quasi-probability on the Bloch sphere from a Dicke-basis density matrix.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64 as C64;

use super::clebsch::clebsch_gordan;
use super::DickeState;
use crate::error::{Error, Result};
use crate::special::gauss_legendre;

/// Flat index of (l, m) in the arrays returned by [`spherical_harmonics`].
pub fn lm_index(l: usize, m: i64) -> usize {
    (l * l) as usize + (l as i64 + m) as usize
}

/// Orthonormal spherical harmonics Y_l^m(θ, φ) with the Condon-Shortley phase, l ≤ lmax.
pub fn spherical_harmonics(lmax: usize, theta: f64, phi: f64) -> Vec<C64> {
    let x = theta.cos();
    let s = theta.sin().abs();
    let mut out = vec![C64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)];
    // pmm = normalized P_m^m
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= -(((2 * m + 1) as f64) / ((2 * m) as f64)).sqrt() * s;
        }
        let e = C64::from_polar(1.0, m as f64 * phi);
        let mut set = |l: usize, p: f64| {
            let y = e * p;
            out[lm_index(l, m as i64)] = y;
            if m > 0 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out[lm_index(l, -(m as i64))] = y.conj() * sign;
            }
        };
        set(m, pmm);
        if m == lmax {
            break;
        }
        let mut p_prev = pmm;
        let mut p = ((2 * m + 3) as f64).sqrt() * x * pmm;
        set(m + 1, p);
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let next = a * (x * p - b * p_prev);
            p_prev = p;
            p = next;
            set(l, p);
        }
    }
    out
}

/// Multipole coefficients ρ_kq = Σ ρ_{m1 m2} (-1)^{J-m1-q} ⟨J,m1; J,-m2 | k,q⟩.
pub fn multipoles(state: &DickeState) -> Vec<C64> {
    let n = state.n_atoms;
    let j = n as f64 / 2.0;
    let mut out = vec![C64::new(0.0, 0.0); (n + 1) * (n + 1)];
    for k in 0..=n {
        for q in -(k as i64)..=(k as i64) {
            let mut acc = C64::new(0.0, 0.0);
            for i1 in 0..=n {
                let m1 = j - i1 as f64;
                let m2 = m1 - q as f64;
                if m2.abs() > j + 1e-9 {
                    continue;
                }
                let i2 = (j - m2).round() as usize;
                let phase_exp = (j - m1 - q as f64).round() as i64;
                let sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let cg = clebsch_gordan(j, m1, j, -m2, k as f64, q as f64);
                acc += state.rho[(i1, i2)] * (sign * cg);
            }
            out[lm_index(k, q)] = acc;
        }
    }
    out
}

/// Sample points on the sphere: Gauss-Legendre in cos θ times uniform φ starting at φ = 0 (+x).
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    pub theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SphereGrid {
    pub fn gauss_legendre(n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        // descending cos θ gives ascending θ
        let theta = x.iter().rev().map(|c| c.acos()).collect();
        let theta_weights = w.into_iter().rev().collect();
        let phi = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        Self { theta, theta_weights, phi }
    }

    /// Grid exact for band limit 2N: enough for the round-trip projection.
    pub fn for_atoms(n_atoms: usize) -> Self {
        let nt = n_atoms + 1 + (n_atoms + 1) % 2;
        Self::gauss_legendre(nt, 2 * n_atoms + 2)
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight dΩ attached to node (it, ip).
    pub fn weight(&self, it: usize) -> f64 {
        self.theta_weights[it] * 2.0 * PI / self.phi.len() as f64
    }
}

/// Wigner values on a grid, θ-major.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest imaginary residual encountered before discarding it.
    pub max_imag: f64,
}

impl WignerField {
    pub fn argmax(&self) -> (f64, f64, f64) {
        let (i, v) = self.values.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (self.theta[i], self.phi[i], v)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["theta", "phi", "value"])?;
        for ((t, p), v) in self.theta.iter().zip(&self.phi).zip(&self.values) {
            w.write_record([t.to_string(), p.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluate W(θ, φ) = √((N+1)/4π) Σ_kq ρ_kq Y_k^q(θ, φ) on every grid node.
pub fn wigner_sphere(state: &DickeState, grid: &SphereGrid) -> Result<WignerField> {
    if grid.is_empty() {
        return Err(Error::param("empty angular grid"));
    }
    let n = state.n_atoms;
    let coeffs = multipoles(state);
    let norm = ((n + 1) as f64 / (4.0 * PI)).sqrt();
    let mut field = WignerField { theta: vec![], phi: vec![], values: vec![], max_imag: 0.0 };
    for &t in &grid.theta {
        for &p in &grid.phi {
            let y = spherical_harmonics(n, t, p);
            let w: C64 = coeffs.iter().zip(&y).map(|(c, y)| c * y).sum::<C64>() * norm;
            field.theta.push(t);
            field.phi.push(p);
            field.values.push(w.re);
            field.max_imag = field.max_imag.max(w.im.abs());
        }
    }
    Ok(field)
}

/// Recover ρ_kq from a sampled field by spherical-harmonic quadrature.
pub fn project_multipoles(field: &WignerField, grid: &SphereGrid, n_atoms: usize) -> Vec<C64> {
    let norm = ((n_atoms + 1) as f64 / (4.0 * PI)).sqrt();
    let mut out = vec![C64::new(0.0, 0.0); (n_atoms + 1) * (n_atoms + 1)];
    let np = grid.phi.len();
    for (it, &t) in grid.theta.iter().enumerate() {
        for (ip, &p) in grid.phi.iter().enumerate() {
            let w = field.values[it * np + ip] * grid.weight(it) / norm;
            for (o, y) in out.iter_mut().zip(spherical_harmonics(n_atoms, t, p)) {
                *o += y.conj() * w;
            }
        }
    }
    out
}
