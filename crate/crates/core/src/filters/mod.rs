//! Kalman filters: discrete, continuous correlated (Kalman-Bucy) and extended.
//!
//! Continuous filters consume photocurrent increments dy on the simulation grid;
//! the rate form is I(t) = dy/dt.

mod ekf;
mod riccati;

pub use ekf::{ekf_jacobians, ekf_jacobians_ou, ekf_jacobians_vdp, ekf_step, Ekf, EkfModel};
pub use riccati::{integrate_riccati, riccati_rhs, RiccatiSolution};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::DiscreteModel;

/// Eigenvalues of Σ above this (negative) level are clipped to zero; below it they are an error.
pub const CLIP_TOL: f64 = 1e-8;

/// Estimate and error covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub x_hat: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl FilterState {
    pub fn new(x_hat: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() != x_hat.len() {
            return Err(Error::Dimension(format!("estimate of length {} with {}x{} covariance", x_hat.len(), sigma.nrows(), sigma.ncols())));
        }
        Ok(Self { x_hat, sigma })
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    /// Σ ← (Σ+Σᵀ)/2; returns the largest asymmetry removed.
    pub fn symmetrize(&mut self) -> f64 {
        symmetrize(&mut self.sigma)
    }
}

pub(crate) fn symmetrize(s: &mut DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = s[(i, j)];
            let b = s[(j, i)];
            worst = worst.max((a - b).abs());
            let m = 0.5 * (a + b);
            s[(i, j)] = m;
            s[(j, i)] = m;
        }
    }
    worst
}

/// Noise covariances of dw (Q), dv (R) and their cross term (S).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl NoiseSpec {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() || s.nrows() != q.nrows() || s.ncols() != r.nrows() {
            return Err(Error::Dimension("noise covariances have inconsistent shapes".into()));
        }
        let qe = q.clone().symmetric_eigenvalues();
        if qe.iter().any(|&e| e < -1e-12) {
            return Err(Error::param("Q must be positive semidefinite"));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::param("R must be positive definite"));
        }
        Ok(Self { q, r, s })
    }

    /// Uncorrelated noise.
    pub fn uncorrelated(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let s = DMatrix::zeros(q.nrows(), r.nrows());
        Self::new(q, r, s)
    }
}

/// One predict/update cycle of the discrete uncorrelated Kalman filter.
pub fn kf_discrete_step(fs: &FilterState, y: &DVector<f64>, model: &DiscreteModel, u: &DVector<f64>) -> Result<FilterState> {
    let n = fs.dim();
    if model.a.nrows() != n || model.h.ncols() != n || y.len() != model.h.nrows() || u.len() != model.b.ncols() {
        return Err(Error::Dimension("discrete model does not match filter state".into()));
    }
    let x_pred = &model.a * &fs.x_hat + &model.b * u;
    let p_pred = &model.a * &fs.sigma * model.a.transpose() + &model.g * &model.q * model.g.transpose();
    let ht = model.h.transpose();
    let s = &model.h * &p_pred * &ht + &model.r;
    let s_inv = s.clone().try_inverse().ok_or_else(|| Error::numerical(0, "singular innovation covariance"))?;
    let k = &p_pred * &ht * s_inv;
    let x_hat = &x_pred + &k * (y - &model.h * &x_pred);
    let mut sigma = (DMatrix::identity(n, n) - &k * &model.h) * p_pred;
    symmetrize(&mut sigma);
    Ok(FilterState { x_hat, sigma })
}

/// Correlated gain K = (ΣHᵀ + GS)R⁻¹.
pub fn correlated_gain(sigma: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>, noise: &NoiseSpec) -> Result<DMatrix<f64>> {
    let r_inv = noise.r.clone().try_inverse().ok_or_else(|| Error::numerical(0, "singular measurement covariance"))?;
    Ok((sigma * h.transpose() + g * &noise.s) * r_inv)
}

/// Euler step of the continuous correlated Kalman-Bucy filter driven by the increment `dy`.
#[allow(clippy::too_many_arguments)]
pub fn kb_correlated_step(
    fs: &FilterState,
    dy: &DVector<f64>,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    noise: &NoiseSpec,
    bu: &DVector<f64>,
    dt: f64,
) -> Result<FilterState> {
    let n = fs.dim();
    if f.nrows() != n || g.nrows() != n || h.ncols() != n || dy.len() != h.nrows() || bu.len() != n || g.ncols() != noise.q.nrows() {
        return Err(Error::Dimension("model does not match filter state".into()));
    }
    let k = correlated_gain(&fs.sigma, g, h, noise)?;
    let innov = dy - h * &fs.x_hat * dt;
    let x_hat = &fs.x_hat + (f * &fs.x_hat + bu) * dt + &k * innov;
    let d_sigma = f * &fs.sigma + &fs.sigma * f.transpose() - &k * &noise.r * k.transpose() + g * &noise.q * g.transpose();
    let mut sigma = &fs.sigma + d_sigma * dt;
    symmetrize(&mut sigma);
    if x_hat.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical(0, "non-finite Kalman-Bucy update"));
    }
    Ok(FilterState { x_hat, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn model(h: f64, r: f64) -> DiscreteModel {
        DiscreteModel { a: scalar(1.0), b: scalar(0.0), g: scalar(1.0), h: scalar(h), q: scalar(0.0), r: scalar(r) }
    }

    #[test]
    fn no_measurement_is_pure_prediction() {
        let fs = FilterState::new(DVector::from_element(1, 2.0), scalar(3.0)).unwrap();
        let mut m = model(0.0, 1.0);
        m.a = scalar(0.5);
        let out = kf_discrete_step(&fs, &DVector::from_element(1, 100.0), &m, &DVector::from_element(1, 0.0)).unwrap();
        assert_eq!(out.x_hat[0], 1.0);
        assert_eq!(out.sigma[(0, 0)], 0.75);
    }

    #[test]
    fn huge_noise_ignores_measurement() {
        let fs = FilterState::new(DVector::from_element(1, 0.0), scalar(1.0)).unwrap();
        let out = kf_discrete_step(&fs, &DVector::from_element(1, 5.0), &model(1.0, 1e15), &DVector::from_element(1, 0.0)).unwrap();
        assert!(out.x_hat[0].abs() < 1e-13);
    }

    #[test]
    fn constant_state_recursion() {
        let (s0, r) = (2.0, 0.7);
        let mut fs = FilterState::new(DVector::from_element(1, 0.0), scalar(s0 * s0)).unwrap();
        for k in 1..=50 {
            fs = kf_discrete_step(&fs, &DVector::from_element(1, 0.3), &model(1.0, r), &DVector::from_element(1, 0.0)).unwrap();
            let expect = s0 * s0 * r / (r + k as f64 * s0 * s0);
            assert!((fs.sigma[(0, 0)] / expect - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_innovation_rejected() {
        let fs = FilterState::new(DVector::from_element(1, 0.0), scalar(0.0)).unwrap();
        assert!(kf_discrete_step(&fs, &DVector::from_element(1, 0.0), &model(1.0, 0.0), &DVector::from_element(1, 0.0)).is_err());
    }

    #[test]
    fn correlated_gain_limits() {
        let h = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let g = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let un = NoiseSpec::uncorrelated(DMatrix::identity(2, 2), scalar(0.5)).unwrap();
        let k = correlated_gain(&sigma, &g, &h, &un).unwrap();
        assert!((k - &sigma * h.transpose() * 2.0).norm() < 1e-15);
        let co = NoiseSpec::new(DMatrix::identity(2, 2), scalar(1.0), DMatrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(correlated_gain(&DMatrix::zeros(2, 2), &g, &h, &un).unwrap().norm(), 0.0);
        assert!(correlated_gain(&DMatrix::zeros(2, 2), &g, &h, &co).unwrap()[(0, 0)] == 1.5);
        assert!(NoiseSpec::new(DMatrix::identity(2, 2), scalar(0.0), DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn kb_step_dimensions_and_zero_innovation() {
        let fs = FilterState::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::zeros(2, 2)).unwrap();
        let noise = NoiseSpec::uncorrelated(DMatrix::identity(2, 2), scalar(1.0)).unwrap();
        let f = DMatrix::zeros(2, 2);
        let g = DMatrix::zeros(2, 2);
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let out = kb_correlated_step(&fs, &DVector::from_element(1, 1e-3), &f, &g, &h, &noise, &DVector::zeros(2), 1e-3).unwrap();
        assert_eq!(out.x_hat, fs.x_hat);
        assert!(kb_correlated_step(&fs, &DVector::from_element(2, 0.0), &f, &g, &h, &noise, &DVector::zeros(2), 1e-3).is_err());
    }
}
