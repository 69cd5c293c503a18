//! Feedback laws: field compensation and the steady LQR on the LG model.
//!
//! The LG plant is x = (⟨Jy⟩, ω) with A = [[0, J], [0, −χ]] and B = (J, 0)ᵀ.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic cost weights p_J⟨Jy⟩² + p_ω ω² + ν u².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqrWeights {
    pub p_j: f64,
    /// Does not enter the gain; kept for completeness of the cost.
    pub p_omega: f64,
    pub nu: f64,
}

impl LqrWeights {
    pub fn new(p_j: f64, p_omega: f64, nu: f64) -> Result<Self> {
        let w = Self { p_j, p_omega, nu };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_j >= 0.0) || !(self.p_omega >= 0.0) || !(self.nu > 0.0) {
            return Err(Error::param(format!("LQR weights need p_J, p_ω ≥ 0 and ν > 0: {self:?}")));
        }
        Ok(())
    }

    /// λ = √(p_J/ν).
    pub fn lambda(&self) -> f64 {
        (self.p_j / self.nu).sqrt()
    }
}

/// Feedback row u = −(g_y⟨Jy⟩ + g_ω ω).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LqrGain {
    pub g_y: f64,
    pub g_omega: f64,
}

/// Steady LQR gain (λ, 1/(1 + χ/(Jλ))).
pub fn lqr_gain(w: &LqrWeights, j: f64, chi: f64) -> Result<LqrGain> {
    w.validate()?;
    if !(j > 0.0) || !(chi >= 0.0) {
        return Err(Error::param(format!("need J > 0 and χ ≥ 0, got J = {j}, χ = {chi}")));
    }
    let lambda = w.lambda();
    let g_omega = if lambda == 0.0 {
        if chi == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 / (1.0 + chi / (j * lambda))
    };
    Ok(LqrGain { g_y: lambda, g_omega })
}

/// Stabilizing solution Λ of the algebraic Riccati equation; needs χ > 0 for a finite Λ₂₂.
pub fn are_solution(w: &LqrWeights, j: f64, chi: f64) -> Result<Matrix2<f64>> {
    w.validate()?;
    if !(j > 0.0) || !(chi > 0.0) {
        return Err(Error::param("the ARE has a finite solution only for J > 0 and χ > 0"));
    }
    let s = (w.p_j * w.nu).sqrt();
    let l11 = s / j;
    let l12 = s / (chi + j * w.lambda());
    let l22 = (2.0 * j * l12 - j * j * l12 * l12 / w.nu + w.p_omega) / (2.0 * chi);
    Ok(Matrix2::new(l11, l12, l12, l22))
}

/// AᵀΛ + ΛA − ΛBν⁻¹BᵀΛ + P.
pub fn are_residual(lambda: &Matrix2<f64>, w: &LqrWeights, j: f64, chi: f64) -> Matrix2<f64> {
    let a = Matrix2::new(0.0, j, 0.0, -chi);
    let b = nalgebra::Vector2::new(j, 0.0);
    let p = Matrix2::new(w.p_j, 0.0, 0.0, w.p_omega);
    a.transpose() * lambda + lambda * a - lambda * b * b.transpose() * lambda / w.nu + p
}

/// u = −ω̂ − λ⟨Ĵy⟩ with ⟨Ĵy⟩ in collective units.
pub fn lqr_control(omega_hat: f64, jy_hat: f64, lambda: f64) -> f64 {
    -omega_hat - lambda * jy_hat
}

/// u = −ω̂.
pub fn field_compensation(omega_hat: f64) -> f64 {
    -omega_hat
}

/// Feedback law applied by the scenario runner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Controller {
    #[default]
    None,
    Compensation,
    /// LQR with gain λ; 1/J when omitted.
    Lqr { lambda: Option<f64> },
}

impl Controller {
    pub fn validate(&self) -> Result<()> {
        if let Controller::Lqr { lambda: Some(l) } = self {
            if !(*l >= 0.0) || !l.is_finite() {
                return Err(Error::param(format!("LQR gain must be finite and non-negative, got {l}")));
            }
        }
        Ok(())
    }

    /// Control from the current estimate; `u_max` saturates |u| when given.
    pub fn control(&self, omega_hat: f64, jy_hat: f64, j: f64, u_max: Option<f64>) -> f64 {
        let u = match self {
            Controller::None => 0.0,
            Controller::Compensation => field_compensation(omega_hat),
            Controller::Lqr { lambda } => lqr_control(omega_hat, jy_hat, lambda.unwrap_or(1.0 / j)),
        };
        match u_max {
            Some(m) => u.clamp(-m, m),
            None => u,
        }
    }
}
