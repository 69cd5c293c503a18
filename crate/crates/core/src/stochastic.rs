//! Random increments, SDE stepping, signal processes and LG-system discretization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A reproducible Gaussian stream. Each trajectory owns one, keyed by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A standard normal deviate.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Wiener increment ~ N(0, dt).
pub fn wiener_increment(rng: &mut RngStream, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    Ok(dt.sqrt() * rng.normal())
}

/// One Euler-Maruyama step x' = x + a(x) dt + b(x) dW.
///
/// `diffusion` returns a matrix with one column per noise channel.
pub fn euler_maruyama_step<A, B>(
    x: &DVector<f64>,
    drift: A,
    diffusion: B,
    dt: f64,
    dw: &DVector<f64>,
) -> Result<DVector<f64>>
where
    A: Fn(&DVector<f64>) -> DVector<f64>,
    B: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let a = drift(x);
    let b = diffusion(x);
    if a.len() != x.len() || b.nrows() != x.len() || b.ncols() != dw.len() {
        return Err(Error::Dimension(format!(
            "state {}, drift {}, diffusion {}x{}, noise {}",
            x.len(),
            a.len(),
            b.nrows(),
            b.ncols(),
            dw.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical(0, format!("non-finite drift/diffusion at x = {x:?}")));
    }
    Ok(x + a * dt + b * dw)
}

/// Ornstein-Uhlenbeck parameters: dω = -χ(ω - ω̄)dt + √q dW.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub chi: f64,
    pub q_omega: f64,
    #[serde(default)]
    pub omega_bar: f64,
}

impl OuParams {
    pub fn new(chi: f64, q_omega: f64, omega_bar: f64) -> Result<Self> {
        let p = Self { chi, q_omega, omega_bar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi >= 0.0) || !(self.q_omega >= 0.0) || !self.omega_bar.is_finite() {
            return Err(Error::param(format!("invalid OU parameters {self:?}")));
        }
        Ok(())
    }

    /// Mean and variance of the exact transition over `dt`.
    pub fn transition(&self, omega: f64, dt: f64) -> (f64, f64) {
        let decay = (-self.chi * dt).exp();
        let mean = self.omega_bar + (omega - self.omega_bar) * decay;
        let var = if self.chi == 0.0 {
            self.q_omega * dt
        } else {
            // (q/2χ)(1 - e^{-2χ dt}) written with expm1 for small χ dt.
            -self.q_omega / (2.0 * self.chi) * (-2.0 * self.chi * dt).exp_m1()
        };
        (mean, var)
    }

    /// Variance after time t starting from a known value.
    pub fn variance_at(&self, t: f64) -> f64 {
        self.transition(0.0, t).1
    }
}

/// Exact OU transition driven by a fresh normal deviate.
pub fn ou_step(omega: f64, params: &OuParams, dt: f64, rng: &mut RngStream) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    params.validate()?;
    Ok(ou_step_with(omega, params, dt, rng.normal()))
}

/// Exact OU transition with a supplied standard normal deviate.
pub fn ou_step_with(omega: f64, params: &OuParams, dt: f64, xi: f64) -> f64 {
    let (mean, var) = params.transition(omega, dt);
    mean + var.sqrt() * xi
}

/// Filtered Van der Pol oscillator producing a cardiac-like waveform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdpParams {
    pub p: f64,
    pub k: f64,
    pub m: f64,
    pub c: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub nu0: f64,
    pub omega0: f64,
    pub upsilon0: f64,
}

impl VdpParams {
    /// Coefficients that give a ≈20 ms cycle.
    pub fn cardiac() -> Self {
        Self { p: 1e3, k: 1.0, m: 0.00098, c: 1.0, t: 0.003, nu0: 0.0045, omega0: 0.0045, upsilon0: 0.0045 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.p, self.k, self.m, self.c, self.t];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param(format!("VdP coefficients must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SignalState {
        SignalState::Vdp { nu: self.nu0, omega: self.omega0, upsilon: self.upsilon0 }
    }

    /// Right-hand side (dν, dω, dυ)/dt.
    pub fn drift(&self, nu: f64, omega: f64, upsilon: f64) -> [f64; 3] {
        [
            -self.p * omega,
            self.k / self.m * nu + 2.0 * self.c / self.m * (1.0 - upsilon) * omega,
            (nu.abs() - nu) / (2.0 * self.t) - upsilon / self.t,
        ]
    }
}

/// The true Larmor-frequency signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalState {
    Constant { omega: f64 },
    Ou { omega: f64 },
    Vdp { nu: f64, omega: f64, upsilon: f64 },
}

impl SignalState {
    pub fn omega(&self) -> f64 {
        match *self {
            SignalState::Constant { omega } | SignalState::Ou { omega } | SignalState::Vdp { omega, .. } => omega,
        }
    }

    /// Components in model order: `[ω]` or `[ν, ω, υ]`.
    pub fn components(&self) -> Vec<f64> {
        match *self {
            SignalState::Constant { omega } | SignalState::Ou { omega } => vec![omega],
            SignalState::Vdp { nu, omega, upsilon } => vec![nu, omega, upsilon],
        }
    }
}

/// One explicit Euler step of the Van der Pol signal.
pub fn vdp_step(s: &SignalState, params: &VdpParams, dt: f64) -> Result<SignalState> {
    if !(dt > 0.0) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    match *s {
        SignalState::Vdp { nu, omega, upsilon } => {
            let d = params.drift(nu, omega, upsilon);
            Ok(SignalState::Vdp { nu: nu + d[0] * dt, omega: omega + d[1] * dt, upsilon: upsilon + d[2] * dt })
        }
        _ => Err(Error::param("vdp_step requires a VdP signal state")),
    }
}

/// Signal model shared by the truth simulation and the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalModel {
    Constant,
    Ou(OuParams),
    /// Van der Pol waveform with additive white noise of strength `q_omega` on ω.
    Vdp { params: VdpParams, q_omega: f64 },
}

impl SignalModel {
    /// Number of signal components.
    pub fn dim(&self) -> usize {
        match self {
            SignalModel::Vdp { .. } => 3,
            _ => 1,
        }
    }

    /// Position of ω among the signal components.
    pub fn omega_index(&self) -> usize {
        match self {
            SignalModel::Vdp { .. } => 1,
            _ => 0,
        }
    }

    /// Diffusion strength √q on ω.
    pub fn noise_amplitude(&self) -> f64 {
        match self {
            SignalModel::Constant => 0.0,
            SignalModel::Ou(p) => p.q_omega.sqrt(),
            SignalModel::Vdp { q_omega, .. } => q_omega.sqrt(),
        }
    }

    pub fn state_from(&self, comps: &[f64]) -> SignalState {
        match self {
            SignalModel::Constant => SignalState::Constant { omega: comps[0] },
            SignalModel::Ou(_) => SignalState::Ou { omega: comps[0] },
            SignalModel::Vdp { .. } => SignalState::Vdp { nu: comps[0], omega: comps[1], upsilon: comps[2] },
        }
    }

    /// Deterministic drift of the signal components.
    pub fn drift(&self, comps: &[f64]) -> Vec<f64> {
        match self {
            SignalModel::Constant => vec![0.0],
            SignalModel::Ou(p) => vec![-p.chi * (comps[0] - p.omega_bar)],
            SignalModel::Vdp { params, .. } => params.drift(comps[0], comps[1], comps[2]).to_vec(),
        }
    }

    /// Jacobian of the signal drift.
    pub fn drift_jacobian(&self, comps: &[f64]) -> DMatrix<f64> {
        match self {
            SignalModel::Constant => DMatrix::zeros(1, 1),
            SignalModel::Ou(p) => DMatrix::from_element(1, 1, -p.chi),
            SignalModel::Vdp { params: v, .. } => {
                let (nu, omega, upsilon) = (comps[0], comps[1], comps[2]);
                // d/dν of (|ν| - ν)/2T, with sgn(0) = 0 at the kink.
                let sgn = if nu == 0.0 { 0.0 } else { nu.signum() };
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        0.0,
                        -v.p,
                        0.0,
                        v.k / v.m,
                        2.0 * v.c * (1.0 - upsilon) / v.m,
                        -2.0 * v.c * omega / v.m,
                        (sgn - 1.0) / (2.0 * v.t),
                        0.0,
                        -1.0 / v.t,
                    ],
                )
            }
        }
    }

    /// Advance the true signal over `dt` given the increment `dw_omega` ~ N(0, dt).
    ///
    /// OU uses the exact transition. VdP takes a clean Euler step; its noise only
    /// enters the sensed value, see [`SignalModel::sensed_omega`].
    pub fn step(&self, s: &SignalState, dt: f64, dw_omega: f64) -> Result<SignalState> {
        match (self, *s) {
            (SignalModel::Constant, SignalState::Constant { .. }) => Ok(*s),
            (SignalModel::Ou(p), SignalState::Ou { omega }) => {
                Ok(SignalState::Ou { omega: ou_step_with(omega, p, dt, dw_omega / dt.sqrt()) })
            }
            (SignalModel::Vdp { params, .. }, SignalState::Vdp { .. }) => vdp_step(s, params, dt),
            _ => Err(Error::param(format!("signal state {s:?} does not match model {self:?}"))),
        }
    }

    /// Larmor frequency seen by the atoms during a step: the clean VdP waveform
    /// plus √q·dWω, or ω itself for the other models.
    pub fn sensed_omega(&self, s: &SignalState, dw_omega: f64) -> f64 {
        match self {
            SignalModel::Vdp { q_omega, .. } => s.omega() + q_omega.sqrt() * dw_omega,
            _ => s.omega(),
        }
    }
}

/// Discrete-time LG model produced by [`lg_discretize`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// First-order discretization of a continuous LG model on a step `dt`.
#[allow(clippy::too_many_arguments)]
pub fn lg_discretize(
    f: &DMatrix<f64>,
    b: &DMatrix<f64>,
    g: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    dt: f64,
) -> Result<DiscreteModel> {
    if !(dt > 0.0) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    let n = f.nrows();
    let ok = f.is_square()
        && b.nrows() == n
        && g.nrows() == n
        && h.ncols() == n
        && q.is_square()
        && q.nrows() == g.ncols()
        && r.is_square()
        && r.nrows() == h.nrows();
    if !ok {
        return Err(Error::Dimension("inconsistent LG model matrices".into()));
    }
    Ok(DiscreteModel {
        a: DMatrix::identity(n, n) + f * dt,
        b: b * dt,
        g: g * dt,
        h: h.clone(),
        q: q / dt,
        r: r / dt,
    })
}
