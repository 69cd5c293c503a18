//! Co-moving Gaussian (CoG) moment model, its linear-Gaussian specialization and
//! the analytic V_y(t) solutions.
//!
//! Internally the state is √N-normalized: X = ⟨Jx⟩/√N, Y = ⟨Jy⟩/√N and the second
//! moments are divided by N.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sme::{SensorParams, StepRecord};
use crate::special::{bessel_ie, bessel_ke};
use crate::spin::SpinMoments;
use crate::stochastic::{OuParams, SignalModel, SignalState};

/// First and second moments of the collective spin in collective-spin units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub mean_jx: f64,
    pub mean_jy: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
    pub cov_xy: f64,
    pub signal: SignalState,
    /// False when the state was not built from a coherent spin state; such starts are unsupported.
    pub css_start: bool,
}

impl MomentState {
    /// CSS along +x.
    pub fn css(n_atoms: f64, signal: SignalState) -> Self {
        Self {
            mean_jx: n_atoms / 2.0,
            mean_jy: 0.0,
            var_x: 0.0,
            var_y: n_atoms / 4.0,
            var_z: n_atoms / 4.0,
            cov_xy: 0.0,
            signal,
            css_start: true,
        }
    }

    pub fn normalized(&self, n_atoms: f64) -> [f64; 6] {
        let s = n_atoms.sqrt();
        [self.mean_jx / s, self.mean_jy / s, self.var_x / n_atoms, self.var_y / n_atoms, self.var_z / n_atoms, self.cov_xy / n_atoms]
    }

    pub fn from_normalized(z: &[f64; 6], n_atoms: f64, signal: SignalState, css_start: bool) -> Self {
        let s = n_atoms.sqrt();
        Self {
            mean_jx: z[0] * s,
            mean_jy: z[1] * s,
            var_x: z[2] * n_atoms,
            var_y: z[3] * n_atoms,
            var_z: z[4] * n_atoms,
            cov_xy: z[5] * n_atoms,
            signal,
            css_start,
        }
    }

    /// Spin moments with ⟨Jz⟩ = C_xz = C_yz = 0.
    pub fn spin_moments(&self) -> SpinMoments {
        let mut cov = Matrix3::zeros();
        cov[(0, 0)] = self.var_x;
        cov[(1, 1)] = self.var_y;
        cov[(2, 2)] = self.var_z;
        cov[(0, 1)] = self.cov_xy;
        cov[(1, 0)] = self.cov_xy;
        SpinMoments { mean: Vector3::new(self.mean_jx, self.mean_jy, 0.0), cov }
    }
}

/// Drift of the normalized moments (X, Y, VX, VY, VZ, CXY) at total rotation rate `w` = ω+u.
pub fn normalized_drift(z: &[f64; 6], w: f64, p: &SensorParams) -> [f64; 6] {
    let [x, y, vx, vy, vz, cxy] = *z;
    let (kc, kl, m, eta, n) = (p.kappa_coll, p.kappa_loc, p.m, p.eta, p.n_atoms);
    [
        -w * y - 0.5 * (kc + 2.0 * kl + m) * x,
        w * x - 0.5 * (kc + 2.0 * kl) * y,
        -2.0 * w * cxy + kc * (vy + y * y - vx) + kl * (0.5 - 2.0 * vx) + m * (vz - vx - 4.0 * eta * n * cxy * cxy),
        2.0 * w * cxy + kc * (vx + x * x - vy) + kl * (0.5 - 2.0 * vy) - 4.0 * eta * m * n * vy * vy,
        m * (vx + x * x - vz),
        w * (vx - vy) - kc * (2.0 * cxy + x * y) - 2.0 * kl * cxy - 0.5 * m * cxy * (1.0 + 8.0 * eta * n * vy),
    ]
}

/// Coefficient of dW for the normalized moments; only the means are stochastic.
pub fn normalized_diffusion(z: &[f64; 6], p: &SensorParams) -> [f64; 6] {
    let g = 2.0 * (p.eta * p.m * p.n_atoms).sqrt();
    [g * z[5], g * z[3], 0.0, 0.0, 0.0, 0.0]
}

/// Deterministic right-hand side in collective units: six spin moments followed by the signal components.
pub fn cog_drift(x: &MomentState, u: f64, p: &SensorParams, signal: &SignalModel) -> Vec<f64> {
    let n = p.n_atoms;
    let z = x.normalized(n);
    let d = normalized_drift(&z, x.signal.omega() + u, p);
    let s = n.sqrt();
    let mut out = vec![d[0] * s, d[1] * s, d[2] * n, d[3] * n, d[4] * n, d[5] * n];
    out.extend(signal.drift(&x.signal.components()));
    out
}

/// Diffusion columns (dW channel, dW_ω channel) in collective units.
pub fn cog_diffusion(x: &MomentState, p: &SensorParams, signal: &SignalModel) -> (Vec<f64>, Vec<f64>) {
    let g = 2.0 * (p.eta * p.m).sqrt();
    let dim = 6 + signal.dim();
    let mut dw = vec![0.0; dim];
    dw[0] = g * x.cov_xy;
    dw[1] = g * x.var_y;
    let mut dw_omega = vec![0.0; dim];
    dw_omega[6 + signal.omega_index()] = signal.noise_amplitude();
    (dw, dw_omega)
}

/// Conditional moment evolution in normalized variables.
#[derive(Clone, Debug)]
pub struct CogEngine {
    params: SensorParams,
    z: [f64; 6],
    clamped: usize,
    steps: usize,
    css_start: bool,
}

impl CogEngine {
    /// Engine started from the CSS along +x.
    pub fn new(params: SensorParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_atoms;
        Ok(Self { params, z: [0.5 * n.sqrt(), 0.0, 0.0, 0.25, 0.25, 0.0], clamped: 0, steps: 0, css_start: true })
    }

    /// Engine started from arbitrary moments (flagged as a non-CSS start unless it is one).
    pub fn from_moments(params: SensorParams, x: &MomentState) -> Result<Self> {
        params.validate()?;
        let z = x.normalized(params.n_atoms);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("non-finite moment state"));
        }
        Ok(Self { params, z, clamped: 0, steps: 0, css_start: x.css_start })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    pub fn normalized_state(&self) -> [f64; 6] {
        self.z
    }

    /// Number of times a variance was clamped at zero.
    pub fn clamp_count(&self) -> usize {
        self.clamped
    }

    pub fn css_start(&self) -> bool {
        self.css_start
    }

    pub fn moment_state(&self, signal: SignalState) -> MomentState {
        MomentState::from_normalized(&self.z, self.params.n_atoms, signal, self.css_start)
    }

    pub fn moments(&self) -> SpinMoments {
        self.moment_state(SignalState::Constant { omega: 0.0 }).spin_moments()
    }

    /// Euler-Maruyama step at Larmor frequency `omega` with control `u`, driven by `dw`.
    pub fn step(&mut self, omega: f64, u: f64, dt: f64, dw: f64) -> Result<StepRecord> {
        if !(dt > 0.0) {
            return Err(Error::param(format!("dt must be positive, got {dt}")));
        }
        let p = self.params;
        let dy = p.photocurrent(self.z[1] * p.n_atoms.sqrt(), dt, dw);
        let a = normalized_drift(&self.z, omega + u, &p);
        let b = normalized_diffusion(&self.z, &p);
        let mut next = [0.0; 6];
        for i in 0..6 {
            next[i] = self.z[i] + a[i] * dt + b[i] * dw;
        }
        for v in &mut next[2..5] {
            if *v < 0.0 {
                *v = 0.0;
                self.clamped += 1;
            }
        }
        self.steps += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(self.steps, format!("non-finite CoG state {next:?} from {:?}", self.z)));
        }
        self.z = next;
        Ok(StepRecord { dy, dw, moments: self.moments() })
    }
}

/// One CoG step including the signal; returns the new state.
#[allow(clippy::too_many_arguments)]
pub fn cog_step(
    x: &MomentState,
    u: f64,
    dt: f64,
    dw: f64,
    dw_omega: f64,
    p: &SensorParams,
    signal: &SignalModel,
) -> Result<MomentState> {
    let mut eng = CogEngine::from_moments(*p, x)?;
    eng.step(signal.sensed_omega(&x.signal, dw_omega), u, dt, dw)?;
    let next = signal.step(&x.signal, dt, dw_omega)?;
    Ok(eng.moment_state(next))
}

/// Continuous linear-Gaussian state-space model for x = (⟨Jy⟩, ω).
#[derive(Clone, Debug, PartialEq)]
pub struct LgModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl LgModel {
    fn assemble(f12: f64, g11: f64, chi: f64, q_omega: f64, p: &SensorParams) -> Self {
        Self {
            f: DMatrix::from_row_slice(2, 2, &[0.0, f12, 0.0, -chi]),
            g: DMatrix::from_row_slice(2, 2, &[g11, 0.0, 0.0, q_omega.sqrt()]),
            h: DMatrix::from_row_slice(1, 2, &[2.0 * p.eta * p.m.sqrt(), 0.0]),
            q: DMatrix::identity(2, 2),
            r: DMatrix::from_element(1, 1, p.eta),
            s: DMatrix::from_row_slice(2, 1, &[p.eta.sqrt(), 0.0]),
        }
    }
}

/// LG model at time t: F₁₂ = J e^{-(M+κc)t/2}, G₁₁ = 2√(ηM) V_y(t).
pub fn lg_model(t: f64, p: &SensorParams, ou: &OuParams) -> Result<LgModel> {
    if !(t >= 0.0) {
        return Err(Error::param(format!("time must be non-negative, got {t}")));
    }
    ou.validate()?;
    let r = p.m + p.kappa_coll;
    let f12 = p.j() * (-0.5 * r * t).exp();
    let g11 = 2.0 * (p.eta * p.m).sqrt() * vy_exact(t, p)?;
    Ok(LgModel::assemble(f12, g11, ou.chi, ou.q_omega, p))
}

/// Long-time LG model with the polarization decay dropped: F₁₂ = J, G₁₁ = J√κc.
pub fn lg_model_steady(p: &SensorParams, ou: &OuParams) -> Result<LgModel> {
    ou.validate()?;
    Ok(LgModel::assemble(p.j(), p.j() * p.kappa_coll.sqrt(), ou.chi, ou.q_omega, p))
}

/// Transition time between the short- and long-time V_y regimes.
pub fn t_star(p: &SensorParams) -> f64 {
    1.0 / (2.0 * p.j() * (p.m * p.kappa_coll * p.eta).sqrt())
}

/// Short-time form (J/2)(1+2Jtκc)/(1+2JtMη) e^{-(M+κc)t/2}.
pub fn vy_short(t: f64, p: &SensorParams) -> f64 {
    let j = p.j();
    0.5 * j * (1.0 + 2.0 * j * t * p.kappa_coll) / (1.0 + 2.0 * j * t * p.m * p.eta) * (-0.5 * (p.m + p.kappa_coll) * t).exp()
}

/// Long-time form (J/2)√(κc/ηM) e^{-(M+κc)t/2}.
pub fn vy_long(t: f64, p: &SensorParams) -> f64 {
    0.5 * p.j() * (p.kappa_coll / (p.eta * p.m)).sqrt() * (-0.5 * (p.m + p.kappa_coll) * t).exp()
}

/// Exact solution of dV/dt = -4ηM V² + κc J² e^{-(M+κc)t}, V(0) = J/2.
pub fn vy_exact(t: f64, p: &SensorParams) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("time must be finite and non-negative, got {t}")));
    }
    p.validate()?;
    let j = p.j();
    let (m, kc, eta) = (p.m, p.kappa_coll, p.eta);
    let r = m + kc;
    if eta * m == 0.0 {
        if r == 0.0 {
            return Ok(0.5 * j);
        }
        return Ok(0.5 * j - kc * j * j * (-r * t).exp_m1() / r);
    }
    if kc == 0.0 {
        return Ok(j / (2.0 + 4.0 * m * eta * j * t));
    }
    let s = (eta * kc * m).sqrt();
    let alpha = 2.0 * j * s / r;
    let beta = alpha * (-0.5 * r * t).exp();
    let (a2, b2) = (2.0 * alpha, 2.0 * beta);
    if !(b2 > 0.0) {
        return Err(Error::param(format!("t = {t} is beyond the representable range of the Bessel form")));
    }
    // Scaled Bessel functions; the common factor e^{2α-2β} has been divided out.
    let e = (2.0 * (b2 - a2)).exp();
    let (ka0, ka1) = (bessel_ke(0.0, a2), bessel_ke(1.0, a2));
    let (ia0, ia1) = (bessel_ie(0, a2), bessel_ie(1, a2));
    let num = bessel_ie(1, b2) * e * (s * ka0 - kc * ka1) + bessel_ke(1.0, b2) * (kc * ia1 + s * ia0);
    let den = 2.0 * bessel_ie(0, b2) * e * (s * ka1 - m * eta * ka0)
        + 2.0 * eta * m / r * bessel_ke(0.0, b2) * (r * ia0 + 2.0 * kc * j * ia1 / alpha);
    let v = j * (-0.5 * r * t).exp() * num / den;
    if !v.is_finite() {
        return Err(Error::numerical(0, format!("V_y evaluation failed at t = {t}")));
    }
    Ok(v)
}

/// Unconditional polarization and the validity checks of the LG window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JxUnconditional {
    pub mean: f64,
    /// χ ≤ 4/(3t)
    pub chi_ok: bool,
    /// q_ω ≤ 3/(2t³)
    pub q_ok: bool,
}

pub fn jx_unconditional(t: f64, p: &SensorParams, ou: Option<&OuParams>) -> Result<JxUnconditional> {
    if !(t >= 0.0) {
        return Err(Error::param(format!("time must be non-negative, got {t}")));
    }
    let mean = p.j() * (-0.5 * (p.m + p.kappa_coll) * t).exp();
    let (chi, q) = ou.map_or((0.0, 0.0), |o| (o.chi, o.q_omega));
    Ok(JxUnconditional { mean, chi_ok: chi * t <= 4.0 / 3.0, q_ok: q * t.powi(3) <= 1.5 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{dopri45, Tolerance};
    use nalgebra::DVector;

    fn sp(n: f64, m: f64, kc: f64, kl: f64) -> SensorParams {
        SensorParams::new(n, m, 1.0, kc, kl).unwrap()
    }

    #[test]
    fn css_drift_examples() {
        let n = 1000.0;
        let p = sp(n, 0.3, 0.0, 0.0);
        let x = MomentState::css(n, SignalState::Constant { omega: 0.0 });
        let d = cog_drift(&x, 0.0, &p, &SignalModel::Constant);
        assert!((d[3] + 4.0 * 0.3 * (n / 4.0).powi(2)).abs() < 1e-9 * n * n);
        assert!((d[0] + 0.15 * n / 2.0).abs() < 1e-9);
        assert_eq!(d[6], 0.0);
    }

    #[test]
    fn zero_state_only_local_inflow() {
        let p = sp(10.0, 0.2, 0.1, 0.3);
        let x = MomentState { mean_jx: 0.0, mean_jy: 0.0, var_x: 0.0, var_y: 0.0, var_z: 0.0, cov_xy: 0.0, signal: SignalState::Constant { omega: 2.0 }, css_start: false };
        let d = cog_drift(&x, 0.0, &p, &SignalModel::Constant);
        assert_eq!(&d[..6], &[0.0, 0.0, 0.3 * 5.0, 0.3 * 5.0, 0.0, 0.0]);
    }

    #[test]
    fn compensated_rotation_and_noiseless_fixed_point() {
        let p = sp(100.0, 0.0, 0.0, 0.0);
        let x = MomentState::css(100.0, SignalState::Constant { omega: 3.0 });
        let d = cog_drift(&x, -3.0, &p, &SignalModel::Constant);
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn diffusion_channels() {
        let p = sp(400.0, 0.5, 0.0, 0.0);
        let ou = SignalModel::Ou(OuParams::new(0.1, 9.0, 0.0).unwrap());
        let x = MomentState::css(400.0, SignalState::Ou { omega: 0.0 });
        let (dw, dwo) = cog_diffusion(&x, &p, &ou);
        assert_eq!(dw[0], 0.0);
        assert!((dw[1] - 2.0 * 0.5f64.sqrt() * 100.0).abs() < 1e-12);
        assert_eq!(dwo[6], 3.0);
        let (_, none) = cog_diffusion(&x, &p, &SignalModel::Constant);
        assert!(none.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn step_matches_drift_euler_and_record() {
        let p = sp(50.0, 0.05, 0.005, 0.0);
        let x = MomentState::css(50.0, SignalState::Constant { omega: 1.0 });
        let dt = 1e-6;
        let y = cog_step(&x, 0.2, dt, 0.0, 0.0, &p, &SignalModel::Constant).unwrap();
        let d = cog_drift(&x, 0.2, &p, &SignalModel::Constant);
        assert!((y.mean_jy - d[1] * dt).abs() < 1e-15);
        assert!((y.var_y - (x.var_y + d[3] * dt)).abs() < 1e-12);
        let mut eng = CogEngine::new(p).unwrap();
        let rec = eng.step(1.0, 0.0, 1e-3, 0.01).unwrap();
        assert!((rec.dy - 0.01).abs() < 1e-15);
        let jy = eng.moments().mean[1];
        let rec = eng.step(1.0, 0.0, 1e-3, 0.0).unwrap();
        assert!(jy != 0.0 && (rec.dy - 2.0 * 0.05f64.sqrt() * jy * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn transverse_length_non_increasing() {
        let p = sp(200.0, 0.1, 0.02, 0.01);
        let mut eng = CogEngine::new(p).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..1000 {
            eng.step(0.7, -0.7, 1e-3, 0.0).unwrap();
            let m = eng.moments().mean;
            let l = m[0] * m[0] + m[1] * m[1];
            assert!(l <= last);
            last = l;
        }
    }

    #[test]
    fn coarse_step_clamps_variance() {
        let p = sp(1e6, 1.0, 0.0, 0.0);
        let mut eng = CogEngine::new(p).unwrap();
        eng.step(0.0, 0.0, 0.1, 0.0).unwrap();
        assert!(eng.clamp_count() > 0);
        assert!(eng.normalized_state()[3] >= 0.0);
    }

    #[test]
    fn lg_model_examples() {
        let p = sp(1e4, 0.5, 0.0, 0.0);
        let ou = OuParams::new(0.0, 4.0, 0.0).unwrap();
        let m0 = lg_model(0.0, &p, &ou).unwrap();
        assert_eq!(m0.f[(0, 1)], 5e3);
        assert_eq!(m0.f[(1, 1)], 0.0);
        let t = 0.01;
        let m1 = lg_model(t, &p, &ou).unwrap();
        let vy = 5e3 / (2.0 + 4.0 * 0.5 * 5e3 * t);
        assert!((m1.g[(0, 0)] - 2.0 * 0.5f64.sqrt() * vy).abs() < 1e-9);
        assert_eq!(m1.g[(1, 1)], 2.0);
    }

    #[test]
    fn vy_initial_value_and_short_time() {
        let p = sp(1e6, 1.0, 0.01, 0.0);
        assert!((vy_exact(0.0, &p).unwrap() / 2.5e5 - 1.0).abs() < 1e-10);
        let t = 1e-3 * t_star(&p);
        let geremia = p.j() / (2.0 + 4.0 * p.j() * t * p.m);
        assert!((vy_exact(t, &p).unwrap() / geremia - 1.0).abs() < 1e-3);
    }

    fn vy_ode(p: &SensorParams, times: &[f64]) -> Vec<f64> {
        let j = p.j();
        let r = p.m + p.kappa_coll;
        let (ys, _) = dopri45(
            |t, v| DVector::from_element(1, -4.0 * p.eta * p.m * v[0] * v[0] + p.kappa_coll * j * j * (-r * t).exp()),
            0.0,
            &DVector::from_element(1, 0.5 * j),
            times,
            Tolerance { rtol: 1e-11, atol: 1e-300 },
        )
        .unwrap();
        ys.iter().map(|v| v[0]).collect()
    }

    #[test]
    fn vy_matches_ode_in_both_regimes() {
        for &(n, m, kc) in &[(100.0, 1.0, 0.1), (1e4, 0.5, 2.0), (2e9, 1e5, 0.1)] {
            let p = sp(n, m, kc, 0.0);
            let r = m + kc;
            let times: Vec<f64> = (1..=40).map(|k| k as f64 / 40.0 / r).collect();
            let ode = vy_ode(&p, &times);
            for (t, v) in times.iter().zip(&ode) {
                let e = vy_exact(*t, &p).unwrap();
                assert!((e / v - 1.0).abs() < 1e-6, "N={n} t={t}: {e} vs {v}");
            }
        }
    }

    #[test]
    fn jx_flags() {
        let p = sp(100.0, 0.0, 0.0, 0.0);
        let ou = OuParams::new(0.0, 1.5, 0.0).unwrap();
        assert_eq!(jx_unconditional(0.0, &p, None).unwrap().mean, 50.0);
        assert_eq!(jx_unconditional(7.0, &p, None).unwrap().mean, 50.0);
        assert!(jx_unconditional(0.999, &p, Some(&ou)).unwrap().q_ok);
        assert!(!jx_unconditional(1.001, &p, Some(&ou)).unwrap().q_ok);
    }
}
