//! Extended Kalman filter on the normalized CoG moments plus the signal state.
//!
//! State ordering: (X, Y, VX, VY, VZ, CXY) followed by the signal components,
//! `[ω]` for OU/constant signals and `[ν, ω, υ]` for VdP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{symmetrize, FilterState, NoiseSpec};
use crate::cog::{normalized_drift, MomentState};
use crate::error::{Error, Result};
use crate::sme::SensorParams;
use crate::stochastic::{OuParams, SignalModel, VdpParams};

/// The filter's internal model; its signal parameters may differ from the truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EkfModel {
    pub sensor: SensorParams,
    pub signal: SignalModel,
}

impl EkfModel {
    pub fn dim(&self) -> usize {
        6 + self.signal.dim()
    }

    pub fn omega_index(&self) -> usize {
        6 + self.signal.omega_index()
    }

    /// Q = I₂, R = η, S = (√η, 0)ᵀ.
    pub fn noise(&self) -> NoiseSpec {
        let eta = self.sensor.eta;
        NoiseSpec {
            q: DMatrix::identity(2, 2),
            r: DMatrix::from_element(1, 1, eta),
            s: DMatrix::from_row_slice(2, 1, &[eta.sqrt(), 0.0]),
        }
    }

    /// f(x̂, u, 0).
    pub fn drift(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        let z = [x[0], x[1], x[2], x[3], x[4], x[5]];
        let w = x[self.omega_index()] + u;
        let d = normalized_drift(&z, w, &self.sensor);
        let sig = self.signal.drift(&x.as_slice()[6..]);
        DVector::from_iterator(self.dim(), d.into_iter().chain(sig))
    }

    /// h(x̂) = 2η√(MN)·Ŷ.
    pub fn observation(&self, x: &DVector<f64>) -> f64 {
        let p = &self.sensor;
        2.0 * p.eta * (p.m * p.n_atoms).sqrt() * x[1]
    }
}

/// F = ∇ₓf, G = ∇_ξ f and H = ∇ₓh at the estimate.
pub fn ekf_jacobians(x: &DVector<f64>, u: f64, p: &SensorParams, signal: &SignalModel) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let d = 6 + signal.dim();
    if x.len() != d {
        return Err(Error::Dimension(format!("EKF state of length {} for a model of dimension {d}", x.len())));
    }
    let o = 6 + signal.omega_index();
    let w = x[o] + u;
    let (kc, kl, m, eta, n) = (p.kappa_coll, p.kappa_loc, p.m, p.eta, p.n_atoms);
    let (x1, x2, x3, x4, x6) = (x[0], x[1], x[2], x[3], x[5]);
    let emn = eta * m * n;

    let mut f = DMatrix::zeros(d, d);
    f[(0, 0)] = -(kc + 2.0 * kl + m) / 2.0;
    f[(0, 1)] = -w;
    f[(0, o)] = -x2;
    f[(1, 0)] = w;
    f[(1, 1)] = -(kc + 2.0 * kl) / 2.0;
    f[(1, o)] = x1;
    f[(2, 1)] = 2.0 * kc * x2;
    f[(2, 2)] = -(kc + 2.0 * kl + m);
    f[(2, 3)] = kc;
    f[(2, 4)] = m;
    f[(2, 5)] = -2.0 * w - 8.0 * emn * x6;
    f[(2, o)] = -2.0 * x6;
    f[(3, 0)] = 2.0 * kc * x1;
    f[(3, 2)] = kc;
    f[(3, 3)] = -kc - 2.0 * kl - 8.0 * emn * x4;
    f[(3, 5)] = 2.0 * w;
    f[(3, o)] = 2.0 * x6;
    f[(4, 0)] = 2.0 * m * x1;
    f[(4, 2)] = m;
    f[(4, 4)] = -m;
    f[(5, 0)] = -kc * x2;
    f[(5, 1)] = -kc * x1;
    f[(5, 2)] = w;
    f[(5, 3)] = -w - 4.0 * emn * x6;
    f[(5, 5)] = -(2.0 * kc + 2.0 * kl + m / 2.0) - 4.0 * emn * x4;
    f[(5, o)] = x3 - x4;
    f.view_mut((6, 6), (d - 6, d - 6)).copy_from(&signal.drift_jacobian(&x.as_slice()[6..]));

    let mut g = DMatrix::zeros(d, 2);
    let gm = 2.0 * emn.sqrt();
    g[(0, 0)] = gm * x6;
    g[(1, 0)] = gm * x4;
    g[(o, 1)] = signal.noise_amplitude();

    let mut h = DMatrix::zeros(1, d);
    h[(0, 1)] = 2.0 * eta * (m * n).sqrt();

    if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical(0, format!("non-finite Jacobian at x̂ = {:?}", x.as_slice())));
    }
    Ok((f, g, h))
}

/// Jacobians for the 7-component OU model.
pub fn ekf_jacobians_ou(x: &DVector<f64>, u: f64, p: &SensorParams, ou: &OuParams) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    ekf_jacobians(x, u, p, &SignalModel::Ou(*ou))
}

/// Jacobians for the 9-component VdP model with white-noise strength `q_omega` on ω.
pub fn ekf_jacobians_vdp(
    x: &DVector<f64>,
    u: f64,
    p: &SensorParams,
    vdp: &VdpParams,
    q_omega: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    ekf_jacobians(x, u, p, &SignalModel::Vdp { params: *vdp, q_omega })
}

/// One Euler step of the EKF driven by the photocurrent increment `dy`.
pub fn ekf_step(fs: &FilterState, dy: f64, dt: f64, u: f64, model: &EkfModel) -> Result<FilterState> {
    let (f, g, h) = ekf_jacobians(&fs.x_hat, u, &model.sensor, &model.signal)?;
    let noise = model.noise();
    let r_inv = 1.0 / model.sensor.eta;
    let k = (&fs.sigma * h.transpose() + &g * &noise.s) * r_inv;
    let innov = dy - model.observation(&fs.x_hat) * dt;
    let x_hat = &fs.x_hat + model.drift(&fs.x_hat, u) * dt + &k * innov;
    let d_sigma = &f * &fs.sigma + &fs.sigma * f.transpose() - &k * k.transpose() * model.sensor.eta + &g * g.transpose();
    let mut sigma = &fs.sigma + d_sigma * dt;
    symmetrize(&mut sigma);
    if x_hat.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical(0, format!("non-finite EKF update from x̂ = {:?}", fs.x_hat.as_slice())));
    }
    Ok(FilterState { x_hat, sigma })
}

/// Running EKF with its model and step counter.
#[derive(Clone, Debug)]
pub struct Ekf {
    pub model: EkfModel,
    pub state: FilterState,
    steps: usize,
}

impl Ekf {
    /// Starts at the CSS estimate with ω̂ = `mu0` and Var(ω̂) = `sigma0`², all other covariances zero.
    /// VdP auxiliary components start at the model's initial values.
    pub fn new(model: EkfModel, mu0: f64, sigma0: f64) -> Result<Self> {
        model.sensor.validate()?;
        if !(sigma0 >= 0.0) || !mu0.is_finite() {
            return Err(Error::param(format!("prior must be finite with σ₀ ≥ 0, got ({mu0}, {sigma0})")));
        }
        let d = model.dim();
        let mut x = DVector::zeros(d);
        x[0] = model.sensor.n_atoms.sqrt() / 2.0;
        x[3] = 0.25;
        x[4] = 0.25;
        if let SignalModel::Vdp { params, .. } = model.signal {
            x[6] = params.nu0;
            x[8] = params.upsilon0;
        }
        x[model.omega_index()] = mu0;
        let mut sigma = DMatrix::zeros(d, d);
        sigma[(model.omega_index(), model.omega_index())] = sigma0 * sigma0;
        Ok(Self { model, state: FilterState { x_hat: x, sigma }, steps: 0 })
    }

    pub fn step(&mut self, dy: f64, u: f64, dt: f64) -> Result<()> {
        self.state = ekf_step(&self.state, dy, dt, u, &self.model).map_err(|e| e.at_step(self.steps))?;
        self.steps += 1;
        Ok(())
    }

    pub fn omega_hat(&self) -> f64 {
        self.state.x_hat[self.model.omega_index()]
    }

    pub fn sigma_omega(&self) -> f64 {
        let o = self.model.omega_index();
        self.state.sigma[(o, o)]
    }

    /// Estimated ⟨Ĵy⟩ in collective units.
    pub fn mean_jy_hat(&self) -> f64 {
        self.state.x_hat[1] * self.model.sensor.n_atoms.sqrt()
    }

    /// Estimated spin moments in collective units.
    pub fn moment_estimate(&self) -> MomentState {
        let x = &self.state.x_hat;
        let z = [x[0], x[1], x[2], x[3], x[4], x[5]];
        let sig = self.model.signal.state_from(&x.as_slice()[6..]);
        MomentState::from_normalized(&z, self.model.sensor.n_atoms, sig, true)
    }

    /// Estimated squeezing ξ² = N·V̂y/⟨Ĵx⟩².
    pub fn xi2_hat(&self) -> f64 {
        let x = &self.state.x_hat;
        self.model.sensor.n_atoms * x[3] / (x[0] * x[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::kb_correlated_step;
    use crate::stochastic::{wiener_increment, RngStream};

    fn sensor() -> SensorParams {
        SensorParams::new(50.0, 0.05, 0.8, 0.005, 0.01).unwrap()
    }

    fn random_state(rng: &mut RngStream, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| 2.0 * rng.uniform() - 1.0 + 0.1)
    }

    fn central_difference(model: &EkfModel, x: &DVector<f64>, u: f64) -> DMatrix<f64> {
        let d = x.len();
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            out.set_column(j, &((model.drift(&xp, u) - model.drift(&xm, u)) / (2.0 * h)));
        }
        out
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = RngStream::new(11, 0);
        let signals = [SignalModel::Ou(OuParams::new(0.3, 2.0, 0.1).unwrap()), SignalModel::Vdp { params: VdpParams::cardiac(), q_omega: 2.5e5 }];
        for signal in signals {
            let model = EkfModel { sensor: sensor(), signal };
            for _ in 0..50 {
                let mut x = random_state(&mut rng, model.dim());
                if signal.dim() == 3 && x[6].abs() < 0.05 {
                    x[6] = 0.3;
                }
                let (f, _, _) = ekf_jacobians(&x, 0.4, &model.sensor, &signal).unwrap();
                let fd = central_difference(&model, &x, 0.4);
                assert!((&f - &fd).norm() / f.norm() < 1e-6, "{}", (&f - &fd).norm() / f.norm());
            }
        }
    }

    #[test]
    fn tabulated_entries() {
        let p = sensor();
        let ou = OuParams::new(0.2, 9.0, 0.0).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.5, 0.1, 0.2, 0.3, 0.05, 2.0]);
        let (f, g, h) = ekf_jacobians_ou(&x, -0.5, &p, &ou).unwrap();
        assert_eq!(f[(0, 0)], -(p.kappa_coll + 2.0 * p.kappa_loc + p.m) / 2.0);
        assert_eq!(f[(0, 1)], -1.5);
        assert_eq!(f[(0, 6)], -0.5);
        assert_eq!(f[(6, 6)], -0.2);
        assert_eq!(g.column(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0]);
        assert_eq!(h[(0, 1)], 2.0 * p.eta * (p.m * p.n_atoms).sqrt());

        let vdp = VdpParams::cardiac();
        let mut xv = DVector::from_vec(vec![1.0, 0.5, 0.1, 0.2, 0.3, 0.05, 0.4, 2.0, 1.0]);
        let (f, _, _) = ekf_jacobians_vdp(&xv, 0.0, &p, &vdp, 1.0).unwrap();
        assert_eq!(f[(7, 7)], 0.0);
        assert_eq!(f[(6, 7)], -vdp.p);
        assert_eq!(f[(8, 6)], 0.0);
        xv[6] = -0.4;
        let (f, _, _) = ekf_jacobians_vdp(&xv, 0.0, &p, &vdp, 1.0).unwrap();
        assert_eq!(f[(8, 6)], -1.0 / vdp.t);
        xv[6] = 0.0;
        let (f, _, _) = ekf_jacobians_vdp(&xv, 0.0, &p, &vdp, 1.0).unwrap();
        assert_eq!(f[(8, 6)], -1.0 / (2.0 * vdp.t));
    }

    #[test]
    fn decoupled_state_with_zero_rotation() {
        let p = sensor();
        let ou = OuParams::new(0.2, 9.0, 0.0).unwrap();
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (f, _, _) = ekf_jacobians_ou(&x, 0.0, &p, &ou).unwrap();
        for (i, j) in [(0, 1), (1, 0), (0, 6), (1, 6), (2, 5), (3, 5), (5, 6)] {
            assert_eq!(f[(i, j)], 0.0);
        }
    }

    #[test]
    fn zero_drift_zero_innovation_keeps_estimate() {
        let p = SensorParams::new(10.0, 0.1, 1.0, 0.0, 0.0).unwrap();
        let model = EkfModel { sensor: p, signal: SignalModel::Constant };
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let fs = FilterState::new(x.clone(), DMatrix::zeros(7, 7)).unwrap();
        let out = ekf_step(&fs, 0.0, 1e-3, 0.0, &model).unwrap();
        assert_eq!(out.x_hat, x);
    }

    #[test]
    fn step_equals_linearized_kalman_bucy() {
        let model = EkfModel { sensor: sensor(), signal: SignalModel::Ou(OuParams::new(0.1, 0.5, 0.0).unwrap()) };
        let mut a = Ekf::new(model, 0.7, 0.4).unwrap();
        let mut b = a.state.clone();
        let noise = model.noise();
        let mut rng = RngStream::new(3, 1);
        let dt = 1e-3;
        for k in 0..2000 {
            let u = -0.2 * (k as f64 * 1e-3).cos();
            let dy = 0.05 * dt + wiener_increment(&mut rng, dt).unwrap();
            let (f, g, h) = ekf_jacobians(&b.x_hat, u, &model.sensor, &model.signal).unwrap();
            let bu = model.drift(&b.x_hat, u) - &f * &b.x_hat;
            b = kb_correlated_step(&b, &DVector::from_element(1, dy), &f, &g, &h, &noise, &bu, dt).unwrap();
            a.step(dy, u, dt).unwrap();
        }
        assert!((&a.state.x_hat - &b.x_hat).amax() < 1e-8);
        assert!((&a.state.sigma - &b.sigma).amax() < 1e-8);
    }

    #[test]
    fn initial_state_layout() {
        let model = EkfModel { sensor: sensor(), signal: SignalModel::Vdp { params: VdpParams::cardiac(), q_omega: 1.0 } };
        let e = Ekf::new(model, 0.2, 0.1).unwrap();
        assert_eq!(e.state.x_hat.len(), 9);
        assert_eq!(e.omega_hat(), 0.2);
        assert!((e.sigma_omega() - 0.01).abs() < 1e-16);
        assert!((e.xi2_hat() - 1.0).abs() < 1e-14);
        assert!((e.moment_estimate().mean_jx - 25.0).abs() < 1e-12);
    }
}
