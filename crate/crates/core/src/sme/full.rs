//! SME on the full 2^N tensor-product space, including local dephasing.
//!
//! Basis state `a` is a bit string; bit j = 0 means atom j points up (σz = +1).

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;

use super::{SensorParams, StepRecord};
use crate::error::{Error, Result};
use crate::spin::{SpinMoments, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};

pub const MAX_FULL_ATOMS: usize = 12;

/// Density matrix of N distinguishable spin-1/2 atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct FullHilbertState {
    pub n_atoms: usize,
    pub rho: DMatrix<C64>,
}

impl FullHilbertState {
    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }
}

/// Product state with every atom along +x.
pub fn css_x_full(n_atoms: usize) -> Result<FullHilbertState> {
    if n_atoms == 0 || n_atoms > MAX_FULL_ATOMS {
        return Err(Error::param(format!("full Hilbert-space engine supports 1..={MAX_FULL_ATOMS} atoms")));
    }
    let d = 1usize << n_atoms;
    let amp = 1.0 / d as f64;
    Ok(FullHilbertState { n_atoms, rho: DMatrix::from_element(d, d, C64::new(amp, 0.0)) })
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
    Z,
}

/// Engine for [`FullHilbertState`] with cached diagonal data.
#[derive(Clone, Debug)]
pub struct FullHilbertEngine {
    n: usize,
    params: SensorParams,
    mz: Vec<f64>,
    pub positivity_every: usize,
    steps: usize,
}

impl FullHilbertEngine {
    pub fn new(params: SensorParams) -> Result<Self> {
        params.validate()?;
        let n = params.atoms_exact()?;
        if n > MAX_FULL_ATOMS {
            return Err(Error::param(format!("full Hilbert-space engine supports at most {MAX_FULL_ATOMS} atoms")));
        }
        let mz = (0..1usize << n).map(|a| n as f64 / 2.0 - a.count_ones() as f64).collect();
        Ok(Self { n, params, mz, positivity_every: 50, steps: 0 })
    }

    /// out = J_axis · x
    fn apply(&self, axis: Axis, x: &DMatrix<C64>) -> DMatrix<C64> {
        let d = x.nrows();
        let mut out = DMatrix::zeros(d, x.ncols());
        match axis {
            Axis::Z => {
                for c in 0..x.ncols() {
                    for a in 0..d {
                        out[(a, c)] = x[(a, c)] * self.mz[a];
                    }
                }
            }
            Axis::X | Axis::Y => {
                for c in 0..x.ncols() {
                    for a in 0..d {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..self.n {
                            let b = a ^ (1 << j);
                            let coef = match axis {
                                Axis::X => C64::new(0.5, 0.0),
                                // ⟨up|σy|down⟩ = -i, ⟨down|σy|up⟩ = i
                                _ => {
                                    if a & (1 << j) == 0 {
                                        C64::new(0.0, -0.5)
                                    } else {
                                        C64::new(0.0, 0.5)
                                    }
                                }
                            };
                            acc += coef * x[(b, c)];
                        }
                        out[(a, c)] = acc;
                    }
                }
            }
        }
        out
    }

    pub fn moments(&self, state: &FullHilbertState) -> SpinMoments {
        let axes = [Axis::X, Axis::Y, Axis::Z];
        let applied: Vec<DMatrix<C64>> = axes.iter().map(|&ax| self.apply(ax, &state.rho)).collect();
        let mean = Vector3::from_fn(|a, _| applied[a].trace().re);
        let mut cov = Matrix3::zeros();
        for a in 0..3 {
            for b in a..3 {
                let ab = self.apply(axes[a], &applied[b]).trace().re;
                let ba = self.apply(axes[b], &applied[a]).trace().re;
                let v = 0.5 * (ab + ba) - mean[a] * mean[b];
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        SpinMoments { mean, cov }
    }

    pub fn step(&mut self, state: &mut FullHilbertState, omega: f64, u: f64, dt: f64, dw: f64) -> Result<StepRecord> {
        if state.n_atoms != self.n {
            return Err(Error::Dimension("state does not match engine atom number".into()));
        }
        let p = self.params;
        let jy_rho = self.apply(Axis::Y, &state.rho);
        let mean_jy = jy_rho.trace().re;
        let dy = p.photocurrent(mean_jy, dt, dw);

        if p.m > 0.0 {
            let dyr = 2.0 * (p.eta * p.m).sqrt() * mean_jy * dt + dw;
            let a = C64::new((p.eta * p.m).sqrt() * dyr, 0.0);
            let b = C64::new(-0.5 * p.m * dt + 0.5 * p.eta * p.m * (dyr * dyr - dt), 0.0);
            // K x = x + a Jy x + b Jy² x
            let kraus = |x: &DMatrix<C64>, jx: Option<&DMatrix<C64>>| {
                let jx = match jx {
                    Some(v) => v.clone(),
                    None => self.apply(Axis::Y, x),
                };
                let j2x = self.apply(Axis::Y, &jx);
                x + jx * a + j2x * b
            };
            let k_rho = kraus(&state.rho, Some(&jy_rho));
            // K ρ K† = (K (Kρ)†)†
            let mut next = kraus(&k_rho.adjoint(), None).adjoint();
            if p.eta < 1.0 {
                let l = self.apply(Axis::Y, &jy_rho.adjoint()).adjoint();
                next += l * C64::new((1.0 - p.eta) * p.m * dt, 0.0);
            }
            state.rho = next;
        }

        let theta = (omega + u) * dt;
        let tr = state.rho.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::numerical(self.steps, format!("trace collapsed to {tr}")));
        }
        let d = state.rho.nrows();
        for c in 0..d {
            for r in 0..=c {
                let dm = self.mz[r] - self.mz[c];
                let flips = (r ^ c).count_ones() as f64;
                let f = C64::from_polar((-0.5 * p.kappa_coll * dm * dm * dt - p.kappa_loc * flips * dt).exp(), -theta * dm) / tr;
                let upper = state.rho[(r, c)] * f;
                let lower = state.rho[(c, r)] * f.conj();
                let avg = (upper + lower.conj()) * 0.5;
                state.rho[(r, c)] = avg;
                state.rho[(c, r)] = avg.conj();
            }
        }

        self.steps += 1;
        let trace_error = (state.trace() - C64::new(1.0, 0.0)).norm();
        let herm = (&state.rho - state.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if trace_error > TRACE_TOL || herm > HERMITICITY_TOL {
            return Err(Error::numerical(self.steps, format!("trace error {trace_error:e}, hermiticity {herm:e}")));
        }
        if self.positivity_every > 0 && self.steps % self.positivity_every == 0 {
            let e = state.rho.clone().symmetric_eigenvalues().min();
            if e < -POSITIVITY_TOL {
                return Err(Error::numerical(self.steps, format!("negative eigenvalue {e:e}")));
            }
        }
        Ok(StepRecord { dy, dw, moments: self.moments(state) })
    }
}

/// One full Hilbert-space step (allocating wrapper).
pub fn sme_step_full_hilbert(
    state: &FullHilbertState,
    omega: f64,
    u: f64,
    dt: f64,
    dw: f64,
    params: &SensorParams,
) -> Result<(FullHilbertState, StepRecord)> {
    let mut eng = FullHilbertEngine::new(*params)?;
    let mut s = state.clone();
    let rec = eng.step(&mut s, omega, u, dt, dw)?;
    Ok((s, rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sme::SmeEngine;
    use crate::spin::css_x;

    #[test]
    fn rejects_large_n() {
        assert!(css_x_full(13).is_err());
        assert!(FullHilbertEngine::new(SensorParams::new(13.0, 0.1, 1.0, 0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn css_moments() {
        let eng = FullHilbertEngine::new(SensorParams::new(5.0, 0.0, 1.0, 0.0, 0.0).unwrap()).unwrap();
        let m = eng.moments(&css_x_full(5).unwrap());
        assert!((m.mean[0] - 2.5).abs() < 1e-12);
        assert!((m.var_y() - 1.25).abs() < 1e-12 && (m.var_z() - 1.25).abs() < 1e-12 && m.var_x().abs() < 1e-12);
    }

    #[test]
    fn matches_symmetric_engine_without_local_dephasing() {
        for n in [2usize, 4, 6] {
            let p = SensorParams::new(n as f64, 0.4, 0.9, 0.05, 0.0).unwrap();
            let mut full = FullHilbertEngine::new(p).unwrap();
            let mut sym = SmeEngine::new(p).unwrap();
            let mut a = css_x_full(n).unwrap();
            let mut b = css_x(n).unwrap();
            let mut rng = crate::stochastic::RngStream::new(5, n as u64);
            for k in 0..200 {
                let dt = 1e-3;
                let dw = crate::stochastic::wiener_increment(&mut rng, dt).unwrap();
                let u = -0.3 * (k as f64 * 0.01).sin();
                let ra = full.step(&mut a, 1.0, u, dt, dw).unwrap();
                let rb = sym.step(&mut b, 1.0, u, dt, dw).unwrap();
                assert!((ra.moments.mean - rb.moments.mean).norm() < 1e-8);
                assert!((ra.moments.cov - rb.moments.cov).norm() < 1e-8);
                assert!((ra.dy - rb.dy).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn local_dephasing_decay() {
        let kl = 0.3;
        let p = SensorParams::new(4.0, 0.0, 1.0, 0.0, kl).unwrap();
        let mut eng = FullHilbertEngine::new(p).unwrap();
        let mut s = css_x_full(4).unwrap();
        let dt = 0.01;
        let mut last = 0.0;
        for _ in 0..100 {
            let r = eng.step(&mut s, 0.0, 0.0, dt, 0.0).unwrap();
            last = r.moments.mean[0];
            assert!((s.trace().re - 1.0).abs() < 1e-10);
        }
        assert!((last - 2.0 * (-kl * 1.0f64).exp()).abs() < 1e-12);
    }
}
