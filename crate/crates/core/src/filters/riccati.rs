//! Deterministic integration of the correlated Riccati equation for LG models.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use super::{symmetrize, CLIP_TOL};
use crate::cog::LgModel;
use crate::error::{Error, Result};
use crate::ode::{radau5, OdeStats, Tolerance};

/// dΣ/dt = FΣ + ΣFᵀ − KRKᵀ + GQGᵀ with K = (ΣHᵀ + GS)R⁻¹.
///
/// Evaluated as F̃Σ + ΣF̃ᵀ − ΣHᵀR⁻¹HΣ + GQ̃Gᵀ with F̃ = F − GSR⁻¹H and Q̃ = Q − SR⁻¹Sᵀ, which
/// avoids the cancellation between KRKᵀ and GQGᵀ when the noises are fully correlated.
pub fn riccati_rhs(sigma: &DMatrix<f64>, m: &LgModel) -> Result<DMatrix<f64>> {
    let r_inv = m.r.clone().try_inverse().ok_or_else(|| Error::numerical(0, "singular measurement covariance"))?;
    let f_t = &m.f - &m.g * &m.s * &r_inv * &m.h;
    let q_t = &m.q - &m.s * &r_inv * m.s.transpose();
    let sh = sigma * m.h.transpose();
    Ok(&f_t * sigma + sigma * f_t.transpose() - &sh * &r_inv * sh.transpose() + &m.g * q_t * m.g.transpose())
}

/// Closed-loop matrix F − KH whose Kronecker sum is the Riccati Jacobian.
fn closed_loop(sigma: &DMatrix<f64>, m: &LgModel) -> Result<DMatrix<f64>> {
    let r_inv = m.r.clone().try_inverse().ok_or_else(|| Error::numerical(0, "singular measurement covariance"))?;
    let k = (sigma * m.h.transpose() + &m.g * &m.s) * r_inv;
    Ok(&m.f - k * &m.h)
}

/// Σ(t) sampled at the requested times.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub sigma: Vec<DMatrix<f64>>,
    pub stats: OdeStats,
    /// Largest negative eigenvalue clipped to zero at an output time.
    pub max_clip: f64,
}

impl RiccatiSolution {
    pub fn entry(&self, i: usize, j: usize) -> Vec<f64> {
        self.sigma.iter().map(|s| s[(i, j)]).collect()
    }
}

fn clip(s: &mut DMatrix<f64>, t: f64) -> Result<f64> {
    symmetrize(s);
    let eig = s.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(0.0);
    }
    let scale = s.amax().max(1.0);
    if min < -CLIP_TOL * scale {
        return Err(Error::numerical(0, format!("covariance eigenvalue {min:e} at t = {t}")));
    }
    let vals = eig.eigenvalues.map(|e| e.max(0.0));
    *s = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(s);
    Ok(-min)
}

/// Integrate the Riccati equation of the model family `model(t)` from Σ(t0) = `sigma0`.
pub fn integrate_riccati<M>(model: M, t0: f64, sigma0: &DMatrix<f64>, times: &[f64], tol: Tolerance) -> Result<RiccatiSolution>
where
    M: Fn(f64) -> Result<LgModel>,
{
    let n = sigma0.nrows();
    if !sigma0.is_square() {
        return Err(Error::Dimension("initial covariance must be square".into()));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let unpack = |y: &DVector<f64>| {
        let mut s = DMatrix::from_column_slice(n, n, y.as_slice());
        symmetrize(&mut s);
        s
    };
    let fail = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
    };
    let rhs = |t: f64, y: &DVector<f64>| -> DVector<f64> {
        match model(t).and_then(|m| riccati_rhs(&unpack(y), &m)) {
            Ok(d) => DVector::from_column_slice(d.as_slice()),
            Err(e) => {
                fail(e);
                DVector::from_element(n * n, f64::NAN)
            }
        }
    };
    let jac = |t: f64, y: &DVector<f64>| -> DMatrix<f64> {
        match model(t).and_then(|m| closed_loop(&unpack(y), &m)) {
            Ok(a) => {
                let id = DMatrix::<f64>::identity(n, n);
                id.kronecker(&a) + a.kronecker(&id)
            }
            Err(e) => {
                fail(e);
                DMatrix::from_element(n * n, n * n, f64::NAN)
            }
        }
    };
    let y0 = DVector::from_column_slice(sigma0.as_slice());
    let result = radau5(rhs, jac, t0, &y0, times, tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (ys, stats) = result?;
    let mut max_clip: f64 = 0.0;
    let mut sigma = Vec::with_capacity(ys.len());
    for (y, &t) in ys.iter().zip(times) {
        let mut s = DMatrix::from_column_slice(n, n, y.as_slice());
        max_clip = max_clip.max(clip(&mut s, t)?);
        sigma.push(s);
    }
    Ok(RiccatiSolution { times: times.to_vec(), sigma, stats, max_clip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cog::lg_model_steady;
    use crate::sme::SensorParams;
    use crate::stochastic::OuParams;

    #[test]
    fn scalar_random_walk_observed_directly() {
        // dx = √q dw, dy = x dt + dv: Σ' = q − Σ², Σ(t) = √q tanh(√q t) from Σ(0) = 0.
        let q: f64 = 4.0;
        let m = LgModel {
            f: DMatrix::zeros(1, 1),
            g: DMatrix::from_element(1, 1, q.sqrt()),
            h: DMatrix::from_element(1, 1, 1.0),
            q: DMatrix::identity(1, 1),
            r: DMatrix::identity(1, 1),
            s: DMatrix::zeros(1, 1),
        };
        let times = [0.1, 0.5, 2.0];
        let sol = integrate_riccati(|_| Ok(m.clone()), 0.0, &DMatrix::zeros(1, 1), &times, Tolerance::default()).unwrap();
        for (t, s) in times.iter().zip(&sol.sigma) {
            let exact = q.sqrt() * (q.sqrt() * t).tanh();
            assert!((s[(0, 0)] / exact - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn steady_model_is_a_fixed_point_of_long_integration() {
        let p = SensorParams::new(1e5, 1e5, 1.0, 0.1, 0.0).unwrap();
        let ou = OuParams::new(0.0, 1e14, 0.0).unwrap();
        let m = lg_model_steady(&p, &ou).unwrap();
        let sol = integrate_riccati(|_| Ok(m.clone()), 0.0, &DMatrix::zeros(2, 2), &[1.0], Tolerance { rtol: 1e-10, atol: 1e-12 }).unwrap();
        let rhs = riccati_rhs(&sol.sigma[0], &m).unwrap();
        let scale = (&m.g * m.g.transpose()).amax();
        assert!(rhs.amax() / scale < 1e-6);
    }

    #[test]
    fn model_errors_propagate() {
        let r = integrate_riccati(|_| Err(Error::param("bad")), 0.0, &DMatrix::zeros(1, 1), &[1.0], Tolerance::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
