//! Quick invariant suite behind the `validate` subcommand.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::bounds::{cs_recursion, cs_recursion_iterated, BoundParams};
use crate::control::{are_residual, are_solution, Controller, LqrWeights};
use crate::error::{Error, Result};
use crate::filters::{ekf_jacobians, Ekf, EkfModel};
use crate::sme::{SensorParams, SmeEngine};
use crate::spin::{build_collective_operators, css_x, moments};
use crate::stochastic::{wiener_increment, OuParams, RngStream, SignalModel, VdpParams};

/// Outcome of one check; `value` is the measured residual compared against `limit`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, value, limit, passed: value <= limit }
}

fn commutators(n: usize) -> Result<f64> {
    let ops = build_collective_operators(n)?;
    let i = C64::new(0.0, 1.0);
    let c = |a: &DMatrix<C64>, b: &DMatrix<C64>| a * b - b * a;
    let r1 = (c(&ops.jx, &ops.jy) - ops.jz.map(|z| z * i)).norm();
    let r2 = (c(&ops.jy, &ops.jz) - ops.jx.map(|z| z * i)).norm();
    let r3 = (c(&ops.jz, &ops.jx) - ops.jy.map(|z| z * i)).norm();
    Ok(r1.max(r2).max(r3))
}

fn css_residual(n: usize) -> Result<f64> {
    let ops = build_collective_operators(n)?;
    let m = moments(&css_x(n)?, &ops)?;
    let nf = n as f64;
    let expect = [nf / 2.0, 0.0, 0.0, 0.0, nf / 4.0, nf / 4.0];
    let got = [m.mean[0], m.mean[1], m.mean[2], m.var_x(), m.var_y(), m.var_z()];
    Ok(expect.iter().zip(got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Worst trace, Hermiticity and negative-eigenvalue residuals over a closed-loop SME run.
pub fn sme_invariants(n: usize, steps: usize) -> Result<(f64, f64, f64)> {
    let p = SensorParams::new(n as f64, 0.05, 1.0, 0.005, 0.0)?;
    let mut eng = SmeEngine::new(p)?;
    eng.positivity_every = 10;
    let mut rho = css_x(n)?;
    let mut ekf = Ekf::new(EkfModel { sensor: p, signal: SignalModel::Constant }, 1.5, 0.5)?;
    let mut rng = RngStream::new(1, 0);
    let dt = 1e-2;
    let (mut tr, mut herm, mut neg) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        let u = Controller::Lqr { lambda: None }.control(ekf.omega_hat(), ekf.mean_jy_hat(), p.j(), None);
        let rec = eng.step(&mut rho, 1.0, u, dt, wiener_increment(&mut rng, dt)?)?;
        ekf.step(rec.dy, u, dt)?;
        let rep = rho.report(false);
        tr = tr.max(rep.trace_error);
        herm = herm.max(rep.hermiticity);
    }
    neg = neg.max(-eng.min_eigenvalue_seen().min(0.0)).max(-rho.min_eigenvalue().min(0.0));
    Ok((tr, herm, neg))
}

/// Worst relative Frobenius error of the EKF drift Jacobian against central differences.
pub fn jacobian_residual(signal: SignalModel, states: usize) -> Result<f64> {
    let model = EkfModel { sensor: SensorParams::new(50.0, 0.05, 0.8, 0.005, 0.01)?, signal };
    let mut rng = RngStream::new(5, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..states {
        let mut x = DVector::from_fn(model.dim(), |_, _| 2.0 * rng.uniform() - 1.0);
        if signal.dim() == 3 && x[6].abs() < 0.05 {
            x[6] = 0.5;
        }
        let u = rng.uniform();
        let (f, _, _) = ekf_jacobians(&x, u, &model.sensor, &signal)?;
        let mut fd = DMatrix::zeros(x.len(), x.len());
        for j in 0..x.len() {
            let h = 1e-6 * x[j].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            fd.set_column(j, &((model.drift(&xp, u) - model.drift(&xm, u)) / (2.0 * h)));
        }
        worst = worst.max((&f - &fd).norm() / f.norm());
    }
    Ok(worst)
}

fn recursion_residual() -> Result<f64> {
    let bp = BoundParams { q_omega: 2.0, kappa_coll: 0.1, kappa_loc: 0.5, n_atoms: 20.0, sigma0: 1.0 };
    let mut worst: f64 = 0.0;
    for k in [1, 10, 200] {
        let a = cs_recursion(k, 1e-3, 0.2, &bp)?;
        let b = cs_recursion_iterated(k, 1e-3, 0.2, &bp)?;
        worst = worst.max((a / b - 1.0).abs());
    }
    Ok(worst)
}

fn are_check() -> Result<f64> {
    let w = LqrWeights::new(1.0, 0.5, 2.0)?;
    let l = are_solution(&w, 10.0, 0.1)?;
    Ok(are_residual(&l, &w, 10.0, 0.1).amax() / l.amax())
}

/// Run every check; errors inside a check are reported as failures.
pub fn invariant_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<f64>, limit: f64| {
        out.push(match r {
            Ok(v) => check(name, v, limit),
            Err(_) => Check { name, value: f64::NAN, limit, passed: false },
        });
    };
    push("commutators N=30", commutators(30), 1e-12);
    push("css moments N=50", css_residual(50), 1e-10);
    match sme_invariants(50, 300) {
        Ok((tr, herm, neg)) => {
            push("sme trace", Ok(tr), 1e-10);
            push("sme hermiticity", Ok(herm), 1e-12);
            push("sme positivity", Ok(neg), 1e-10);
        }
        Err(e) => push("sme invariants", Err(e), 0.0),
    }
    push("ekf jacobian ou", jacobian_residual(SignalModel::Ou(OuParams { chi: 0.3, q_omega: 2.0, omega_bar: 0.1 }), 20), 1e-6);
    push("ekf jacobian vdp", jacobian_residual(SignalModel::Vdp { params: VdpParams::cardiac(), q_omega: 2.5e5 }, 20), 1e-6);
    push("cs recursion closed form", recursion_residual(), 1e-12);
    push("lqr riccati residual", are_check(), 1e-10);
    out
}

/// Collapse a suite into a single result, naming the first failure.
pub fn suite_result(checks: &[Check]) -> Result<()> {
    match checks.iter().find(|c| !c.passed) {
        None => Ok(()),
        Some(c) => Err(Error::Numerical { step: 0, msg: format!("check '{}' failed: {} > {}", c.name, c.value, c.limit) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = invariant_suite();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        suite_result(&checks).unwrap();
        let bad = [check("x", 2.0, 1.0)];
        assert_eq!(suite_result(&bad).unwrap_err().exit_code(), 3);
    }
}
