//! Filter consistency on the linear-Gaussian model itself: the truth is simulated
//! from the same (F, G, H) the Kalman-Bucy filter assumes.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LinearKf, Prior};
use crate::cog::lg_model;
use crate::control::Controller;
use crate::error::{Error, Result};
use crate::sme::SensorParams;
use crate::stochastic::{wiener_increment, OuParams, RngStream, SignalModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgScenario {
    pub sensor: SensorParams,
    pub ou: OuParams,
    pub prior: Prior,
    pub controller: Controller,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
    pub runs: usize,
    pub seed: u64,
}

/// Ensemble means per record time.
#[derive(Clone, Debug, PartialEq)]
pub struct LgConsistency {
    pub t: Vec<f64>,
    pub nees: Vec<f64>,
    pub amse: Vec<f64>,
    pub sigma_oo: Vec<f64>,
}

impl LgConsistency {
    /// Time average of the ensemble-mean NEES over t ≥ `t_min`, skipping undefined points.
    pub fn time_averaged_nees(&self, t_min: f64) -> f64 {
        let v: Vec<f64> = self.t.iter().zip(&self.nees).filter(|(t, n)| **t >= t_min && n.is_finite()).map(|(_, n)| *n).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct RunRecord {
    nees: Vec<f64>,
    sq_err: Vec<f64>,
    sigma_oo: Vec<f64>,
}

fn nees2(e: Vector2<f64>, s: Matrix2<f64>) -> f64 {
    match s.cholesky() {
        Some(c) if s.determinant() > 0.0 => e.dot(&c.solve(&e)),
        _ => f64::NAN,
    }
}

fn run_one(sc: &LgScenario, i: usize) -> Result<RunRecord> {
    let p = &sc.sensor;
    let mut rng = RngStream::new(sc.seed, i as u64);
    let mut x = Vector2::new(0.0, sc.prior.mu0 + sc.prior.sigma0 * rng.normal());
    let mut kf = LinearKf::new(*p, SignalModel::Ou(sc.ou), sc.prior)?;
    let n_steps = (sc.t_final / sc.dt).round() as usize;
    let mut rec = RunRecord { nees: Vec::new(), sq_err: Vec::new(), sigma_oo: Vec::new() };
    for k in 0..n_steps {
        let t = k as f64 * sc.dt;
        let m = lg_model(t, p, &sc.ou)?;
        let u = sc.controller.control(kf.state.x_hat[1], kf.state.x_hat[0], p.j(), None);
        let dw = wiener_increment(&mut rng, sc.dt)?;
        let dw_omega = wiener_increment(&mut rng, sc.dt)?;
        let dy = m.h[(0, 0)] * x[0] * sc.dt + p.eta.sqrt() * dw;
        let drift = Vector2::new(m.f[(0, 1)] * (x[1] + u), -sc.ou.chi * (x[1] - sc.ou.omega_bar));
        x += drift * sc.dt + Vector2::new(m.g[(0, 0)] * dw, m.g[(1, 1)] * dw_omega);
        kf.step(t, dy, u, sc.dt)?;
        if (k + 1) % sc.record_every == 0 {
            let xh = &kf.state.x_hat;
            let s = &kf.state.sigma;
            let e = Vector2::new(x[0] - xh[0], x[1] - xh[1]);
            rec.nees.push(nees2(e, Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)])));
            rec.sq_err.push(e[1] * e[1]);
            rec.sigma_oo.push(s[(1, 1)]);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(n_steps, format!("non-finite LG truth in run {i}")));
    }
    Ok(rec)
}

/// Monte-Carlo NEES, aMSE and filter variance of the LG Kalman-Bucy filter against LG truth.
pub fn lg_consistency(sc: &LgScenario, workers: usize) -> Result<LgConsistency> {
    if !(sc.dt > 0.0 && sc.t_final > sc.dt) || sc.record_every == 0 || sc.runs == 0 {
        return Err(Error::Config("need dt > 0, t_final > dt, record_every ≥ 1 and runs ≥ 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| (0..sc.runs).into_par_iter().map(|i| run_one(sc, i)).collect::<Result<_>>())?;
    let len = runs[0].nees.len();
    let mean = |f: &dyn Fn(&RunRecord) -> &Vec<f64>, skip_nan: bool| -> Vec<f64> {
        (0..len)
            .map(|j| {
                let vals = runs.iter().map(|r| f(r)[j]).filter(|v| !skip_nan || v.is_finite());
                let (s, c) = vals.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                if c == 0 {
                    f64::NAN
                } else {
                    s / c as f64
                }
            })
            .collect()
    };
    Ok(LgConsistency {
        t: (1..=len).map(|j| (j * sc.record_every) as f64 * sc.dt).collect(),
        nees: mean(&|r| &r.nees, true),
        amse: mean(&|r| &r.sq_err, false),
        sigma_oo: mean(&|r| &r.sigma_oo, false),
    })
}
