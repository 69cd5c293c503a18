//! Closed-loop scenario runner: true signal, atoms, estimator and controller,
//! ensembles over independent trajectories, and file output.
//!
//! Step k uses the control computed from the estimate after absorbing dy of step k−1.

pub mod consistency;
mod output;
pub mod units;
pub mod validate;

pub use output::{emit_outputs, read_summary_csv, trajectory_csv, write_bound_csv, write_summary_csv, OutputPaths, RunManifest, SUMMARY_HEADER};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{cs_limit, BoundParams};
use crate::cog::{lg_model, CogEngine};
use crate::control::Controller;
use crate::error::{Error, Result};
use crate::filters::{kb_correlated_step, Ekf, EkfModel, FilterState, NoiseSpec};
use crate::sme::{css_x_full, FullHilbertEngine, FullHilbertState, SensorParams, SmeEngine, StepRecord};
use crate::spin::{css_x, DickeState, SpinMoments};
use crate::stochastic::{wiener_increment, OuParams, RngStream, SignalModel, SignalState};
use units::ProbeParams;

/// Largest atom number accepted by the full Hilbert-space engine.
pub use crate::sme::full::MAX_FULL_ATOMS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Sme,
    SmeFullHilbert,
    Cog,
}

/// Gaussian prior on the initial ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mu0: f64,
    pub sigma0: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    #[default]
    None,
    Kf,
    Ekf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Signal model assumed by the filter; the true model when absent.
    #[serde(default)]
    pub signal: Option<SignalModel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Step size [s]; half the guard value when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Keep every n-th step (the initial point is always kept).
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

/// Full description of a closed-loop experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub engine: EngineKind,
    pub sensor: SensorParams,
    pub signal: SignalModel,
    /// Initial ω for constant and OU signals; drawn from the prior per trajectory when absent.
    #[serde(default)]
    pub omega0: Option<f64>,
    pub prior: Prior,
    #[serde(default)]
    pub controller: Controller,
    #[serde(default)]
    pub u_max: Option<f64>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub grid: Grid,
    pub ensemble: usize,
    #[serde(default)]
    pub seed: u64,
    /// Probe description that sets `sensor.m` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeParams>,
}

/// Step-size guard 1/(10(M+κc)·max(1, NM/(M+κc))); infinite without measurement or dephasing.
pub fn dt_guard(p: &SensorParams) -> f64 {
    let r = p.m + p.kappa_coll;
    if r == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (10.0 * r * (p.n_atoms * p.m / r).max(1.0))
}

impl ScenarioConfig {
    /// Parse JSON, filling `sensor.m` from `probe` when the probe is present.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(probe) = v.get("probe").filter(|p| !p.is_null()).cloned() {
            let probe: ProbeParams = serde_json::from_value(probe).map_err(|e| Error::Config(format!("probe: {e}")))?;
            let m = probe.measurement_strength().map_err(|e| Error::Config(e.to_string()))?;
            match v.get_mut("sensor").and_then(|s| s.as_object_mut()) {
                Some(s) => {
                    s.insert("m".into(), serde_json::json!(m));
                }
                None => return Err(Error::Config("missing sensor section".into())),
            }
        }
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn filter_signal(&self) -> SignalModel {
        self.estimator.signal.unwrap_or(self.signal)
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt.unwrap_or(0.5 * dt_guard(&self.sensor))
    }

    pub fn n_steps(&self) -> usize {
        (self.grid.t_final / self.dt() - 1e-9).ceil().max(0.0) as usize
    }

    /// Times of the recorded samples.
    pub fn record_times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps()).filter(|k| k % self.grid.record_every == 0).map(|k| k as f64 * dt).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        };
        self.sensor.validate().map_err(cfg)?;
        for s in [Some(self.signal), self.estimator.signal].into_iter().flatten() {
            match s {
                SignalModel::Ou(p) => p.validate().map_err(cfg)?,
                SignalModel::Vdp { params, q_omega } => {
                    params.validate().map_err(cfg)?;
                    if !(q_omega >= 0.0) {
                        return Err(Error::Config(format!("q_omega must be non-negative, got {q_omega}")));
                    }
                }
                SignalModel::Constant => {}
            }
        }
        if std::mem::discriminant(&self.signal) != std::mem::discriminant(&self.filter_signal()) {
            return Err(Error::Config("the filter signal model must be of the same kind as the true one".into()));
        }
        self.controller.validate().map_err(cfg)?;
        match self.engine {
            EngineKind::Sme => {
                if self.sensor.kappa_loc != 0.0 {
                    return Err(Error::Config("engine sme requires kappa_loc = 0".into()));
                }
                self.sensor.atoms_exact().map_err(cfg)?;
            }
            EngineKind::SmeFullHilbert => {
                let n = self.sensor.atoms_exact().map_err(cfg)?;
                if n > MAX_FULL_ATOMS {
                    return Err(Error::Config(format!("engine sme-full-hilbert requires N ≤ {MAX_FULL_ATOMS}, got {n}")));
                }
            }
            EngineKind::Cog => {}
        }
        if !self.prior.mu0.is_finite() || !(self.prior.sigma0 >= 0.0) || !self.prior.sigma0.is_finite() {
            return Err(Error::Config(format!("invalid prior {:?}", self.prior)));
        }
        if let Some(m) = self.u_max {
            if !(m > 0.0) {
                return Err(Error::Config(format!("u_max must be positive, got {m}")));
            }
        }
        if self.estimator.kind == EstimatorKind::Kf && matches!(self.signal, SignalModel::Vdp { .. }) {
            return Err(Error::Config("the linear KF supports constant and OU signals only".into()));
        }
        let guard = dt_guard(&self.sensor);
        let dt = self.dt();
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive and finite, got {dt} (guard {guard})")));
        }
        if dt >= guard {
            return Err(Error::Config(format!("dt = {dt} violates the step-size guard dt < {guard}")));
        }
        if !(self.grid.t_final > 0.0) || !self.grid.t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.grid.t_final)));
        }
        if self.grid.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.ensemble < 1 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        Ok(())
    }

    /// Parameters of the dephasing bound for this scenario (no bound for VdP signals).
    pub fn bound_params(&self) -> Option<BoundParams> {
        let q_omega = match self.signal {
            SignalModel::Constant => 0.0,
            SignalModel::Ou(p) => p.q_omega,
            SignalModel::Vdp { .. } => return None,
        };
        Some(BoundParams {
            q_omega,
            kappa_coll: self.sensor.kappa_coll,
            kappa_loc: self.sensor.kappa_loc,
            n_atoms: self.sensor.n_atoms,
            sigma0: self.prior.sigma0,
        })
    }

    /// CS-limit variance on the record grid.
    pub fn bound_curve(&self) -> Result<Option<Vec<f64>>> {
        match self.bound_params() {
            None => Ok(None),
            Some(bp) => self.record_times().iter().map(|&t| cs_limit(t, &bp).map(|b| b.variance)).collect::<Result<Vec<_>>>().map(Some),
        }
    }
}

/// One recorded sample of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub omega_true: f64,
    pub omega_hat: f64,
    pub sigma_oo: f64,
    pub jx: f64,
    pub jy: f64,
    pub vy: f64,
    /// Estimated ξ² (EKF only; NaN otherwise).
    pub xi2_hat: f64,
    /// Control applied during the step that ended here.
    pub u: f64,
    /// Normalized squared error of (⟨Jy⟩, ω); NaN when the covariance is singular.
    pub nees: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub index: usize,
    pub samples: Vec<Sample>,
}

enum Atoms {
    Sme(SmeEngine, DickeState),
    Full(FullHilbertEngine, FullHilbertState),
    Cog(CogEngine),
}

impl Atoms {
    fn new(kind: EngineKind, p: SensorParams) -> Result<Self> {
        Ok(match kind {
            EngineKind::Sme => Atoms::Sme(SmeEngine::new(p)?, css_x(p.atoms_exact()?)?),
            EngineKind::SmeFullHilbert => Atoms::Full(FullHilbertEngine::new(p)?, css_x_full(p.atoms_exact()?)?),
            EngineKind::Cog => Atoms::Cog(CogEngine::new(p)?),
        })
    }

    fn moments(&self) -> SpinMoments {
        match self {
            Atoms::Sme(e, s) => e.moments(s),
            Atoms::Full(e, s) => e.moments(s),
            Atoms::Cog(e) => e.moments(),
        }
    }

    fn step(&mut self, omega: f64, u: f64, dt: f64, dw: f64) -> Result<StepRecord> {
        match self {
            Atoms::Sme(e, s) => e.step(s, omega, u, dt, dw),
            Atoms::Full(e, s) => e.step(s, omega, u, dt, dw),
            Atoms::Cog(e) => e.step(omega, u, dt, dw),
        }
    }
}

/// Linear Kalman-Bucy filter on x = (⟨Jy⟩, ω) with the time-dependent LG model.
struct LinearKf {
    sensor: SensorParams,
    ou: OuParams,
    noise: NoiseSpec,
    state: FilterState,
}

impl LinearKf {
    fn new(sensor: SensorParams, signal: SignalModel, prior: Prior) -> Result<Self> {
        let ou = match signal {
            SignalModel::Constant => OuParams::new(0.0, 0.0, 0.0)?,
            SignalModel::Ou(p) => p,
            SignalModel::Vdp { .. } => return Err(Error::Config("the linear KF supports constant and OU signals only".into())),
        };
        let m = lg_model(0.0, &sensor, &ou)?;
        let noise = NoiseSpec::new(m.q, m.r, m.s)?;
        let sigma = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, prior.sigma0 * prior.sigma0]);
        let state = FilterState::new(DVector::from_vec(vec![0.0, prior.mu0]), sigma)?;
        Ok(Self { sensor, ou, noise, state })
    }

    fn step(&mut self, t: f64, dy: f64, u: f64, dt: f64) -> Result<()> {
        let m = lg_model(t, &self.sensor, &self.ou)?;
        let bu = DVector::from_vec(vec![m.f[(0, 1)] * u, self.ou.chi * self.ou.omega_bar]);
        self.state = kb_correlated_step(&self.state, &DVector::from_element(1, dy), &m.f, &m.g, &m.h, &self.noise, &bu, dt)?;
        Ok(())
    }
}

enum Estimator {
    None(Prior),
    Kf(Box<LinearKf>),
    Ekf(Box<Ekf>),
}

impl Estimator {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let signal = cfg.filter_signal();
        Ok(match cfg.estimator.kind {
            EstimatorKind::None => Estimator::None(cfg.prior),
            EstimatorKind::Kf => Estimator::Kf(Box::new(LinearKf::new(cfg.sensor, signal, cfg.prior)?)),
            EstimatorKind::Ekf => {
                Estimator::Ekf(Box::new(Ekf::new(EkfModel { sensor: cfg.sensor, signal }, cfg.prior.mu0, cfg.prior.sigma0)?))
            }
        })
    }

    fn omega_hat(&self) -> f64 {
        match self {
            Estimator::None(p) => p.mu0,
            Estimator::Kf(k) => k.state.x_hat[1],
            Estimator::Ekf(e) => e.omega_hat(),
        }
    }

    fn sigma_oo(&self) -> f64 {
        match self {
            Estimator::None(p) => p.sigma0 * p.sigma0,
            Estimator::Kf(k) => k.state.sigma[(1, 1)],
            Estimator::Ekf(e) => e.sigma_omega(),
        }
    }

    /// Estimated ⟨Jy⟩ in collective units.
    fn jy_hat(&self) -> f64 {
        match self {
            Estimator::None(_) => 0.0,
            Estimator::Kf(k) => k.state.x_hat[0],
            Estimator::Ekf(e) => e.mean_jy_hat(),
        }
    }

    fn xi2_hat(&self) -> f64 {
        match self {
            Estimator::Ekf(e) => e.xi2_hat(),
            _ => f64::NAN,
        }
    }

    fn step(&mut self, t: f64, dy: f64, u: f64, dt: f64) -> Result<()> {
        match self {
            Estimator::None(_) => Ok(()),
            Estimator::Kf(k) => k.step(t, dy, u, dt),
            Estimator::Ekf(e) => e.step(dy, u, dt),
        }
    }

    /// NEES of (⟨Jy⟩, ω) against the engine's conditional ⟨Jy⟩ and the true ω.
    fn nees(&self, jy: f64, omega: f64, n_atoms: f64) -> f64 {
        let (e, s) = match self {
            Estimator::None(_) => return f64::NAN,
            Estimator::Kf(k) => {
                let x = &k.state.x_hat;
                let s = &k.state.sigma;
                (Vector2::new(jy - x[0], omega - x[1]), Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]))
            }
            Estimator::Ekf(f) => {
                let o = f.model.omega_index();
                let x = &f.state.x_hat;
                let s = &f.state.sigma;
                let y = jy / n_atoms.sqrt();
                (Vector2::new(y - x[1], omega - x[o]), Matrix2::new(s[(1, 1)], s[(1, o)], s[(o, 1)], s[(o, o)]))
            }
        };
        match s.cholesky() {
            Some(c) if s.determinant() > 0.0 => e.dot(&c.solve(&e)),
            _ => f64::NAN,
        }
    }
}

fn initial_signal(cfg: &ScenarioConfig, rng: &mut RngStream) -> SignalState {
    let draw = |rng: &mut RngStream| cfg.prior.mu0 + cfg.prior.sigma0 * rng.normal();
    match cfg.signal {
        SignalModel::Constant => SignalState::Constant { omega: cfg.omega0.unwrap_or_else(|| draw(rng)) },
        SignalModel::Ou(_) => SignalState::Ou { omega: cfg.omega0.unwrap_or_else(|| draw(rng)) },
        SignalModel::Vdp { params, .. } => {
            let mut s = params.initial_state();
            if let (Some(w), SignalState::Vdp { omega, .. }) = (cfg.omega0, &mut s) {
                *omega = w;
            }
            s
        }
    }
}

/// Simulate one closed-loop trajectory on its own random stream.
pub fn run_trajectory(cfg: &ScenarioConfig, stream: RngStream) -> Result<Trajectory> {
    let mut rng = stream;
    let index = rng.stream_id() as usize;
    let dt = cfg.dt();
    let n_steps = cfg.n_steps();
    let p = cfg.sensor;
    let mut atoms = Atoms::new(cfg.engine, p)?;
    let mut est = Estimator::new(cfg)?;
    let mut signal = initial_signal(cfg, &mut rng);

    let m0 = atoms.moments();
    let mut samples = Vec::with_capacity(n_steps / cfg.grid.record_every + 1);
    let sample = |t: f64, mom: &SpinMoments, est: &Estimator, omega: f64, u: f64| Sample {
        t,
        omega_true: omega,
        omega_hat: est.omega_hat(),
        sigma_oo: est.sigma_oo(),
        jx: mom.mean[0],
        jy: mom.mean[1],
        vy: mom.var_y(),
        xi2_hat: est.xi2_hat(),
        u,
        nees: est.nees(mom.mean[1], omega, p.n_atoms),
    };
    samples.push(sample(0.0, &m0, &est, signal.omega(), 0.0));

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let u = cfg.controller.control(est.omega_hat(), est.jy_hat(), p.j(), cfg.u_max);
        let dw = wiener_increment(&mut rng, dt)?;
        let dw_omega = wiener_increment(&mut rng, dt)?;
        let rec = atoms.step(cfg.signal.sensed_omega(&signal, dw_omega), u, dt, dw).map_err(|e| e.at_step(k))?;
        signal = cfg.signal.step(&signal, dt, dw_omega).map_err(|e| e.at_step(k))?;
        est.step(t, rec.dy, u, dt).map_err(|e| e.at_step(k))?;
        if (k + 1) % cfg.grid.record_every == 0 {
            samples.push(sample((k + 1) as f64 * dt, &rec.moments, &est, signal.omega(), u));
        }
    }
    Ok(Trajectory { index, samples })
}

/// Ensemble averages on the record grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub t: Vec<f64>,
    pub omega_true: Vec<f64>,
    pub omega_hat: Vec<f64>,
    /// E[(ω − ω̂)²].
    pub amse: Vec<f64>,
    pub sigma_oo: Vec<f64>,
    /// E[N V_y^c / ⟨Jx⟩_c²].
    pub xi2_cond: Vec<f64>,
    /// N (E[V_y^c] + Var⟨Jy⟩_c) / E[⟨Jx⟩_c]², the squeezing of the averaged state.
    pub xi2_uncond: Vec<f64>,
    pub xi2_hat: Vec<f64>,
    pub jx_mean: Vec<f64>,
    /// Mean NEES over trajectories with a non-singular covariance.
    pub nees: Vec<f64>,
    /// CS-limit variance, when defined for the signal model.
    pub bound: Option<Vec<f64>>,
}

impl EnsembleSummary {
    pub fn from_trajectories(trajs: &[Trajectory], n_atoms: f64) -> Result<Self> {
        let first = trajs.first().ok_or_else(|| Error::param("empty ensemble"))?;
        let len = first.samples.len();
        if trajs.iter().any(|t| t.samples.len() != len) {
            return Err(Error::Dimension("trajectories are not on a common grid".into()));
        }
        let nu = trajs.len() as f64;
        let mut s = EnsembleSummary::default();
        for i in 0..len {
            let mean = |f: &dyn Fn(&Sample) -> f64| trajs.iter().map(|t| f(&t.samples[i])).sum::<f64>() / nu;
            s.t.push(first.samples[i].t);
            s.omega_true.push(mean(&|x| x.omega_true));
            s.omega_hat.push(mean(&|x| x.omega_hat));
            s.amse.push(mean(&|x| (x.omega_true - x.omega_hat).powi(2)));
            s.sigma_oo.push(mean(&|x| x.sigma_oo));
            s.xi2_cond.push(mean(&|x| n_atoms * x.vy / (x.jx * x.jx)));
            s.xi2_hat.push(mean(&|x| x.xi2_hat));
            let jx = mean(&|x| x.jx);
            let jy = mean(&|x| x.jy);
            let var_jy = mean(&|x| (x.jy - jy).powi(2));
            s.xi2_uncond.push(n_atoms * (mean(&|x| x.vy) + var_jy) / (jx * jx));
            s.jx_mean.push(jx);
            let (sum, cnt) = trajs.iter().map(|t| t.samples[i].nees).filter(|v| v.is_finite()).fold((0.0, 0usize), |(a, c), v| (a + v, c + 1));
            s.nees.push(if cnt > 0 { sum / cnt as f64 } else { f64::NAN });
        }
        Ok(s)
    }

    /// Indices of samples with t in [t0, t1].
    pub fn window(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let a = self.t.partition_point(|&t| t < t0);
        let b = self.t.partition_point(|&t| t <= t1);
        a..b.max(a)
    }
}

/// Ensemble output: the summary plus the trajectories it was reduced from.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub summary: EnsembleSummary,
    pub trajectories: Vec<Trajectory>,
    pub dt: f64,
}

/// Run `cfg.ensemble` trajectories, stream i seeded by (seed, i); `workers` = 0 uses all cores.
pub fn run_ensemble(cfg: &ScenarioConfig, workers: usize) -> Result<EnsembleResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Trajectory>> = pool.install(|| {
        (0..cfg.ensemble)
            .into_par_iter()
            .map(|i| {
                run_trajectory(cfg, RngStream::new(cfg.seed, i as u64)).map_err(|e| match e {
                    Error::Numerical { step, msg } => {
                        Error::Numerical { step, msg: format!("trajectory {i} (seed {}, stream {i}): {msg}", cfg.seed) }
                    }
                    other => other,
                })
            })
            .collect()
    });
    let trajectories = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut summary = EnsembleSummary::from_trajectories(&trajectories, cfg.sensor.n_atoms)?;
    summary.bound = cfg.bound_curve()?;
    Ok(EnsembleResult { summary, trajectories, dt: cfg.dt() })
}

/// Fraction of samples with t ≥ `t_min` whose error lies within ±k√aMSE(t).
pub fn coverage(result: &EnsembleResult, t_min: f64, k: f64) -> f64 {
    let s = &result.summary;
    let range = s.window(t_min, f64::INFINITY);
    let (mut inside, mut total) = (0usize, 0usize);
    for tr in &result.trajectories {
        for i in range.clone() {
            let x = &tr.samples[i];
            total += 1;
            if (x.omega_true - x.omega_hat).abs() <= k * s.amse[i].sqrt() {
                inside += 1;
            }
        }
    }
    if total == 0 {
        f64::NAN
    } else {
        inside as f64 / total as f64
    }
}

/// Two-sided 95% acceptance interval for the ensemble-mean NEES of a `dim`-state over `runs` trajectories.
pub fn nees_interval(dim: usize, runs: usize) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let dof = (dim * runs) as f64;
    let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
    (chi.inverse_cdf(0.025) / runs as f64, chi.inverse_cdf(0.975) / runs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Controller;

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            engine: EngineKind::Cog,
            sensor: SensorParams::new(100.0, 1.0, 1.0, 0.1, 0.0).unwrap(),
            signal: SignalModel::Constant,
            omega0: Some(0.1),
            prior: Prior { mu0: 0.0, sigma0: 0.2 },
            controller: Controller::Compensation,
            u_max: None,
            estimator: EstimatorConfig { kind: EstimatorKind::Ekf, signal: None },
            grid: Grid { dt: None, t_final: 0.2, record_every: 5 },
            ensemble: 4,
            seed: 7,
            probe: None,
        }
    }

    #[test]
    fn guard_and_grid() {
        let c = base();
        let g = dt_guard(&c.sensor);
        assert!((g - 1.0 / (10.0 * 1.1 * (100.0 / 1.1))).abs() < 1e-15);
        assert_eq!(c.dt(), 0.5 * g);
        assert_eq!(c.record_times().len(), c.n_steps() / 5 + 1);
        let mut bad = c.clone();
        bad.grid.dt = Some(g);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn engine_restrictions() {
        let mut c = base();
        c.engine = EngineKind::Sme;
        c.sensor.kappa_loc = 0.1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = base();
        c.engine = EngineKind::SmeFullHilbert;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.sensor.n_atoms = 6.0;
        c.validate().unwrap();
        let mut c = base();
        c.estimator = EstimatorConfig { kind: EstimatorKind::Kf, signal: Some(SignalModel::Ou(OuParams::new(1.0, 1.0, 0.0).unwrap())) };
        assert!(c.validate().is_err());
    }

    #[test]
    fn open_loop_constant_field_keeps_prior() {
        let mut c = base();
        c.controller = Controller::None;
        c.estimator.kind = EstimatorKind::None;
        let tr = run_trajectory(&c, RngStream::new(1, 0)).unwrap();
        assert!(tr.samples.iter().all(|s| s.omega_hat == 0.0 && s.omega_true == 0.1 && s.u == 0.0));
        assert!(tr.samples.iter().all(|s| (s.sigma_oo - 0.04).abs() < 1e-16));
    }

    #[test]
    fn identical_streams_give_single_run_error() {
        let c = base();
        let a = run_trajectory(&c, RngStream::new(3, 0)).unwrap();
        let s = EnsembleSummary::from_trajectories(&[a.clone(), a.clone()], c.sensor.n_atoms).unwrap();
        for (x, m) in a.samples.iter().zip(&s.amse) {
            assert_eq!(*m, (x.omega_true - x.omega_hat).powi(2));
        }
    }

    #[test]
    fn ensemble_is_independent_of_workers() {
        let c = base();
        let a = run_ensemble(&c, 1).unwrap();
        let b = run_ensemble(&c, 3).unwrap();
        let bits = |r: &EnsembleResult| -> Vec<u64> {
            let s = &r.summary;
            let mut v: Vec<u64> = [&s.amse, &s.omega_hat, &s.xi2_uncond, &s.nees, &s.sigma_oo].iter().flat_map(|c| c.iter().map(|x| x.to_bits())).collect();
            for tr in &r.trajectories {
                v.extend(tr.samples.iter().flat_map(|x| [x.omega_hat, x.jy, x.vy, x.nees].map(f64::to_bits)));
            }
            v
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn unconditional_squeezing_uses_total_variance() {
        let mk = |jy: f64, vy: f64| Trajectory {
            index: 0,
            samples: vec![Sample { t: 0.0, omega_true: 0.0, omega_hat: 0.0, sigma_oo: 0.0, jx: 5.0, jy, vy, xi2_hat: f64::NAN, u: 0.0, nees: f64::NAN }],
        };
        let s = EnsembleSummary::from_trajectories(&[mk(1.0, 2.0), mk(-1.0, 4.0)], 10.0).unwrap();
        assert!((s.xi2_uncond[0] - 10.0 * (3.0 + 1.0) / 25.0).abs() < 1e-15);
        assert!((s.xi2_cond[0] - 10.0 * 3.0 / 25.0).abs() < 1e-15);
        assert!(s.nees[0].is_nan());
    }

    #[test]
    fn probe_sets_measurement_strength() {
        let mut v = serde_json::to_value(base()).unwrap();
        v["sensor"]["m"] = serde_json::json!(123.0);
        v["probe"] = serde_json::json!({"power_w": 1e-3, "detuning_hz": 3e10});
        v["grid"]["dt"] = serde_json::json!(1e-3);
        let c = ScenarioConfig::from_json(&v.to_string()).unwrap();
        let m = ProbeParams::new(1e-3, 3e10).measurement_strength().unwrap();
        assert_eq!(c.sensor.m, m);
        assert!(matches!(ScenarioConfig::from_json("{"), Err(Error::Config(_))));
    }

    #[test]
    fn nees_interval_brackets_dimension() {
        let (lo, hi) = nees_interval(2, 500);
        assert!(lo < 2.0 && hi > 2.0 && (hi - lo) < 0.6);
    }
}
