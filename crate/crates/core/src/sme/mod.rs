//! Exact conditional-state evolution under the homodyne stochastic master equation
//!
//! dρ = -i(ω+u)[Jz,ρ]dt + κc D[Jz]ρ dt + (κloc/2) Σ_j D[σz^(j)]ρ dt + M D[Jy]ρ dt + √(ηM) H[Jy]ρ dW
//!
//! with photocurrent dy = 2η√M ⟨Jy⟩ dt + √η dW.

pub mod full;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::spin::{moments_banded, BandedOps, DickeState, SpinMoments, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};

pub use full::{css_x_full, sme_step_full_hilbert, FullHilbertEngine, FullHilbertState};

/// Physical parameters of the probed ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    /// Atom number N (real-valued so the moment model can use N ~ 1e13).
    pub n_atoms: f64,
    /// Measurement strength M [Hz].
    pub m: f64,
    /// Detection efficiency η.
    #[serde(default = "one")]
    pub eta: f64,
    /// Collective dephasing κc [Hz].
    #[serde(default)]
    pub kappa_coll: f64,
    /// Local dephasing κloc [Hz].
    #[serde(default)]
    pub kappa_loc: f64,
}

fn one() -> f64 {
    1.0
}

impl SensorParams {
    pub fn new(n_atoms: f64, m: f64, eta: f64, kappa_coll: f64, kappa_loc: f64) -> Result<Self> {
        let p = Self { n_atoms, m, eta, kappa_coll, kappa_loc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_atoms >= 1.0
            && self.n_atoms.is_finite()
            && self.m >= 0.0
            && (0.0..=1.0).contains(&self.eta)
            && self.kappa_coll >= 0.0
            && self.kappa_loc >= 0.0;
        if !ok {
            return Err(Error::param(format!("invalid sensor parameters {self:?}")));
        }
        Ok(())
    }

    /// J = N/2
    pub fn j(&self) -> f64 {
        self.n_atoms / 2.0
    }

    /// Integer atom number, for engines that store a state vector.
    pub fn atoms_exact(&self) -> Result<usize> {
        if self.n_atoms.fract() != 0.0 || self.n_atoms > 1e6 {
            return Err(Error::param(format!("exact simulation needs an integer, moderate N (got {})", self.n_atoms)));
        }
        Ok(self.n_atoms as usize)
    }

    /// Photocurrent increment for a given ⟨Jy⟩.
    pub fn photocurrent(&self, mean_jy: f64, dt: f64, dw: f64) -> f64 {
        2.0 * self.eta * self.m.sqrt() * mean_jy * dt + self.eta.sqrt() * dw
    }
}

/// Output of one conditional step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub dy: f64,
    pub dw: f64,
    pub moments: SpinMoments,
}

/// D[L]ρ = LρL† - ½{L†L, ρ}
pub fn superop_d(l: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let ld = l.adjoint();
    let ldl = &ld * l;
    l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0)
}

/// H[L]ρ = Lρ + ρL† - Tr[(L + L†)ρ] ρ
pub fn superop_h(l: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let ld = l.adjoint();
    let tr = ((l + &ld) * rho).trace();
    l * rho + rho * &ld - rho * tr
}

/// Phase and collective-dephasing factor for coherence ρ_ab with m_a - m_b = d.
fn offset_factor(theta: f64, kappa_c: f64, dt: f64, d: f64) -> C64 {
    C64::from_polar((-0.5 * kappa_c * d * d * dt).exp(), -theta * d)
}

/// Symmetric-subspace SME integrator with preallocated workspaces.
///
/// Each step applies a second-order Rouchon Kraus map for the homodyne channel,
/// renormalizes, then applies the rotation about z and the collective dephasing
/// exactly (both are diagonal in the Dicke basis).
#[derive(Clone, Debug)]
pub struct SmeEngine {
    n: usize,
    params: SensorParams,
    ops: BandedOps,
    jy2: Banded,
    work: DMatrix<C64>,
    work2: DMatrix<C64>,
    /// Run the eigenvalue positivity check every this many steps (0 disables).
    pub positivity_every: usize,
    steps: usize,
    min_eigenvalue: f64,
}

impl SmeEngine {
    pub fn new(params: SensorParams) -> Result<Self> {
        params.validate()?;
        if params.kappa_loc != 0.0 {
            return Err(Error::param("symmetric-subspace SME requires kappa_loc = 0; use the full Hilbert-space engine"));
        }
        let n = params.atoms_exact()?;
        let ops = BandedOps::new(n);
        let jy2 = ops.jy.mul(&ops.jy);
        let d = n + 1;
        Ok(Self {
            n,
            params,
            ops,
            jy2,
            work: DMatrix::zeros(d, d),
            work2: DMatrix::zeros(d, d),
            positivity_every: 50,
            steps: 0,
            min_eigenvalue: f64::INFINITY,
        })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    pub fn ops(&self) -> &BandedOps {
        &self.ops
    }

    /// Smallest eigenvalue seen by the periodic positivity checks.
    pub fn min_eigenvalue_seen(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn moments(&self, state: &DickeState) -> SpinMoments {
        moments_banded(&state.rho, &self.ops)
    }

    /// Advance ρ by one step with Wiener increment `dw`, returning the photocurrent.
    pub fn step(&mut self, state: &mut DickeState, omega: f64, u: f64, dt: f64, dw: f64) -> Result<StepRecord> {
        if state.n_atoms != self.n {
            return Err(Error::Dimension("state does not match engine atom number".into()));
        }
        if !(dt > 0.0) || !dw.is_finite() || !(omega + u).is_finite() {
            return Err(Error::numerical(self.steps, format!("bad step inputs dt={dt} dw={dw} omega+u={}", omega + u)));
        }
        let p = self.params;
        let mean_jy = self.ops.jy.expect(&state.rho).re;
        let dy = p.photocurrent(mean_jy, dt, dw);

        if p.m > 0.0 {
            let dyr = 2.0 * (p.eta * p.m).sqrt() * mean_jy * dt + dw;
            let a = (p.eta * p.m).sqrt() * dyr;
            let b = -0.5 * p.m * dt + 0.5 * p.eta * p.m * (dyr * dyr - dt);
            let kraus = Banded::identity(self.n + 1)
                .add(&self.ops.jy.scale(C64::new(a, 0.0)))
                .add(&self.jy2.scale(C64::new(b, 0.0)));
            kraus.left_mul_into(&state.rho, &mut self.work);
            kraus.right_mul_adj_into(&self.work, &mut self.work2);
            if p.eta < 1.0 {
                self.ops.jy.left_mul_into(&state.rho, &mut self.work);
                let lost = self.ops.jy.right_mul_adj(&self.work);
                self.work2 += lost * C64::new((1.0 - p.eta) * p.m * dt, 0.0);
            }
            std::mem::swap(&mut state.rho, &mut self.work2);
        }

        let theta = (omega + u) * dt;
        let d = self.n + 1;
        let factors: Vec<C64> = (0..2 * d - 1)
            .map(|k| offset_factor(theta, p.kappa_coll, dt, k as f64 - (d - 1) as f64))
            .collect();
        let tr = state.rho.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::numerical(self.steps, format!("trace collapsed to {tr}")));
        }
        let inv = 1.0 / tr;
        for c in 0..d {
            for r in 0..=c {
                // m_r - m_c = c - r
                let f = factors[c - r + d - 1];
                let upper = state.rho[(r, c)] * f * inv;
                let lower = state.rho[(c, r)] * f.conj() * inv;
                let avg = (upper + lower.conj()) * 0.5;
                state.rho[(r, c)] = avg;
                state.rho[(c, r)] = avg.conj();
            }
        }

        self.steps += 1;
        let with_eigen = self.positivity_every > 0 && self.steps % self.positivity_every == 0;
        let report = state.report(with_eigen);
        if let Some(e) = report.min_eigenvalue {
            self.min_eigenvalue = self.min_eigenvalue.min(e);
        }
        if report.trace_error > TRACE_TOL
            || report.hermiticity > HERMITICITY_TOL
            || report.min_eigenvalue.is_some_and(|e| e < -POSITIVITY_TOL)
        {
            return Err(Error::numerical(self.steps, format!("SME invariants violated: {report:?}")));
        }
        Ok(StepRecord { dy, dw, moments: self.moments(state) })
    }
}

/// One symmetric-subspace SME step (allocating convenience wrapper around [`SmeEngine`]).
pub fn sme_step(
    state: &DickeState,
    omega: f64,
    u: f64,
    dt: f64,
    dw: f64,
    params: &SensorParams,
) -> Result<(DickeState, StepRecord)> {
    let mut eng = SmeEngine::new(*params)?;
    eng.positivity_every = 1;
    let mut s = state.clone();
    let rec = eng.step(&mut s, omega, u, dt, dw)?;
    Ok((s, rec))
}

/// Moment time series of one trajectory on a fixed grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSeries {
    pub t: Vec<f64>,
    pub moments: Vec<SpinMoments>,
}

/// Ensemble averages of conditional moments, and unconditional moments when states are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedSeries {
    pub t: Vec<f64>,
    /// Pointwise mean of the conditional moments.
    pub conditional: Vec<SpinMoments>,
    /// Moments of the averaged density matrix.
    pub unconditional: Option<Vec<SpinMoments>>,
    pub rho: Option<Vec<DMatrix<C64>>>,
}

/// Average trajectories pointwise; with `states`, also average ρ(t).
pub fn unconditional_average(trajs: &[MomentSeries], states: Option<&[Vec<DMatrix<C64>>]>) -> Result<AveragedSeries> {
    if trajs.len() < 2 {
        return Err(Error::param("need at least two trajectories"));
    }
    let t = trajs[0].t.clone();
    for tr in trajs {
        if tr.t.len() != t.len() || tr.moments.len() != t.len() || tr.t.iter().zip(&t).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs())) {
            return Err(Error::Dimension("trajectories are on different time grids".into()));
        }
    }
    let inv = 1.0 / trajs.len() as f64;
    let conditional = (0..t.len())
        .map(|k| {
            let mut m = SpinMoments { mean: Default::default(), cov: Default::default() };
            for tr in trajs {
                m.mean += tr.moments[k].mean * inv;
                m.cov += tr.moments[k].cov * inv;
            }
            m
        })
        .collect();
    let (rho, unconditional) = match states {
        None => (None, None),
        Some(st) => {
            if st.len() != trajs.len() || st.iter().any(|s| s.len() != t.len()) {
                return Err(Error::Dimension("state history does not match trajectories".into()));
            }
            let d = st[0][0].nrows();
            let ops = BandedOps::new(d - 1);
            let mut avg = Vec::with_capacity(t.len());
            let mut mom = Vec::with_capacity(t.len());
            for k in 0..t.len() {
                let mut r = DMatrix::<C64>::zeros(d, d);
                for s in st {
                    r += &s[k];
                }
                r *= C64::new(inv, 0.0);
                mom.push(moments_banded(&r, &ops));
                avg.push(r);
            }
            (Some(avg), Some(mom))
        }
    };
    Ok(AveragedSeries { t, conditional, unconditional, rho })
}
