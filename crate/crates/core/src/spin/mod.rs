//! Collective spin operators in the symmetric Dicke basis, coherent spin states,
//! moments and squeezing.
//!
//! Basis ordering is fixed as m = +j, j-1, ..., -j with j = N/2, so index `i`
//! carries m = j - i.

pub mod clebsch;
pub mod wigner;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::special::ln_binomial;

pub use clebsch::clebsch_gordan;
pub use wigner::{wigner_sphere, SphereGrid, WignerField};

/// Magnetic quantum numbers in basis order.
pub fn m_values(n_atoms: usize) -> Vec<f64> {
    let j = n_atoms as f64 / 2.0;
    (0..=n_atoms).map(|i| j - i as f64).collect()
}

/// J+ in banded form: entry (i-1, i) = √(j(j+1) - m(m+1)) with m = j - i.
pub fn raising(n_atoms: usize) -> Banded {
    let j = n_atoms as f64 / 2.0;
    let m = m_values(n_atoms);
    let mut b = Banded::zeros(n_atoms + 1, 1);
    for i in 1..=n_atoms {
        let v = (j * (j + 1.0) - m[i] * (m[i] + 1.0)).max(0.0).sqrt();
        b.set(i - 1, i, C64::new(v, 0.0));
    }
    b
}

/// Banded collective operators plus their symmetrized products.
#[derive(Clone, Debug)]
pub struct BandedOps {
    pub jx: Banded,
    pub jy: Banded,
    pub jz: Banded,
    /// `sym[a][b] = (J_a J_b + J_b J_a)/2` for a, b in {x, y, z}.
    pub sym: [[Banded; 3]; 3],
}

impl BandedOps {
    pub fn new(n_atoms: usize) -> Self {
        let jp = raising(n_atoms);
        let jm = jp.adjoint();
        let half = C64::new(0.5, 0.0);
        let jx = jp.add(&jm).scale(half);
        let jy = jp.add(&jm.scale(C64::new(-1.0, 0.0))).scale(C64::new(0.0, -0.5));
        let jz = Banded::diagonal(&m_values(n_atoms));
        let ops = [&jx, &jy, &jz];
        let sym = std::array::from_fn(|a| std::array::from_fn(|b| ops[a].mul(ops[b]).add(&ops[b].mul(ops[a])).scale(half)));
        Self { jx, jy, jz, sym }
    }
}

/// Dense collective operators on the j = N/2 subspace.
#[derive(Clone, Debug)]
pub struct CollectiveOps {
    pub n_atoms: usize,
    pub jx: DMatrix<C64>,
    pub jy: DMatrix<C64>,
    pub jz: DMatrix<C64>,
    pub jplus: DMatrix<C64>,
    pub jminus: DMatrix<C64>,
    pub banded: BandedOps,
}

impl CollectiveOps {
    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }
}

pub fn build_collective_operators(n_atoms: usize) -> Result<CollectiveOps> {
    if n_atoms < 1 {
        return Err(Error::param("atom number must be at least 1"));
    }
    let jp = raising(n_atoms);
    let banded = BandedOps::new(n_atoms);
    Ok(CollectiveOps {
        n_atoms,
        jx: banded.jx.to_dense(),
        jy: banded.jy.to_dense(),
        jz: banded.jz.to_dense(),
        jplus: jp.to_dense(),
        jminus: jp.adjoint().to_dense(),
        banded,
    })
}

/// Invariant residuals of a density matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: Option<f64>,
}

/// Tolerances used by [`DickeState::check`].
pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Density matrix on the symmetric subspace of N spin-1/2 atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    pub n_atoms: usize,
    pub rho: DMatrix<C64>,
}

impl DickeState {
    pub fn new(n_atoms: usize, rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != n_atoms + 1 || rho.ncols() != n_atoms + 1 {
            return Err(Error::Dimension(format!("expected {0}x{0} density matrix", n_atoms + 1)));
        }
        Ok(Self { n_atoms, rho })
    }

    /// Pure state from amplitudes in basis order.
    pub fn pure(n_atoms: usize, amps: &[C64]) -> Result<Self> {
        if amps.len() != n_atoms + 1 {
            return Err(Error::Dimension("amplitude vector length must be N+1".into()));
        }
        let v = nalgebra::DVector::from_column_slice(amps);
        let rho = &v * v.adjoint();
        Self::new(n_atoms, rho)
    }

    /// The Dicke state |j, m = j - index⟩.
    pub fn basis(n_atoms: usize, index: usize) -> Result<Self> {
        let mut a = vec![C64::new(0.0, 0.0); n_atoms + 1];
        a[index] = C64::new(1.0, 0.0);
        Self::pure(n_atoms, &a)
    }

    pub fn maximally_mixed(n_atoms: usize) -> Self {
        let d = n_atoms + 1;
        Self { n_atoms, rho: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0) }
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.rho.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Trace, Hermiticity and (optionally) positivity residuals.
    pub fn report(&self, with_eigen: bool) -> InvariantReport {
        InvariantReport {
            trace_error: (self.trace() - C64::new(1.0, 0.0)).norm(),
            hermiticity: self.hermiticity_residual(),
            min_eigenvalue: with_eigen.then(|| self.min_eigenvalue()),
        }
    }

    /// Fail if any invariant is violated beyond the fixed tolerances.
    pub fn check(&self, with_eigen: bool) -> Result<InvariantReport> {
        let r = self.report(with_eigen);
        if r.trace_error > TRACE_TOL || r.hermiticity > HERMITICITY_TOL || r.min_eigenvalue.is_some_and(|e| e < -POSITIVITY_TOL) {
            return Err(Error::numerical(0, format!("density-matrix invariants violated: {r:?}")));
        }
        Ok(r)
    }
}

/// Amplitudes 2^{-N/2} √C(N, N/2 + m) of the coherent spin state along +x.
pub fn css_x_amplitudes(n_atoms: usize) -> Vec<f64> {
    let ln2 = std::f64::consts::LN_2;
    (0..=n_atoms)
        .map(|i| (0.5 * (ln_binomial(n_atoms, n_atoms - i) - n_atoms as f64 * ln2)).exp())
        .collect()
}

/// Coherent spin state polarized along +x.
pub fn css_x(n_atoms: usize) -> Result<DickeState> {
    if n_atoms < 1 {
        return Err(Error::param("atom number must be at least 1"));
    }
    let amps: Vec<C64> = css_x_amplitudes(n_atoms).into_iter().map(|a| C64::new(a, 0.0)).collect();
    DickeState::pure(n_atoms, &amps)
}

/// First and symmetrized second central moments of (Jx, Jy, Jz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl SpinMoments {
    pub fn var_x(&self) -> f64 {
        self.cov[(0, 0)]
    }
    pub fn var_y(&self) -> f64 {
        self.cov[(1, 1)]
    }
    pub fn var_z(&self) -> f64 {
        self.cov[(2, 2)]
    }
    pub fn cov_xy(&self) -> f64 {
        self.cov[(0, 1)]
    }

    /// Squeezing of Jy relative to the mean spin along x.
    pub fn xi2_y(&self, n_atoms: usize) -> Result<f64> {
        squeezing_wineland(self.var_y(), self.mean[0], n_atoms as f64)
    }
}

/// Moments from banded operators, O(N) per expectation.
pub fn moments_banded(rho: &DMatrix<C64>, ops: &BandedOps) -> SpinMoments {
    let mean = Vector3::new(ops.jx.expect(rho).re, ops.jy.expect(rho).re, ops.jz.expect(rho).re);
    let mut cov = Matrix3::zeros();
    for a in 0..3 {
        for b in a..3 {
            let v = ops.sym[a][b].expect(rho).re - mean[a] * mean[b];
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    SpinMoments { mean, cov }
}

pub fn moments(state: &DickeState, ops: &CollectiveOps) -> Result<SpinMoments> {
    if state.n_atoms != ops.n_atoms {
        return Err(Error::Dimension("state and operators have different atom numbers".into()));
    }
    let tr = state.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-6 {
        return Err(Error::numerical(0, format!("trace of state is {tr}")));
    }
    Ok(moments_banded(&state.rho, &ops.banded))
}

/// ξ² = N V⊥ / ⟨J_s⟩².
pub fn squeezing_wineland(v_perp: f64, mean_s: f64, n_atoms: f64) -> Result<f64> {
    if mean_s == 0.0 {
        return Err(Error::param("squeezing parameter undefined for zero mean spin"));
    }
    Ok(n_atoms * v_perp / (mean_s * mean_s))
}
