//! Precision limits for frequency tracking under dephasing, and analytic Kalman solutions.
//!
//! Every bound here is a variance of the ω estimate, in (rad/s)².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the dephasing-limited bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub q_omega: f64,
    pub kappa_coll: f64,
    pub kappa_loc: f64,
    pub n_atoms: f64,
    /// Prior standard deviation; `f64::INFINITY` for an uninformative prior.
    pub sigma0: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.q_omega, self.kappa_coll, self.kappa_loc, self.sigma0];
        if vals.iter().any(|v| !(*v >= 0.0)) || !(self.n_atoms > 0.0) || !self.n_atoms.is_finite() {
            return Err(Error::param(format!("bound parameters must be non-negative with N > 0: {self:?}")));
        }
        Ok(())
    }

    /// κ_Q(N) = κc + 2κloc/N.
    pub fn kappa_q(&self) -> f64 {
        self.kappa_coll + 2.0 * self.kappa_loc / self.n_atoms
    }

    pub fn with_n(&self, n_atoms: f64) -> Self {
        Self { n_atoms, ..*self }
    }
}

/// A bound value; `degenerate` marks κ_Q = 0 with q_ω > 0, where the bound collapses to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub variance: f64,
    pub degenerate: bool,
}

impl BoundValue {
    pub fn sqrt(&self) -> f64 {
        self.variance.sqrt()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// CS limit with a Gaussian prior of width σ₀.
pub fn cs_limit(t: f64, bp: &BoundParams) -> Result<BoundValue> {
    bp.validate()?;
    check_time(t)?;
    let kq = bp.kappa_q();
    if bp.q_omega == 0.0 {
        return Ok(BoundValue { variance: cs_limit_static(t, bp)?, degenerate: false });
    }
    if kq == 0.0 {
        return Ok(BoundValue { variance: 0.0, degenerate: true });
    }
    let a = (bp.q_omega * kq).sqrt();
    let th = (t * (bp.q_omega / kq).sqrt()).tanh();
    let s2 = bp.sigma0 * bp.sigma0;
    let variance = if s2.is_infinite() {
        a / th
    } else {
        a * (s2 + a * th) / (a + s2 * th)
    };
    Ok(BoundValue { variance, degenerate: false })
}

/// CS limit for an uninformative prior, √(q κ_Q)·coth(t√(q/κ_Q)).
pub fn cs_limit_inf_prior(t: f64, bp: &BoundParams) -> Result<f64> {
    bp.validate()?;
    check_time(t)?;
    if !(t > 0.0) {
        return Err(Error::param("the uninformative-prior bound needs t > 0"));
    }
    let kq = bp.kappa_q();
    if bp.q_omega == 0.0 {
        return Ok(kq / t);
    }
    if kq == 0.0 {
        return Ok(0.0);
    }
    let a = (bp.q_omega * kq).sqrt();
    Ok(a / (t * (bp.q_omega / kq).sqrt()).tanh())
}

/// Static-field bound 1/(1/σ₀² + t/κ_Q).
pub fn cs_limit_static(t: f64, bp: &BoundParams) -> Result<f64> {
    bp.validate()?;
    check_time(t)?;
    let kq = bp.kappa_q();
    let info = 1.0 / (bp.sigma0 * bp.sigma0) + if kq == 0.0 { f64::INFINITY } else { t / kq };
    if t == 0.0 {
        return Ok(bp.sigma0 * bp.sigma0);
    }
    Ok(1.0 / info)
}

/// One-step variances (V_p, V_q) of the discrete recursion; χ enters V_p through the OU transition.
pub fn recursion_variances(dt: f64, chi: f64, bp: &BoundParams) -> Result<(f64, f64)> {
    bp.validate()?;
    if !(dt > 0.0) || !(chi >= 0.0) {
        return Err(Error::param(format!("need dt > 0 and χ ≥ 0, got dt = {dt}, χ = {chi}")));
    }
    let vp = if chi == 0.0 { bp.q_omega * dt } else { bp.q_omega * -(-2.0 * chi * dt).exp_m1() / (2.0 * chi) };
    let vq = bp.kappa_coll / dt + 2.0 * bp.kappa_loc / (bp.n_atoms * dt);
    Ok((vp, vq))
}

/// V^(k) by direct iteration of V^(k) = V_p + V_q V^(k−1)/(V_q + V^(k−1)).
pub fn cs_recursion_iterated(k: usize, dt: f64, chi: f64, bp: &BoundParams) -> Result<f64> {
    let (vp, vq) = recursion_variances(dt, chi, bp)?;
    let mut v = bp.sigma0 * bp.sigma0;
    for _ in 0..k {
        v = vp + if v.is_infinite() { vq } else { vq * v / (vq + v) };
    }
    Ok(v)
}

/// V^(k) in closed form: (W₊ + W₋ρ)/(U₊ + U₋ρ) with ρ = (V₋/V₊)^k.
pub fn cs_recursion(k: usize, dt: f64, chi: f64, bp: &BoundParams) -> Result<f64> {
    let (vp, vq) = recursion_variances(dt, chi, bp)?;
    let s2 = bp.sigma0 * bp.sigma0;
    if k == 0 {
        return Ok(s2);
    }
    if vq == 0.0 {
        return Ok(vp);
    }
    if vp == 0.0 {
        return Ok(1.0 / (1.0 / s2 + k as f64 / vq));
    }
    let root = (vp * (4.0 * vq + vp)).sqrt();
    let v_plus = 2.0 * vq + vp + root;
    let rho = (k as f64 * (-2.0 * root / v_plus).ln_1p()).exp();
    if s2.is_infinite() {
        // W±/σ₀² and U±/σ₀² in the σ₀ → ∞ limit
        let (w_p, w_m) = (vp + root, -vp + root);
        return Ok((w_p + w_m * rho) / (2.0 - 2.0 * rho));
    }
    let w_p = 2.0 * vp * vq + s2 * vp + s2 * root;
    let w_m = -2.0 * vp * vq - s2 * vp + s2 * root;
    let u_p = -vp + 2.0 * s2 + root;
    let u_m = vp - 2.0 * s2 + root;
    Ok((w_p + w_m * rho) / (u_p + u_m * rho))
}

/// Jensen lower bound for a fluctuating atom number: the uninformative-prior bound at N̄.
pub fn cs_limit_fluctuating_n(t: f64, bp: &BoundParams) -> Result<f64> {
    cs_limit_inf_prior(t, bp)
}

/// E_N[V∞(t, N)] for N ~ Normal(N̄, sd_n²) truncated to N > 0, by Simpson quadrature.
pub fn cs_limit_averaged_over_n(t: f64, bp: &BoundParams, sd_n: f64) -> Result<f64> {
    if !(sd_n >= 0.0) {
        return Err(Error::param("atom-number spread must be non-negative"));
    }
    if sd_n == 0.0 {
        return cs_limit_inf_prior(t, bp);
    }
    let lo = (bp.n_atoms - 8.0 * sd_n).max(bp.n_atoms * 1e-6);
    let hi = bp.n_atoms + 8.0 * sd_n;
    let m = 2000;
    let h = (hi - lo) / m as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=m {
        let n = lo + i as f64 * h;
        let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let pdf = (-0.5 * ((n - bp.n_atoms) / sd_n).powi(2)).exp();
        num += w * pdf * cs_limit_inf_prior(t, &bp.with_n(n))?;
        den += w * pdf;
    }
    Ok(num / den)
}

// P(x) = −e^{−x} + 4e^{−x/2} + x − 3 and Q(x) = −(4+x)e^{−x} + 8e^{−x/2} + x − 4,
// both O(x³) at the origin, so small x uses their Taylor series.
fn p_q_series(x: f64) -> (f64, f64) {
    let (mut p, mut q) = (0.0, 0.0);
    let mut term = x * x / 2.0; // x^k/k! at k = 2
    for k in 3..60 {
        term *= x / k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let half = 0.5f64.powi(k as i32);
        p += sign * (4.0 * half - 1.0) * term;
        if k >= 4 {
            q += sign * (k as f64 - 4.0 + 8.0 * half) * term;
        }
        if term.abs() < 1e-18 * p.abs() {
            break;
        }
    }
    (p, q)
}

fn p_q(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        return p_q_series(x);
    }
    let e1 = (-x).exp();
    let e2 = (-x / 2.0).exp();
    (-e1 + 4.0 * e2 + x - 3.0, -(4.0 + x) * e1 + 8.0 * e2 + x - 4.0)
}

/// Closed-form aMSE of the Kalman filter without dephasing or field fluctuations.
pub fn kf_amse_noiseless(t: f64, n_atoms: f64, m: f64, eta: f64, sigma0: f64) -> Result<f64> {
    check_time(t)?;
    if !(n_atoms > 0.0 && m > 0.0 && eta > 0.0 && sigma0 > 0.0) {
        return Err(Error::param("need N, M, η, σ₀ > 0"));
    }
    if t == 0.0 {
        return Ok(sigma0 * sigma0);
    }
    let j = n_atoms / 2.0;
    let x = m * t;
    let g = 2.0 * eta * j;
    let a = m * m / (16.0 * eta * j * j);
    let s2 = sigma0 * sigma0;
    let (b0, b1) = if s2.is_infinite() { (0.0, 0.0) } else { (a / s2, m * m / (8.0 * j * s2)) };
    let (p, q) = p_q(x);
    Ok(a * (1.0 + g * x) / (b0 + b1 * x + p + g * q))
}

/// Short-time asymptote 3/(N²ηMt³), valid for t ≪ 1/(NM) with σ₀ → ∞.
pub fn hs_short(t: f64, n_atoms: f64, m: f64, eta: f64) -> f64 {
    3.0 / (n_atoms * n_atoms * eta * m * t.powi(3))
}

/// Intermediate asymptote 12/(N²ηMt³), valid for 1/(NM) ≪ t < 1/M with σ₀ → ∞.
pub fn hs_intermediate(t: f64, n_atoms: f64, m: f64, eta: f64) -> f64 {
    12.0 / (n_atoms * n_atoms * eta * m * t.powi(3))
}

/// Steady Kalman aMSE for a Wiener-process field (χ = 0).
pub fn kf_ss_error(n_atoms: f64, m: f64, eta: f64, q_omega: f64, kappa_coll: f64) -> Result<f64> {
    if !(n_atoms > 0.0 && m > 0.0 && eta > 0.0 && q_omega >= 0.0 && kappa_coll >= 0.0) {
        return Err(Error::param("need N, M, η > 0 and q_ω, κc ≥ 0"));
    }
    Ok((q_omega * kappa_coll + 2.0 / n_atoms * (q_omega.powi(3) / (m * eta)).sqrt()).sqrt())
}

/// Leading-order steady aMSE for an OU field, −κcχ + √(κc q + κc²χ²).
pub fn kf_ss_error_ou_approx(q_omega: f64, kappa_coll: f64, chi: f64) -> f64 {
    -kappa_coll * chi + (kappa_coll * q_omega + kappa_coll * kappa_coll * chi * chi).sqrt()
}

/// Exact steady aMSE of the steady LG model with an OU field.
pub fn kf_ss_error_ou(n_atoms: f64, m: f64, eta: f64, q_omega: f64, kappa_coll: f64, chi: f64) -> Result<f64> {
    if !(n_atoms > 0.0 && m > 0.0 && eta > 0.0 && q_omega >= 0.0 && kappa_coll >= 0.0 && chi >= 0.0) {
        return Err(Error::param("need N, M, η > 0 and q_ω, κc, χ ≥ 0"));
    }
    let j = n_atoms / 2.0;
    let me = m * eta;
    let qk = q_omega + kappa_coll * chi * chi;
    let inner = 2.0 * j * (me * qk).sqrt();
    let z = -kappa_coll * chi - chi.powi(3) / (4.0 * j * j * me) - chi / (j * me.sqrt()) * qk.sqrt()
        + (chi * chi + inner) * (chi * chi + 4.0 * kappa_coll * j * j * me + 2.0 * inner).sqrt() / (4.0 * j * j * me);
    Ok(z)
}

/// Characteristic times and atom numbers of the LG tracking problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timescales {
    /// Time to reach the CS limit, (2/N)√(3/(ηMκc)).
    pub t_cs: f64,
    /// Bound steady-state time √(κc/q).
    pub t_ss: f64,
    /// Kalman steady-state time 3^{1/3}(4/(N²ηMq))^{1/4}.
    pub t_ss_prime: f64,
}

pub fn timescales(n_atoms: f64, m: f64, eta: f64, q_omega: f64, kappa_coll: f64) -> Result<Timescales> {
    if !(n_atoms > 0.0 && m > 0.0 && eta > 0.0 && q_omega > 0.0 && kappa_coll >= 0.0) {
        return Err(Error::param("need N, M, η, q_ω > 0 and κc ≥ 0"));
    }
    Ok(Timescales {
        t_cs: 2.0 / n_atoms * (3.0 / (eta * m * kappa_coll)).sqrt(),
        t_ss: (kappa_coll / q_omega).sqrt(),
        t_ss_prime: 3f64.cbrt() * (4.0 / (n_atoms * n_atoms * eta * m * q_omega)).powf(0.25),
    })
}

/// Atom number at which the CS limit is reached by time t.
pub fn n_cs(t: f64, m: f64, eta: f64, kappa_coll: f64) -> f64 {
    2.0 / t * (3.0 / (eta * m * kappa_coll)).sqrt()
}

/// Atom number at which the Kalman error reaches its steady state by time t.
pub fn n_ss(t: f64, m: f64, eta: f64, q_omega: f64) -> f64 {
    2.0 * 3f64.powf(2.0 / 3.0) / (t * t * (eta * m * q_omega).sqrt())
}

/// Atom number above which the steady Kalman error saturates the CS limit.
pub fn n_ss_prime(m: f64, eta: f64, q_omega: f64, kappa_coll: f64) -> f64 {
    2.0 / kappa_coll * (q_omega / (eta * m)).sqrt()
}
