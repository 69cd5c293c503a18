//! Adaptive integrators for small deterministic systems: Dormand-Prince 5(4) and Radau IIA.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Error control: a component passes when |err| ≤ atol + rtol·max(|y|, |y_new|).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-300 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Counters from one integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrate y' = f(t, y) from `t0`, returning y at each of the increasing `times`.
pub fn dopri45<F>(mut f: F, t0: f64, y0: &DVector<f64>, times: &[f64], tol: Tolerance) -> Result<(Vec<DVector<f64>>, OdeStats)>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut out = Vec::with_capacity(times.len());
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    let span = times.last().map_or(0.0, |&e| e - t0);
    let mut h = if span > 0.0 { span * 1e-8 } else { 0.0 };
    let mut k: Vec<DVector<f64>> = vec![k1.clone(); 7];
    for &target in times {
        if target < t {
            return Err(Error::param("output times must be increasing and not before t0"));
        }
        while t < target {
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            k[0] = k1.clone();
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        ys.axpy(step * A[s][j], kj, 1.0);
                    }
                }
                k[s] = f(t + C[s] * step, &ys);
            }
            // the seventh stage is evaluated at the fifth-order solution (FSAL)
            let mut y_new = y.clone();
            for (j, kj) in k.iter().enumerate().take(6) {
                if A[6][j] != 0.0 {
                    y_new.axpy(step * A[6][j], kj, 1.0);
                }
            }
            let mut err: f64 = 0.0;
            for i in 0..y.len() {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * step;
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max(e.abs() / sc);
            }
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                if step < 1e-300 {
                    return Err(Error::numerical(stats.accepted, "integrator step underflow"));
                }
                h = step * 0.1;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y_new;
                k1 = k[6].clone();
                stats.accepted += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * grow;
                } else {
                    h = h.max(step * grow);
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < 1e-300 {
                    return Err(Error::numerical(stats.accepted, "integrator step underflow"));
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

const SQ6: f64 = 2.449_489_742_783_178;

fn radau_tableau() -> ([f64; 3], [[f64; 3]; 3]) {
    let c = [(4.0 - SQ6) / 10.0, (4.0 + SQ6) / 10.0, 1.0];
    let a = [
        [(88.0 - 7.0 * SQ6) / 360.0, (296.0 - 169.0 * SQ6) / 1800.0, (-2.0 + 3.0 * SQ6) / 225.0],
        [(296.0 + 169.0 * SQ6) / 1800.0, (88.0 + 7.0 * SQ6) / 360.0, (-2.0 - 3.0 * SQ6) / 225.0],
        [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
    ];
    (c, a)
}

/// One Radau IIA step solved by simplified Newton; `None` when Newton fails to converge.
fn radau_step<F, J>(f: &mut F, jac: &mut J, t: f64, y: &DVector<f64>, h: f64) -> Option<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
    J: FnMut(f64, &DVector<f64>) -> DMatrix<f64>,
{
    let (c, a) = radau_tableau();
    let n = y.len();
    let jy = jac(t + h, y);
    let mut m = DMatrix::identity(3 * n, 3 * n);
    for i in 0..3 {
        for j in 0..3 {
            let mut blk = m.view_mut((i * n, j * n), (n, n));
            blk -= &jy * (h * a[i][j]);
        }
    }
    let lu = m.lu();
    let mut z = DVector::zeros(3 * n);
    let scale = y.amax().max(1e-300);
    for _ in 0..30 {
        let fz: Vec<DVector<f64>> = (0..3).map(|j| f(t + c[j] * h, &(y + z.rows(j * n, n)))).collect();
        let mut res = z.clone();
        for i in 0..3 {
            for (j, fj) in fz.iter().enumerate() {
                let mut r = res.rows_mut(i * n, n);
                r.axpy(-h * a[i][j], fj, 1.0);
            }
        }
        let dz = lu.solve(&(-res))?;
        if dz.iter().any(|v| !v.is_finite()) {
            return None;
        }
        z += &dz;
        if dz.amax() <= 1e-14 * (scale + z.amax()) {
            return Some(y + z.rows(2 * n, n));
        }
    }
    None
}

/// Integrate a stiff system y' = f(t, y) with the 3-stage Radau IIA method (order 5, L-stable).
///
/// `jac` returns ∂f/∂y; the local error is estimated by step doubling.
pub fn radau5<F, J>(mut f: F, mut jac: J, t0: f64, y0: &DVector<f64>, times: &[f64], tol: Tolerance) -> Result<(Vec<DVector<f64>>, OdeStats)>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
    J: FnMut(f64, &DVector<f64>) -> DMatrix<f64>,
{
    let mut out = Vec::with_capacity(times.len());
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.clone();
    let span = times.last().map_or(0.0, |&e| e - t0);
    let mut h = if span > 0.0 { span * 1e-10 } else { 0.0 };
    for &target in times {
        if target < t {
            return Err(Error::param("output times must be increasing and not before t0"));
        }
        while t < target {
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            let full = radau_step(&mut f, &mut jac, t, &y, step);
            let half = radau_step(&mut f, &mut jac, t, &y, step / 2.0)
                .and_then(|m| radau_step(&mut f, &mut jac, t + step / 2.0, &m, step / 2.0));
            let (full, half) = match (full, half) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    stats.rejected += 1;
                    h = step * 0.25;
                    if h < 1e-300 || stats.rejected > 100_000 {
                        return Err(Error::numerical(stats.accepted, "implicit integrator failed to converge"));
                    }
                    continue;
                }
            };
            let mut err: f64 = 0.0;
            for i in 0..y.len() {
                let e = (half[i] - full[i]) / 31.0;
                let sc = tol.atol + tol.rtol * y[i].abs().max(half[i].abs());
                err = err.max(e.abs() / sc);
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = half;
                stats.accepted += 1;
                let grow = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 6.0)).clamp(0.2, 4.0) };
                h = if last { h.max(step * grow) } else { step * grow };
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-1.0 / 6.0)).clamp(0.1, 0.9);
                if h < 1e-300 {
                    return Err(Error::numerical(stats.accepted, "integrator step underflow"));
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let times: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let (ys, _) = dopri45(|_, y| DVector::from_vec(vec![y[1], -y[0]]), 0.0, &y0, &times, Tolerance { rtol: 1e-11, atol: 1e-13 }).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-9, "{t}");
        }
        let (ys, _) = dopri45(|_, y| -y * 3.0, 0.0, &DVector::from_element(1, 2.0), &[5.0], Tolerance::default()).unwrap();
        assert!((ys[0][0] / (2.0 * (-15.0f64).exp()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_backwards_output() {
        let y0 = DVector::from_element(1, 1.0);
        assert!(dopri45(|_, y| y.clone(), 0.0, &y0, &[1.0, 0.5], Tolerance::default()).is_err());
    }

    #[test]
    fn radau_handles_stiff_linear_system() {
        // y1' = -1e9 (y1 - cos t), y2' = -y2: y1 tracks cos t to O(1e-9).
        let f = |t: f64, y: &DVector<f64>| DVector::from_vec(vec![-1e9 * (y[0] - t.cos()), -y[1]]);
        let j = |_: f64, _: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[-1e9, 0.0, 0.0, -1.0]);
        let times = [1e-6, 0.5, 3.0];
        let (ys, st) = radau5(f, j, 0.0, &DVector::from_vec(vec![0.0, 1.0]), &times, Tolerance { rtol: 1e-10, atol: 1e-14 }).unwrap();
        assert!(st.accepted < 2000, "{st:?}");
        for (t, y) in times[1..].iter().zip(&ys[1..]) {
            assert!((y[0] - t.cos()).abs() < 1e-8);
            assert!((y[1] / (-t).exp() - 1.0).abs() < 1e-8, "{} {:?}", y[1] / (-t).exp() - 1.0, st);
        }
    }
}
