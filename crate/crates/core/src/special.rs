//! Special functions: scaled modified Bessel functions, log-factorials and
//! Gauss-Legendre nodes.

use std::f64::consts::PI;
use std::sync::OnceLock;

const LOG_FACT_TABLE: usize = 4096;

fn log_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LOG_FACT_TABLE);
        t.push(0.0);
        for n in 1..LOG_FACT_TABLE {
            t.push(t[n - 1] + (n as f64).ln());
        }
        t
    })
}

/// ln(n!) from a cached table (exact accumulation of logs).
pub fn ln_factorial(n: usize) -> f64 {
    let t = log_fact_table();
    if n < t.len() {
        t[n]
    } else {
        t[t.len() - 1] + ((t.len())..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

/// ln of the binomial coefficient C(n, k).
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Exponentially scaled modified Bessel function of the first kind, e^{-x} I_n(x), x >= 0.
pub fn bessel_ie(n: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_ie requires x >= 0");
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= 25.0 + (n as f64) * (n as f64) / 4.0 {
        // Power series: all terms positive, so no cancellation.
        let half = 0.5 * x;
        let mut term = (n as f64 * half.ln() - ln_factorial(n as usize) - x).exp();
        let mut sum = term;
        let q = half * half;
        let mut k = 1.0;
        loop {
            term *= q / (k * (k + n as f64));
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        // Hankel asymptotic expansion, truncated at the smallest term.
        let mu = 4.0 * (n as f64) * (n as f64);
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut k: f64 = 1.0;
        loop {
            let next = -term * (mu - (2.0 * k - 1.0).powi(2)) / (k * 8.0 * x);
            if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
                if next.abs() < term.abs() {
                    sum += next;
                }
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Exponentially scaled modified Bessel function of the second kind, e^{x} K_nu(x), x > 0.
///
/// Uses the integral e^x K_nu(x) = ∫_0^∞ exp(-x (cosh t - 1)) cosh(nu t) dt with the
/// trapezoid rule, which converges geometrically for this analytic, even integrand.
pub fn bessel_ke(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_ke requires x > 0");
    let h = (0.25 / x.sqrt()).min(0.1);
    let mut sum = 0.5;
    let mut k = 1.0;
    loop {
        let t = k * h;
        let expo = -x * (t.cosh() - 1.0) + nu * t;
        if expo < -745.0 {
            break;
        }
        let v = (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        sum += v;
        if v < 1e-18 * sum && x * (t.cosh() - 1.0) > nu * t + 40.0 {
            break;
        }
        k += 1.0;
    }
    sum * h
}

/// Regularized confluent hypergeometric limit function 0F1(;b;z)/Γ(b) for integer b >= 1, z >= 0.
pub fn hyp0f1_regularized(b: u32, z: f64) -> f64 {
    assert!(b >= 1 && z >= 0.0);
    let n = b - 1;
    if z == 0.0 {
        return (-ln_factorial(n as usize)).exp();
    }
    let s = z.sqrt();
    let x = 2.0 * s;
    bessel_ie(n, x) * x.exp() / s.powi(n as i32)
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes in ascending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            z = 0.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        w[0] = 2.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // Reference values from standard tables.
        let i0_1 = 1.2660658777520082;
        let i1_1 = 0.5651591039924851;
        let k0_1 = 0.42102443824070834;
        let k1_1 = 0.6019072301972346;
        assert!((bessel_ie(0, 1.0) * 1f64.exp() - i0_1).abs() < 1e-14);
        assert!((bessel_ie(1, 1.0) * 1f64.exp() - i1_1).abs() < 1e-14);
        assert!((bessel_ke(0.0, 1.0) * (-1f64).exp() - k0_1).abs() < 1e-14);
        assert!((bessel_ke(1.0, 1.0) * (-1f64).exp() - k1_1).abs() < 1e-14);
    }

    #[test]
    fn scaled_bessel_continuity_across_branches() {
        for n in 0..3 {
            let x = 25.0 + (n * n) as f64 / 4.0;
            let a = bessel_ie(n, x * (1.0 - 1e-15));
            let b = bessel_ie(n, x * (1.0 + 1e-15));
            assert!((a / b - 1.0).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn bessel_wronskian() {
        // I_nu K_{nu+1} + I_{nu+1} K_nu = 1/x
        for &x in &[1e-3, 0.3, 2.0, 17.0, 40.0, 800.0, 1e5] {
            let w = bessel_ie(0, x) * bessel_ke(1.0, x) + bessel_ie(1, x) * bessel_ke(0.0, x);
            assert!((w * x - 1.0).abs() < 1e-12, "x={x}: {}", w * x);
        }
    }

    #[test]
    fn hyp0f1_matches_series() {
        for &z in &[0.0, 0.5, 3.0, 20.0] {
            for b in 1..=3u32 {
                let mut term = (-ln_factorial(b as usize - 1)).exp();
                let mut sum = term;
                for k in 1..200 {
                    term *= z / (k as f64 * (k as f64 + b as f64 - 1.0));
                    sum += term;
                }
                let v = hyp0f1_regularized(b, z);
                assert!((v / sum - 1.0).abs() < 1e-13, "b={b} z={z}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn log_factorial_large() {
        let n = 5000;
        let direct: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(n) - direct).abs() < 1e-8);
    }
}
