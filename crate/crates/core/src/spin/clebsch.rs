//! Clebsch-Gordan coefficients from the Racah factorial sum.

use crate::special::ln_factorial;

fn twice(x: f64) -> Option<i64> {
    let t = (2.0 * x).round();
    ((2.0 * x - t).abs() < 1e-9).then_some(t as i64)
}

fn lf(twice_val: i64) -> f64 {
    // argument is 2·(integer), halved here
    ln_factorial((twice_val / 2) as usize)
}

/// ⟨j1, m1; j2, m2 | k, q⟩ for integer or half-integer arguments.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, k: f64, q: f64) -> f64 {
    let (Some(a), Some(am), Some(b), Some(bm), Some(c), Some(cm)) = (twice(j1), twice(m1), twice(j2), twice(m2), twice(k), twice(q))
    else {
        return 0.0;
    };
    if am.abs() > a || bm.abs() > b || cm.abs() > c || a < 0 || b < 0 || c < 0 {
        return 0.0;
    }
    if am + bm != cm || c < (a - b).abs() || c > a + b {
        return 0.0;
    }
    // parity: j ± m must be integer, and j1 + j2 + k integer
    if (a + am) % 2 != 0 || (b + bm) % 2 != 0 || (c + cm) % 2 != 0 || (a + b + c) % 2 != 0 {
        return 0.0;
    }
    let ln_pref = 0.5
        * (((c + 1) as f64).ln() + lf(c + a - b) + lf(c - a + b) + lf(a + b - c) - lf(a + b + c + 2)
            + lf(c + cm)
            + lf(c - cm)
            + lf(a - am)
            + lf(a + am)
            + lf(b - bm)
            + lf(b + bm));
    // summation index s in doubled units runs over even values
    let s_min = 0.max(b - c - am).max(a - c + bm);
    let s_max = (a + b - c).min(a - am).min(b + bm);
    if s_min > s_max {
        return 0.0;
    }
    let mut terms = Vec::new();
    let mut s = s_min;
    while s <= s_max {
        let ln_den = lf(s) + lf(a + b - c - s) + lf(a - am - s) + lf(b + bm - s) + lf(c - b + am + s) + lf(c - a - bm + s);
        let sign = if (s / 2) % 2 == 0 { 1.0 } else { -1.0 };
        terms.push((sign, ln_pref - ln_den));
        s += 2;
    }
    let shift = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|(sg, l)| sg * (l - shift).exp()).sum();
    sum * shift.exp()
}
