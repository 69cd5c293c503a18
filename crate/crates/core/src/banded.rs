//! Complex banded matrices acting on dense density matrices.
//!
//! The collective spin operators are tridiagonal in the Dicke basis, so products
//! like `Jy ρ Jy` cost O(n²) instead of O(n³).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Square banded matrix with half-bandwidth `w`; `diags[o + w][i] = A[i, i + o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Banded {
    n: usize,
    w: usize,
    diags: Vec<Vec<C64>>,
}

impl Banded {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self { n, w, diags: vec![vec![C64::new(0.0, 0.0); n]; 2 * w + 1] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(vals: &[f64]) -> Self {
        let mut b = Self::zeros(vals.len(), 0);
        for (i, v) in vals.iter().enumerate() {
            b.diags[0][i] = C64::new(*v, 0.0);
        }
        b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.w
    }

    fn in_range(&self, i: usize, o: isize) -> bool {
        let j = i as isize + o;
        j >= 0 && (j as usize) < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let o = j as isize - i as isize;
        if o.unsigned_abs() > self.w {
            C64::new(0.0, 0.0)
        } else {
            self.diags[(o + self.w as isize) as usize][i]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let o = j as isize - i as isize;
        assert!(o.unsigned_abs() <= self.w, "entry outside band");
        self.diags[(o + self.w as isize) as usize][i] = v;
    }

    fn widen(&self, w: usize) -> Banded {
        if w <= self.w {
            return self.clone();
        }
        let mut b = Banded::zeros(self.n, w);
        for (k, d) in self.diags.iter().enumerate() {
            b.diags[k + w - self.w] = d.clone();
        }
        b
    }

    pub fn add(&self, other: &Banded) -> Banded {
        let w = self.w.max(other.w);
        let mut a = self.widen(w);
        let b = other.widen(w);
        for (da, db) in a.diags.iter_mut().zip(&b.diags) {
            for (x, y) in da.iter_mut().zip(db) {
                *x += y;
            }
        }
        a
    }

    pub fn scale(&self, s: C64) -> Banded {
        let mut a = self.clone();
        for d in a.diags.iter_mut() {
            for x in d.iter_mut() {
                *x *= s;
            }
        }
        a
    }

    pub fn mul(&self, other: &Banded) -> Banded {
        let w = self.w + other.w;
        let mut out = Banded::zeros(self.n, w);
        for i in 0..self.n {
            for oa in -(self.w as isize)..=(self.w as isize) {
                if !self.in_range(i, oa) {
                    continue;
                }
                let a = self.diags[(oa + self.w as isize) as usize][i];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let k = (i as isize + oa) as usize;
                for ob in -(other.w as isize)..=(other.w as isize) {
                    if !other.in_range(k, ob) {
                        continue;
                    }
                    let b = other.diags[(ob + other.w as isize) as usize][k];
                    let o = oa + ob;
                    out.diags[(o + w as isize) as usize][i] += a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Banded {
        let mut out = Banded::zeros(self.n, self.w);
        for i in 0..self.n {
            for o in -(self.w as isize)..=(self.w as isize) {
                if self.in_range(i, o) {
                    let j = (i as isize + o) as usize;
                    out.set(j, i, self.get(i, j).conj());
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for o in -(self.w as isize)..=(self.w as isize) {
                if self.in_range(i, o) {
                    let j = (i as isize + o) as usize;
                    m[(i, j)] = self.get(i, j);
                }
            }
        }
        m
    }

    /// A·ρ
    pub fn left_mul(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.n, rho.ncols());
        self.left_mul_into(rho, &mut out);
        out
    }

    /// out = A·ρ
    pub fn left_mul_into(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.n;
        let w = self.w as isize;
        for c in 0..rho.ncols() {
            let src = rho.column(c);
            let mut dst = out.column_mut(c);
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                let lo = (-w).max(-(i as isize));
                let hi = w.min((n - 1 - i) as isize);
                for o in lo..=hi {
                    acc += self.diags[(o + w) as usize][i] * src[(i as isize + o) as usize];
                }
                dst[i] = acc;
            }
        }
    }

    /// ρ·A†
    pub fn right_mul_adj(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(rho.nrows(), self.n);
        self.right_mul_adj_into(rho, &mut out);
        out
    }

    /// out = ρ·A†, i.e. out[:, j] = Σ_k conj(A[j, k]) ρ[:, k].
    pub fn right_mul_adj_into(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.n;
        let w = self.w as isize;
        out.fill(C64::new(0.0, 0.0));
        for j in 0..n {
            let lo = (-w).max(-(j as isize));
            let hi = w.min((n - 1 - j) as isize);
            for o in lo..=hi {
                let a = self.diags[(o + w) as usize][j].conj();
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let k = (j as isize + o) as usize;
                let (src, mut dst) = (rho.column(k), out.column_mut(j));
                for r in 0..rho.nrows() {
                    dst[r] += a * src[r];
                }
            }
        }
    }

    /// Tr(A ρ)
    pub fn expect(&self, rho: &DMatrix<C64>) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let w = self.w as isize;
        for i in 0..self.n {
            for o in -w..=w {
                if self.in_range(i, o) {
                    let j = (i as isize + o) as usize;
                    acc += self.diags[(o + w) as usize][i] * rho[(j, i)];
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, w: usize, seed: u64) -> Banded {
        let mut b = Banded::zeros(n, w);
        let mut s = seed as f64;
        for i in 0..n {
            for j in i.saturating_sub(w)..(i + w + 1).min(n) {
                s = (s * 1.618 + 0.37).fract();
                let re = s - 0.5;
                s = (s * 2.718 + 0.11).fract();
                b.set(i, j, C64::new(re, s - 0.5));
            }
        }
        b
    }

    #[test]
    fn products_match_dense() {
        let a = sample(7, 1, 3);
        let b = sample(7, 2, 5);
        let rho = sample(7, 6, 9).to_dense();
        let ad = a.to_dense();
        assert!((a.mul(&b).to_dense() - &ad * b.to_dense()).norm() < 1e-13);
        assert!((a.left_mul(&rho) - &ad * &rho).norm() < 1e-13);
        assert!((a.right_mul_adj(&rho) - &rho * ad.adjoint()).norm() < 1e-13);
        assert!((a.expect(&rho) - (&ad * &rho).trace()).norm() < 1e-13);
        assert!((a.adjoint().to_dense() - ad.adjoint()).norm() < 1e-15);
        assert!((a.add(&b).to_dense() - (ad + b.to_dense())).norm() < 1e-15);
    }
}
