//! Banded symmetric solvers for the Newton systems.

use crate::objective::Tridiagonal;

/// Symmetric positive definite matrix with bandwidth 2.
#[derive(Clone, Debug)]
pub struct Pentadiagonal {
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Pentadiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { d0: vec![0.0; n], d1: vec![0.0; n.saturating_sub(1)], d2: vec![0.0; n.saturating_sub(2)] }
    }

    pub fn from_tridiagonal(t: &Tridiagonal) -> Self {
        let n = t.dim();
        Self { d0: t.diag.clone(), d1: t.off.clone(), d2: vec![0.0; n.saturating_sub(2)] }
    }

    pub fn dim(&self) -> usize {
        self.d0.len()
    }

    /// Adds `scale · a aᵀ` where `a` has entries `coef` at `start, start+1, start+2`.
    pub fn add_rank_one3(&mut self, start: usize, coef: [f64; 3], scale: f64) {
        for p in 0..3 {
            self.d0[start + p] += scale * coef[p] * coef[p];
        }
        self.d1[start] += scale * coef[0] * coef[1];
        self.d1[start + 1] += scale * coef[1] * coef[2];
        self.d2[start] += scale * coef[0] * coef[2];
    }

    /// Solves `A x = b` by banded LDLᵀ; `None` on a nonpositive pivot.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        // L has unit diagonal with sub-diagonals l1, l2
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            let mut di = self.d0[i];
            if i >= 1 {
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if !(di > 0.0) || !di.is_finite() {
                return None;
            }
            d[i] = di;
            // column i of L: entries at rows i+1 and i+2
            if i + 1 < n {
                let mut a = self.d1[i];
                if i >= 1 {
                    a -= l2[i + 1] * l1[i] * d[i - 1];
                }
                l1[i + 1] = a / di;
            }
            if i + 2 < n {
                l2[i + 2] = self.d2[i] / di;
            }
        }
        // forward solve L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            if i >= 1 {
                y[i] -= l1[i] * y[i - 1];
            }
            if i >= 2 {
                y[i] -= l2[i] * y[i - 2];
            }
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        // back solve Lᵀ x = y
        for i in (0..n).rev() {
            if i + 1 < n {
                y[i] -= l1[i + 1] * y[i + 1];
            }
            if i + 2 < n {
                y[i] -= l2[i + 2] * y[i + 2];
            }
        }
        Some(y)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] += self.d0[i] * x[i];
            if i + 1 < n {
                y[i] += self.d1[i] * x[i + 1];
                y[i + 1] += self.d1[i] * x[i];
            }
            if i + 2 < n {
                y[i] += self.d2[i] * x[i + 2];
                y[i + 2] += self.d2[i] * x[i];
            }
        }
        y
    }
}

/// Thomas algorithm for SPD tridiagonal systems; `None` on a nonpositive pivot.
pub fn solve_tridiagonal(t: &Tridiagonal, b: &[f64]) -> Option<Vec<f64>> {
    let n = t.dim();
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n];
    for i in 0..n {
        let mut di = t.diag[i];
        if i >= 1 {
            di -= l[i] * l[i] * d[i - 1];
        }
        if !(di > 0.0) || !di.is_finite() {
            return None;
        }
        d[i] = di;
        if i + 1 < n {
            l[i + 1] = t.off[i] / di;
        }
    }
    let mut y = b.to_vec();
    for i in 1..n {
        y[i] -= l[i] * y[i - 1];
    }
    for i in 0..n {
        y[i] /= d[i];
    }
    for i in (0..n.saturating_sub(1)).rev() {
        y[i] -= l[i + 1] * y[i + 1];
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pentadiagonal_roundtrip() {
        let n = 9;
        let mut a = Pentadiagonal::zeros(n);
        for i in 0..n {
            a.d0[i] = 6.0 + i as f64 * 0.1;
        }
        for i in 0..n - 1 {
            a.d1[i] = -1.3 + 0.05 * i as f64;
        }
        for i in 0..n - 2 {
            a.d2[i] = 0.7;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let b = a.mul_vec(&x);
        let got = a.solve(&b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_roundtrip() {
        let t = Tridiagonal { diag: vec![4.0, 5.0, 6.0, 3.0], off: vec![1.0, -2.0, 0.5] };
        let x = vec![1.0, -2.0, 3.0, 0.25];
        let b = t.mul_vec(&x);
        let got = solve_tridiagonal(&t, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-13);
        }
    }
}
