//! Symmetric tridiagonal matrices: Sturm-sequence bisection, inverse
//! iteration and linear solves.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length must be n - 1");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection to full precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest `k` eigenpairs; eigenvectors have unit Euclidean norm and a
    /// positive first significant component.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.len();
        if k > n {
            return Err(Error::EigenSolver(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
        }
        let values: Vec<f64> = (0..k).map(|j| self.eigenvalue(j)).collect();
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for (j, &lambda) in values.iter().enumerate() {
            let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919 + j * 104729) % 97) as f64 / 97.0).collect();
            normalize(&mut v);
            let lu = TridiagonalLu::factor(&self.shifted(-lambda), scale * f64::EPSILON);
            let cluster: Vec<usize> = (0..j)
                .filter(|&i| (values[i] - lambda).abs() < 1e-8 * scale)
                .collect();
            for _ in 0..4 {
                lu.solve_in_place(&mut v);
                for &i in &cluster {
                    let d = dot(&v, &vectors[i]);
                    for (a, b) in v.iter_mut().zip(&vectors[i]) {
                        *a -= d * b;
                    }
                }
                normalize(&mut v);
            }
            let mut w = vec![0.0; n];
            self.mul_vec(&v, &mut w);
            let res: f64 = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            if !res.is_finite() || res > 1e-6 * scale {
                return Err(Error::EigenSolver(format!("inverse iteration residual {res:e} for state {j}")));
            }
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-3) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            vectors.push(v);
        }
        Ok((values, vectors))
    }

    /// `self + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        Self { diag: self.diag.iter().map(|d| d + s).collect(), off: self.off.clone() }
    }

    /// `a I + b self`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| a + b * d).collect(),
            off: self.off.iter().map(|e| b * e).collect(),
        }
    }
}

/// LU factorization with partial pivoting of a (symmetric) tridiagonal matrix.
pub struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Zero pivots are replaced by `tiny`, which is what inverse iteration wants.
    pub fn factor(t: &SymTridiagonal, tiny: f64) -> Self {
        let n = t.len();
        let mut dl = t.off.clone();
        let mut d = t.diag.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self { dl, d, du, du2, swapped }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let t = laplacian(n);
        let (vals, vecs) = t.lowest_eigenpairs(6).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * (PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert_relative_eq!(*v, exact, epsilon = 1e-13);
        }
        for i in 0..6 {
            for j in 0..6 {
                let d = dot(&vecs[i], &vecs[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pivoted_solve_matches_multiplication() {
        let t = SymTridiagonal::new(vec![0.1, -3.0, 0.5, 2.0, 1e-3], vec![4.0, 1.0, -2.0, 0.7]);
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = vec![0.0; 5];
        t.mul_vec(&x, &mut b);
        let lu = TridiagonalLu::factor(&t, 1e-300);
        lu.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(x) {
            assert_relative_eq!(*a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn sturm_count_is_monotone() {
        let t = laplacian(20);
        assert_eq!(t.count_below(-1.0), 0);
        assert_eq!(t.count_below(5.0), 20);
        assert_eq!(t.count_below(2.0 - 1e-9), 10);
    }
}
