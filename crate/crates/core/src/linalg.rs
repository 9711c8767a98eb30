//! Sparse storage and the two linear solvers behind the discrete solution
//! operators: a banded LU factorisation without pivoting (valid for the
//! nonsingular M-matrices produced by assembly) and Jacobi-preconditioned
//! BiCGSTAB for systems whose band would not fit in memory.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-by-row builder; duplicate columns within a row are summed.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new() -> Self {
        Self {
            row_ptr: vec![0],
            ..Default::default()
        }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.scratch.push((col, val));
    }

    pub fn finish_row(&mut self) {
        self.scratch.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in &self.scratch {
            if last == Some(c) {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.scratch.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix {
            n: self.row_ptr.len() - 1,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        }
    }
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == i).map_or(0.0, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut p, mut q) = (0, 0);
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    p = p.max(i - c);
                } else {
                    q = q.max(c - i);
                }
            }
        }
        (p, q)
    }

    /// Checks the M-matrix sign pattern: positive diagonal, nonpositive
    /// off-diagonal entries and weak row diagonal dominance.
    pub fn is_m_matrix_pattern(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let mut d = 0.0;
            let mut off = 0.0;
            for (c, v) in self.row(i) {
                if c == i {
                    d = v;
                } else if v > tol * v.abs().max(1.0) {
                    return false;
                } else {
                    off += v.abs();
                }
            }
            d > 0.0 && d >= off * (1.0 - 1e-12)
        })
    }
}

/// LU factors of a banded matrix, stored densely inside the band.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    band: Vec<f64>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let (lower, upper) = a.bandwidths();
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (c, v) in a.row(i) {
                band[i * width + c + lower - i] += v;
            }
        }
        for k in 0..n {
            let pivot = band[k * width + lower];
            if pivot.abs() < 1e-300 || !pivot.is_finite() {
                return Err(Error::Singular { row: k });
            }
            let row_end = n.min(k + lower + 1);
            let col_end = n.min(k + upper + 1);
            let (head, tail) = band.split_at_mut((k + 1) * width);
            let pivot_row = &head[k * width..];
            for i in k + 1..row_end {
                let off = (i - k - 1) * width;
                let lik_pos = off + k + lower - i;
                let l = tail[lik_pos] / pivot;
                tail[lik_pos] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..col_end {
                    tail[off + j + lower - i] -= l * pivot_row[j + lower - k];
                }
            }
        }
        Ok(Self {
            n,
            lower,
            upper,
            width,
            band,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, w, p, q) = (self.n, self.width, self.lower, self.upper);
        for i in 0..n {
            let start = i.saturating_sub(p);
            let row = &self.band[i * w..];
            let mut s = x[i];
            for j in start..i {
                s -= row[j + p - i] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let end = n.min(i + q + 1);
            let row = &self.band[i * w..];
            let mut s = x[i];
            for j in i + 1..end {
                s -= row[j + p - i] * x[j];
            }
            x[i] = s / row[p];
        }
    }

    /// Number of stored band entries for a matrix.
    pub fn storage_for(a: &CsrMatrix) -> usize {
        let (p, q) = a.bandwidths();
        a.n() * (p + q + 1)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB. Solves `a x = b` to relative residual `tol`
/// starting from the contents of `x`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.n();
    let dinv: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.diag(i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm2(&r) / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(it);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = dinv[i] * p[i];
        }
        a.mul_vec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            r[i] -= alpha * v[i];
            z[i] = dinv[i] * r[i];
        }
        a.mul_vec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] -= omega * t[i];
        }
        res = norm2(&r) / bnorm;
        if omega == 0.0 && res > tol {
            break;
        }
    }
    // Final check against the true residual.
    let mut ax = vec![0.0; n];
    a.mul_vec(x, &mut ax);
    let true_res = ax.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / bnorm;
    if true_res <= tol * 10.0 {
        Ok(max_iter)
    } else {
        Err(Error::LinearSolve {
            iterations: max_iter,
            residual: true_res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian plus a shift, nonsymmetric perturbation.
    fn tridiag(n: usize) -> CsrMatrix {
        let mut b = CsrBuilder::new();
        for i in 0..n {
            if i > 0 {
                b.push(i - 1, -1.2);
            }
            b.push(i, 2.5);
            if i + 1 < n {
                b.push(i + 1, -0.8);
            }
            b.finish_row();
        }
        b.build()
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = CsrBuilder::new();
        b.push(1, 2.0);
        b.push(0, 1.0);
        b.push(1, 3.0);
        b.finish_row();
        let m = b.build();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0), (1, 5.0)]);
    }

    #[test]
    fn band_lu_matches_product() {
        let a = tridiag(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; 50];
        a.mul_vec(&x_true, &mut b);
        let lu = BandLu::factor(&a).unwrap();
        lu.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(a.bandwidths(), (1, 1));
        assert!(a.is_m_matrix_pattern(0.0));
    }

    #[test]
    fn bicgstab_matches_direct() {
        let a = tridiag(200);
        let b: Vec<f64> = (0..200).map(|i| 1.0 + (i % 7) as f64).collect();
        let mut x_direct = b.clone();
        BandLu::factor(&a).unwrap().solve_in_place(&mut x_direct);
        let mut x = vec![0.0; 200];
        bicgstab(&a, &b, &mut x, 1e-12, 2000).unwrap();
        for (u, v) in x.iter().zip(&x_direct) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let mut b = CsrBuilder::new();
        b.push(0, 0.0);
        b.finish_row();
        assert!(matches!(BandLu::factor(&b.build()), Err(Error::Singular { row: 0 })));
    }
}
