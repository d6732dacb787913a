//! Small dense complex linear algebra: Householder QR, one-sided Jacobi SVD,
//! LU solves and minimum-norm least squares.

use crate::scalar::{czero, lit, Cx, Real};
use num_complex::Complex;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Cx<T>>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == czero() {
                    continue;
                }
                for j in 0..other.cols {
                    m[(i, j)] = m[(i, j)] + a * other[(k, j)];
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(czero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let mut m = Self::zeros(self.rows, end - start);
        for i in 0..self.rows {
            for j in start..end {
                m[(i, j - start)] = self[(i, j)];
            }
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Cx<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.cols + j]
    }
}

pub fn vec_norm<T: Real>(v: &[Cx<T>]) -> T {
    v.iter().fold(T::zero(), |s, x| s + x.norm_sqr()).sqrt()
}

pub fn vec_max_abs<T: Real>(v: &[Cx<T>]) -> T {
    v.iter().fold(T::zero(), |s, x| s.max(x.norm()))
}

/// Householder QR factorization `A = Q R` of an `m x n` matrix with `m >= n`.
#[derive(Clone, Debug)]
pub struct Qr<T: Real> {
    /// Householder vectors, one per column, each of length `m - k`.
    reflectors: Vec<Vec<Cx<T>>>,
    /// Phase factor applied to the reflection, `H = I - 2 v v^H`.
    r: CMatrix<T>,
    m: usize,
}

impl<T: Real> Qr<T> {
    pub fn new(a: &CMatrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        assert!(m >= n, "QR requires rows >= cols");
        let mut r = a.clone();
        let mut reflectors = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<Cx<T>> = (k..m).map(|i| r[(i, k)]).collect();
            let alpha = vec_norm(&v);
            if alpha == T::zero() {
                reflectors.push(vec![czero(); m - k]);
                continue;
            }
            let x0 = v[0];
            let phase = if x0.norm() == T::zero() {
                Complex::new(T::one(), T::zero())
            } else {
                x0 / x0.norm()
            };
            v[0] = x0 + phase * alpha;
            let vn = vec_norm(&v);
            for x in v.iter_mut() {
                *x = *x / vn;
            }
            for j in k..n {
                let mut dot = czero();
                for (i, vi) in v.iter().enumerate() {
                    dot = dot + vi.conj() * r[(k + i, j)];
                }
                for (i, vi) in v.iter().enumerate() {
                    r[(k + i, j)] = r[(k + i, j)] - *vi * dot * lit::<T>(2.0);
                }
            }
            reflectors.push(v);
        }
        Self { reflectors, r, m }
    }

    /// Applies `Q^H` to a vector of length `m`.
    pub fn apply_qh(&self, b: &mut [Cx<T>]) {
        for (k, v) in self.reflectors.iter().enumerate() {
            let mut dot = czero();
            for (i, vi) in v.iter().enumerate() {
                dot = dot + vi.conj() * b[k + i];
            }
            for (i, vi) in v.iter().enumerate() {
                b[k + i] = b[k + i] - *vi * dot * lit::<T>(2.0);
            }
        }
    }

    /// Applies `Q` to a vector of length `m`.
    pub fn apply_q(&self, b: &mut [Cx<T>]) {
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            let mut dot = czero();
            for (i, vi) in v.iter().enumerate() {
                dot = dot + vi.conj() * b[k + i];
            }
            for (i, vi) in v.iter().enumerate() {
                b[k + i] = b[k + i] - *vi * dot * lit::<T>(2.0);
            }
        }
    }

    /// Full `m x m` unitary factor.
    pub fn q_full(&self) -> CMatrix<T> {
        let mut q = CMatrix::zeros(self.m, self.m);
        for j in 0..self.m {
            let mut e = vec![czero(); self.m];
            e[j] = Complex::new(T::one(), T::zero());
            self.apply_q(&mut e);
            for i in 0..self.m {
                q[(i, j)] = e[i];
            }
        }
        q
    }

    /// Upper-triangular `n x n` factor.
    pub fn r(&self) -> CMatrix<T> {
        let n = self.r.cols();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                out[(i, j)] = self.r[(i, j)];
            }
        }
        out
    }
}

/// Solves `R^H y = d` for upper-triangular `R`.
pub fn solve_upper_adjoint<T: Real>(r: &CMatrix<T>, d: &[Cx<T>]) -> Option<Vec<Cx<T>>> {
    let n = r.rows();
    let mut y = vec![czero(); n];
    for i in 0..n {
        let mut s = d[i];
        for k in 0..i {
            s = s - r[(k, i)].conj() * y[k];
        }
        let piv = r[(i, i)].conj();
        if piv.norm() == T::zero() {
            return None;
        }
        y[i] = s / piv;
    }
    Some(y)
}

/// Thin singular value decomposition `A = U diag(sigma) V^H`.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: CMatrix<T>,
    pub sigma: Vec<T>,
    pub v: CMatrix<T>,
}

impl<T: Real> Svd<T> {
    /// One-sided Jacobi SVD. Singular values are sorted in decreasing order.
    pub fn new(a: &CMatrix<T>) -> Self {
        if a.rows() < a.cols() {
            let s = Self::new(&a.adjoint());
            return Self {
                u: s.v,
                sigma: s.sigma,
                v: s.u,
            };
        }
        let (m, n) = (a.rows(), a.cols());
        let mut w = a.clone();
        let mut v = CMatrix::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = czero::<T>();
                    for i in 0..m {
                        let wp = w[(i, p)];
                        let wq = w[(i, q)];
                        alpha = alpha + wp.norm_sqr();
                        beta = beta + wq.norm_sqr();
                        gamma = gamma + wp.conj() * wq;
                    }
                    let g = gamma.norm();
                    if g == T::zero() || g <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (lit::<T>(2.0) * g);
                    let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                    let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let wp = w[(i, p)];
                        let wq = w[(i, q)] * phase.conj();
                        w[(i, p)] = wp * c - wq * s;
                        w[(i, q)] = wp * s + wq * c;
                    }
                    for i in 0..n {
                        let vp = v[(i, p)];
                        let vq = v[(i, q)] * phase.conj();
                        v[(i, p)] = vp * c - vq * s;
                        v[(i, q)] = vp * s + vq * c;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sigma: Vec<T> = (0..n).map(|j| vec_norm(&w.column(j))).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));
        let mut u = CMatrix::zeros(m, n);
        let mut vs = CMatrix::zeros(n, n);
        for (new_j, &old_j) in order.iter().enumerate() {
            let s = sigma[old_j];
            for i in 0..m {
                u[(i, new_j)] = if s > T::zero() { w[(i, old_j)] / s } else { czero() };
            }
            for i in 0..n {
                vs[(i, new_j)] = v[(i, old_j)];
            }
        }
        sigma = order.iter().map(|&j| sigma[j]).collect();
        Self { u, sigma, v: vs }
    }

    /// Ratio of extreme singular values; infinite when rank deficient.
    pub fn condition(&self) -> T {
        match (self.sigma.first(), self.sigma.last()) {
            (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
            (Some(_), Some(_)) => T::infinity(),
            _ => T::one(),
        }
    }

    /// Numerical rank with relative cutoff `rcond`.
    pub fn rank(&self, rcond: T) -> usize {
        let hi = self.sigma.first().copied().unwrap_or(T::zero());
        self.sigma.iter().filter(|&&s| s > rcond * hi).count()
    }

    /// Minimum-norm least-squares solution with singular values below
    /// `rcond * sigma_max` discarded.
    pub fn solve(&self, b: &[Cx<T>], rcond: T) -> Vec<Cx<T>> {
        let n = self.v.rows();
        let k = self.sigma.len();
        let hi = self.sigma.first().copied().unwrap_or(T::zero());
        let mut x = vec![czero(); n];
        for j in 0..k {
            let s = self.sigma[j];
            if s <= rcond * hi || s == T::zero() {
                continue;
            }
            let mut c = czero();
            for i in 0..self.u.rows() {
                c = c + self.u[(i, j)].conj() * b[i];
            }
            let c = c / s;
            for i in 0..n {
                x[i] = x[i] + self.v[(i, j)] * c;
            }
        }
        x
    }
}

/// Solves a square system by LU with partial pivoting.
pub fn lu_solve<T: Real>(a: &CMatrix<T>, b: &[Cx<T>]) -> Option<Vec<Cx<T>>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (piv, pval) = (k..n)
            .map(|i| (i, m[(i, k)].norm()))
            .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval == T::zero() {
            return None;
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == czero() {
                continue;
            }
            for j in k..n {
                m[(i, j)] = m[(i, j)] - f * m[(k, j)];
            }
            x[i] = x[i] - f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s = s - m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Some(x)
}
