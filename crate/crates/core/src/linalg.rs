//! Small dense linear algebra: row-major matrices, a one-sided Jacobi SVD,
//! the Moore-Penrose generalized inverse, and rank/condition estimation.
//!
//! Everything here takes its inputs by reference and returns new values.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative singular-value cutoff used when the caller does not supply one.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns<C: AsRef<[T]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} entries, expected {rows}",
                    c.len()
                )));
            }
            for (i, &x) in c.iter().enumerate() {
                m.data[i * cols + j] = x;
            }
        }
        Self::new(rows, cols, m.data)
    }

    /// Converts an `f64` matrix into this scalar type.
    pub fn from_f64(m: &Mat<f64>) -> Result<Self> {
        Self::new(m.rows, m.cols, m.data.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.as_f64()).collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, x: T) {
        self.data[i * self.cols + j] = x;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Returns a copy with entry `(i, j)` replaced.
    pub fn with_entry(&self, i: usize, j: usize, x: T) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite { row: i, col: j });
        }
        let mut m = self.clone();
        m.set(i, j, x);
        Ok(m)
    }

    /// Copies the given columns, in order, into a new matrix.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, columns.len());
        for (jj, &j) in columns.iter().enumerate() {
            for i in 0..self.rows {
                m.set(i, jj, self.get(i, j));
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> T {
        // scaled sum of squares keeps large entries from overflowing f32
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let ss = self
            .data
            .iter()
            .fold(T::zero(), |acc, &x| acc + (x / scale) * (x / scale));
        scale * ss.sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        Self::new(self.rows, self.cols, self.data.iter().map(|&x| x * s).collect())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        matmul(self, other)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let y: Vec<T> = (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        Ok(y)
    }
}

impl<T: Scalar> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for j in 0..self.cols {
                write!(f, " {:>12.6?}", self.data[i * self.cols + j])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Standard matrix product `a * b`.
pub fn matmul<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c: Mat<T> = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == T::zero() {
                continue;
            }
            for j in 0..b.cols {
                let v = c.get(i, j) + aik * b.get(k, j);
                c.set(i, j, v);
            }
        }
    }
    if let Some(k) = c.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            row: k / c.cols.max(1),
            col: k % c.cols.max(1),
        });
    }
    Ok(c)
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
///
/// For an `m x n` input with `k = min(m, n)`: `u` is `m x k`, `v` is `n x k`,
/// and `singular` holds `k` values in descending order. Columns of `u` that
/// belong to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Mat<T>,
    pub singular: Vec<T>,
    pub v: Mat<T>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Scalar>(a: &Mat<T>) -> Result<Svd<T>> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::DimensionMismatch("SVD of an empty matrix".into()));
    }
    if a.rows < a.cols {
        let t = jacobi_tall(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular: t.singular,
            v: t.u,
        });
    }
    jacobi_tall(a)
}

fn jacobi_tall<T: Scalar>(a: &Mat<T>) -> Result<Svd<T>> {
    let (m, n) = a.shape();
    // column-major working copy so column rotations touch contiguous memory
    let mut w: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    // columns at rounding-noise level cannot be orthogonalized further
    let noise = T::from_usize(n).expect("column count fits scalar") * eps * a.frobenius_norm();
    let floor = noise * noise;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if alpha <= floor || beta <= floor || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<(T, usize)> = w.iter().map(|c| (norm(c), 0)).collect();
    for (j, o) in order.iter_mut().enumerate() {
        o.1 = j;
    }
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite singular values"));

    let mut u = Mat::zeros(m, n);
    let mut vm = Mat::zeros(n, n);
    let mut singular = Vec::with_capacity(n);
    for (jj, &(sigma, j)) in order.iter().enumerate() {
        singular.push(sigma);
        if sigma > T::zero() {
            for (i, &x) in w[j].iter().enumerate() {
                u.set(i, jj, x / sigma);
            }
        }
        for (i, &x) in v[j].iter().enumerate() {
            vm.set(i, jj, x);
        }
    }
    Ok(Svd { u, singular, v: vm })
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Scalar>(a: &[T]) -> T {
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    scale
        * a.iter()
            .fold(T::zero(), |acc, &x| acc + (x / scale) * (x / scale))
            .sqrt()
}

/// Moore-Penrose pseudo-inverse via SVD.
///
/// Singular values at or below `rank_tol * s_max` are treated as zero.
pub fn generalized_inverse<T: Scalar>(a: &Mat<T>, rank_tol: T) -> Result<Mat<T>> {
    check_tol(rank_tol)?;
    let Svd { u, singular, v } = svd(a)?;
    let cutoff = rank_tol * singular[0];
    let (m, n) = a.shape();
    let mut pinv = Mat::zeros(n, m);
    for (k, &sigma) in singular.iter().enumerate() {
        if sigma <= cutoff || sigma == T::zero() {
            continue;
        }
        let inv = T::one() / sigma;
        for i in 0..n {
            let vik = v.get(i, k) * inv;
            for j in 0..m {
                let x = pinv.get(i, j) + vik * u.get(j, k);
                pinv.set(i, j, x);
            }
        }
    }
    Ok(pinv)
}

/// Numerical rank and condition number of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCondition<T> {
    pub rank: usize,
    /// Largest over smallest retained singular value; infinite when the
    /// rank is zero.
    pub condition: T,
}

pub fn rank_and_condition<T: Scalar>(a: &Mat<T>, rank_tol: T) -> Result<RankCondition<T>> {
    check_tol(rank_tol)?;
    let s = svd(a)?.singular;
    let smax = s[0];
    if smax == T::zero() {
        return Ok(RankCondition {
            rank: 0,
            condition: T::infinity(),
        });
    }
    let cutoff = rank_tol * smax;
    let retained: Vec<T> = s.into_iter().filter(|&x| x > cutoff).collect();
    Ok(RankCondition {
        rank: retained.len(),
        condition: smax / *retained.last().expect("s_max is retained"),
    })
}

fn check_tol<T: Scalar>(rank_tol: T) -> Result<()> {
    if !(rank_tol > T::zero()) || !rank_tol.is_finite() {
        return Err(Error::DimensionMismatch(format!(
            "rank tolerance must be positive and finite, got {rank_tol}"
        )));
    }
    Ok(())
}
