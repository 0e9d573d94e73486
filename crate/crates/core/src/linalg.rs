//! Dense complex matrices and the few factorizations the equalizers need.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Dense complex column vector.
pub type CVector<T> = Vec<Complex<T>>;

/// Dense row-major complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
                context: "row-major matrix entries",
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
                context: "ragged matrix rows",
            });
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    /// Column vector as an `n x 1` matrix.
    pub fn column(v: &[Complex<T>]) -> Result<Self> {
        Self::from_row_major(v.len(), 1, v.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> CVector<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
                context: "matrix product inner dimension",
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Result<CVector<T>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
                context: "matrix-vector product",
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    /// `self^H v` without forming the conjugate transpose.
    pub fn hermitian_matvec(&self, v: &[Complex<T>]) -> Result<CVector<T>> {
        if self.rows != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: v.len(),
                context: "hermitian matrix-vector product",
            });
        }
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * vr;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::InvalidDimensions(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn frobenius_norm_sqr(&self) -> T {
        norm_sqr(&self.data)
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_norm_sqr().sqrt()
    }

    /// Converts the scalar type (e.g. `f64` to `f32`).
    pub fn cast<S: Real>(&self) -> CMatrix<S> {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(S::of(z.re.to_f64_lossy()), S::of(z.im.to_f64_lossy())))
                .collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Unconjugated inner product `sum a_i b_i`.
#[inline]
pub fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (&x, &y)| acc + x * y)
}

/// Hermitian inner product `a^H b`.
#[inline]
pub fn dot_h<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (&x, &y)| acc + x.conj() * y)
}

#[inline]
pub fn norm_sqr<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// Cholesky factor `G = L L^H` of a Hermitian positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    lower: CMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors `g`. A pivot below `n * eps * max_diag` is treated as
    /// singular and reported together with a condition estimate.
    pub fn new(g: &CMatrix<T>) -> Result<Self> {
        let n = g.rows();
        if g.cols() != n {
            return Err(Error::InvalidDimensions(format!("Cholesky of {}x{}", n, g.cols())));
        }
        let max_diag = (0..n).fold(T::zero(), |m, i| m.max(g[(i, i)].re));
        let floor = T::of(n.max(1) as f64) * T::epsilon() * max_diag;
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = g[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > floor) {
                return Err(Error::Singular {
                    condition: hermitian_condition_estimate(g),
                });
            }
            let d = d.sqrt();
            l[(j, j)] = Complex::new(d, T::zero());
            for i in j + 1..n {
                let mut s = g[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { lower: l })
    }

    /// Solves `G x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[Complex<T>]) -> CVector<T> {
        let l = &self.lower;
        let n = l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        y
    }

    /// Solves `G X = B` column by column.
    pub fn solve(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve_vec(&b.col(c));
            for (r, v) in x.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// Largest eigenvalue of a Hermitian positive-semidefinite matrix by power
/// iteration, stopping once the relative change drops below `tol`.
pub fn power_iteration<T: Real>(g: &CMatrix<T>, max_iters: usize, tol: T) -> T {
    let n = g.rows();
    if n == 0 {
        return T::zero();
    }
    let mut v: CVector<T> = (0..n)
        .map(|i| Complex::new(T::one() + T::of(i as f64) * T::of(1e-3), T::zero()))
        .collect();
    let mut lambda = T::zero();
    for _ in 0..max_iters.max(1) {
        let nv = norm_sqr(&v).sqrt();
        if nv == T::zero() {
            return T::zero();
        }
        v.iter_mut().for_each(|z| *z = *z / nv);
        let w = g.matvec(&v).expect("square matrix");
        let next = dot_h(&v, &w).re;
        v = w;
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Spectral condition estimate `lambda_max / lambda_min` of a Hermitian PSD
/// matrix via Jacobi eigenvalue sweeps on its real embedding.
pub fn hermitian_condition_estimate<T: Real>(g: &CMatrix<T>) -> f64 {
    let eig = hermitian_eigenvalues(g);
    let max = eig.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues of a Hermitian matrix (cyclic Jacobi on the `2n x 2n` real
/// symmetric embedding; each eigenvalue appears twice there and is
/// returned once).
pub fn hermitian_eigenvalues<T: Real>(g: &CMatrix<T>) -> Vec<f64> {
    let n = g.rows();
    let m = 2 * n;
    let mut a = vec![0.0_f64; m * m];
    for r in 0..n {
        for c in 0..n {
            let z = g[(r, c)];
            let (re, im) = (z.re.to_f64_lossy(), z.im.to_f64_lossy());
            a[r * m + c] = re;
            a[(r + n) * m + c + n] = re;
            a[r * m + c + n] = -im;
            a[(r + n) * m + c] = im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j] * a[i * m + j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig.into_iter().step_by(2).collect()
}
