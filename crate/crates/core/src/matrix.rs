//! Dense complex matrices and the spectral toolkit everything else is built on.
//!
//! Conventions used throughout the crate:
//!
//! * storage is row-major;
//! * `kron(a, b)` has entry `a[i][j] * b[k][l]` at row `i * b.rows() + k`,
//!   column `j * b.cols() + l`, so the left factor is the "outer" index;
//! * the Frobenius inner product is `<x, y> = tr(x* y)`, and gradients of real
//!   functions of complex matrices are reported as `G = df/dRe + i df/dIm`,
//!   so that `df = Re <G, dX>`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Thin singular value decomposition `m = u * diag(sigma) * v*`.
///
/// `u` is `rows x k`, `v` is `cols x k` with `k = min(rows, cols)`, both with
/// orthonormal columns; `sigma` is sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for j in 0..us.cols {
            for i in 0..us.rows {
                us[(i, j)] *= self.sigma[j];
            }
        }
        &us * &self.v.adjoint()
    }

    /// `u * diag(w) * v*` for an arbitrary weight vector.
    pub fn recombine(&self, w: &[f64]) -> ComplexMatrix {
        let mut us = self.u.clone();
        for j in 0..us.cols {
            for i in 0..us.rows {
                us[(i, j)] *= w[j];
            }
        }
        &us * &self.v.adjoint()
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::domain("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag_real(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Matrix unit `e_{ij}` of size `rows x cols`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    /// Entries i.i.d. standard complex Gaussian (real and imaginary parts N(0, 1/2)).
    pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_fn(rows, cols, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * s, im * s)
        })
    }

    /// Haar-ish random unitary from the QR of a Gaussian matrix.
    pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::random_gaussian(n, n, rng).orthonormalize_columns()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Entrywise complex conjugate.
    pub fn conj_entrywise(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `tr(self* other)`
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.shape(), other.shape(), "inner product shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Kronecker product, index convention `(i,k),(j,l)` row-major (see module docs).
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = other.shape();
        let mut out = Self::zeros(self.rows * r2, self.cols * c2);
        let oc = self.cols * c2;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..r2 {
                    let row = (i * r2 + k) * oc + j * c2;
                    for l in 0..c2 {
                        out.data[row + l] += a * other.data[k * c2 + l];
                    }
                }
            }
        }
        out
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        out.set_block(0, 0, self);
        out.set_block(self.rows, self.cols, other);
        out
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Trace over the right tensor factor: `(m*d) x (m*d) -> m x m`.
    pub fn partial_trace_right(&self, d: usize) -> Self {
        assert!(self.is_square() && self.rows % d == 0, "partial trace shape");
        let m = self.rows / d;
        Self::from_fn(m, m, |i, j| (0..d).map(|k| self[(i * d + k, j * d + k)]).sum())
    }

    /// Trace over the left tensor factor: `(m*d) x (m*d) -> d x d`.
    pub fn partial_trace_left(&self, m: usize) -> Self {
        assert!(self.is_square() && self.rows % m == 0, "partial trace shape");
        let d = self.rows / m;
        Self::from_fn(d, d, |k, l| (0..m).map(|i| self[(i * d + k, i * d + l)]).sum())
    }

    /// Gram-Schmidt (twice) on the columns; rank-deficient columns are replaced by
    /// completions from the standard basis.
    pub fn orthonormalize_columns(&self) -> Self {
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(self.cols);
        for j in 0..self.cols {
            let v: Vec<C64> = (0..self.rows).map(|i| self[(i, j)]).collect();
            let v = orthonormal_against(&cols, v).unwrap_or_else(|| {
                (0..self.rows)
                    .find_map(|e| {
                        let mut unit = vec![ZERO; self.rows];
                        unit[e] = ONE;
                        orthonormal_against(&cols, unit)
                    })
                    .expect("more columns than rows")
            });
            cols.push(v);
        }
        Self::from_fn(self.rows, self.cols, |i, j| cols[j][i])
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::shape("inverse of a non-square matrix"));
        }
        let n = self.rows;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let (piv, pval) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold((col, -1.0), |best, x| if x.1 > best.1 { x } else { best });
            if pval <= 1e-14 * scale {
                return Err(Error::Numerical { what: "singular matrix".into(), residual: pval });
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let p = ONE / a[(col, col)];
            for j in 0..n {
                a[(col, j)] *= p;
                inv[(col, j)] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let (x, y) = (a[(col, j)], inv[(col, j)]);
                    a[(r, j)] -= f * x;
                    inv[(r, j)] -= f * y;
                }
            }
        }
        Ok(inv)
    }

    /// Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
    ///
    /// Sweeps are cyclic in a fixed order, so results are bit-reproducible.
    pub fn svd(&self) -> Result<Svd> {
        if self.rows < self.cols {
            let t = self.adjoint().svd()?;
            return Ok(Svd { u: t.v, sigma: t.sigma, v: t.u });
        }
        let (m, n) = self.shape();
        // Column-major working copies: a holds the columns of self, v the right vectors.
        let mut a: Vec<Vec<C64>> = (0..n).map(|j| (0..m).map(|i| self[(i, j)]).collect()).collect();
        let mut v: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let mut c = vec![ZERO; n];
                c[j] = ONE;
                c
            })
            .collect();
        let eps = 1e-15_f64.max(m as f64 * f64::EPSILON);
        // Columns below this energy are numerically zero and are left alone.
        let negligible = (f64::EPSILON * self.frobenius_norm()).powi(2);
        let mut converged = n < 2;
        let mut worst = 0.0;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if converged {
                break;
            }
            let mut rotated = false;
            worst = 0.0f64;
            for j in 0..n {
                for k in (j + 1)..n {
                    let alpha: f64 = a[j].iter().map(|z| z.norm_sqr()).sum();
                    let beta: f64 = a[k].iter().map(|z| z.norm_sqr()).sum();
                    let gamma: C64 = a[j].iter().zip(&a[k]).map(|(x, y)| x.conj() * y).sum();
                    let g = gamma.norm();
                    let scale = alpha.sqrt() * beta.sqrt();
                    if g == 0.0 || alpha <= negligible || beta <= negligible || g <= eps * scale {
                        continue;
                    }
                    worst = worst.max(g / scale);
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    let pc = phase.conj();
                    for i in 0..m {
                        let x = a[j][i];
                        let y = a[k][i] * pc;
                        a[j][i] = x * c - y * s;
                        a[k][i] = x * s + y * c;
                    }
                    for i in 0..n {
                        let x = v[j][i];
                        let y = v[k][i] * pc;
                        v[j][i] = x * c - y * s;
                        v[k][i] = x * s + y * c;
                    }
                }
            }
            converged = !rotated;
        }
        if !converged {
            return Err(Error::Numerical { what: "Jacobi SVD did not converge".into(), residual: worst });
        }
        let mut sig: Vec<(f64, usize)> = a
            .iter()
            .enumerate()
            .map(|(j, c)| (c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), j))
            .collect();
        sig.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
        let smax = sig.first().map(|s| s.0).unwrap_or(0.0);
        let tiny = smax * 1e-300_f64.max(f64::EPSILON * 1e-3) + f64::MIN_POSITIVE;
        let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(n);
        for &(s, j) in &sig {
            let col = if s > tiny {
                let c: Vec<C64> = a[j].iter().map(|z| z / s).collect();
                // Re-orthogonalize to protect against accumulated drift in tiny columns.
                orthonormal_against(&ucols, c)
            } else {
                None
            };
            let col = col.unwrap_or_else(|| {
                (0..m)
                    .find_map(|e| {
                        let mut unit = vec![ZERO; m];
                        unit[e] = ONE;
                        orthonormal_against(&ucols, unit)
                    })
                    .expect("completion exists")
            });
            ucols.push(col);
        }
        let u = Self::from_fn(m, n, |i, jj| ucols[jj][i]);
        let vm = Self::from_fn(n, n, |i, jj| v[sig[jj].1][i]);
        Ok(Svd { u, sigma: sig.iter().map(|s| s.0).collect(), v: vm })
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(self.svd()?.sigma)
    }

    pub fn operator_norm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.svd().map(|s| s.sigma[0]).unwrap_or(f64::NAN)
    }

    /// Schatten p-norm; `p = f64::INFINITY` gives the operator norm.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        if self.data.is_empty() {
            return Ok(0.0);
        }
        Ok(schatten_of_values(&self.svd()?.sigma, p))
    }

    /// Polar decomposition `m = w h` with `w` a partial isometry and `h = |m|`.
    pub fn polar(&self) -> Result<(Self, Self)> {
        let s = self.svd()?;
        let k = s.sigma.len();
        let smax = s.sigma.first().copied().unwrap_or(0.0);
        let support: Vec<f64> =
            s.sigma.iter().map(|&x| if x > 1e-14 * smax.max(f64::MIN_POSITIVE) { 1.0 } else { 0.0 }).collect();
        let w = s.recombine(&support);
        let mut vs = s.v.clone();
        for j in 0..k {
            for i in 0..vs.rows {
                vs[(i, j)] *= s.sigma[j];
            }
        }
        let h = &vs * &s.v.adjoint();
        Ok((w, h))
    }

    /// `h^alpha` for a Hermitian positive semidefinite `h` (negative eigenvalues
    /// from rounding are clamped to zero; zero eigenvalues stay zero for `alpha > 0`).
    pub fn psd_power(&self, alpha: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::shape("psd_power of a non-square matrix"));
        }
        let s = self.svd()?;
        let w: Vec<f64> = s.sigma.iter().map(|&x| if x > 0.0 { x.powf(alpha) } else { 0.0 }).collect();
        let mut vw = s.v.clone();
        for j in 0..w.len() {
            for i in 0..vw.rows {
                vw[(i, j)] *= w[j];
            }
        }
        Ok(&vw * &s.v.adjoint())
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.shape() == other.shape()
            && self.data.iter().zip(&other.data).all(|(a, b)| (a - b).norm() <= tol)
    }
}

fn orthonormal_against(basis: &[Vec<C64>], mut v: Vec<C64>) -> Option<Vec<C64>> {
    let n0: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
    }
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n <= 1e-10 * n0 {
        return None;
    }
    Some(v.into_iter().map(|z| z / n).collect())
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::domain(format!("Schatten exponent must be >= 1, got {p}")));
    }
    Ok(())
}

/// `(sum sigma_i^p)^(1/p)`, evaluated with scaling by the largest value.
pub fn schatten_of_values(sigma: &[f64], p: f64) -> f64 {
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return smax;
    }
    smax * sigma.iter().map(|&s| (s / smax).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Schatten r-norm together with its gradient `G` (so `d|X|_r = Re <G, dX>`).
///
/// For `r = inf` the gradient is the subgradient `u_1 v_1*`. Large finite `r`
/// is the smooth surrogate used by the optimizers.
pub fn schatten_with_grad(x: &ComplexMatrix, r: f64) -> Result<(f64, ComplexMatrix)> {
    let s = x.svd()?;
    let smax = s.sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok((0.0, ComplexMatrix::zeros(x.rows(), x.cols())));
    }
    if r.is_infinite() {
        let mut w = vec![0.0; s.sigma.len()];
        w[0] = 1.0;
        return Ok((smax, s.recombine(&w)));
    }
    let val = schatten_of_values(&s.sigma, r);
    let w: Vec<f64> = s.sigma.iter().map(|&sj| (sj / val).powf(r - 1.0)).collect();
    Ok((val, s.recombine(&w)))
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Free-function forms matching the operation names used in the docs.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    m.svd()
}

pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    m.schatten_norm(p)
}

pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    m.operator_norm()
}

pub fn polar(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    m.polar()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

pub fn conj_entrywise(m: &ComplexMatrix) -> ComplexMatrix {
    m.conj_entrywise()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_svd() {
        let m = ComplexMatrix::diag_real(&[3.0, 4.0]);
        let s = m.svd().unwrap();
        assert_eq!(s.sigma, vec![4.0, 3.0]);
        assert!(s.reconstruct().approx_eq(&m, 1e-14));
    }

    #[test]
    fn zero_matrix_svd_is_orthonormal() {
        let m = ComplexMatrix::zeros(2, 3);
        let s = m.svd().unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.0]);
        let utu = &s.u.adjoint() * &s.u;
        assert!(utu.approx_eq(&ComplexMatrix::identity(2), 1e-14));
        let vtv = &s.v.adjoint() * &s.v;
        assert!(vtv.approx_eq(&ComplexMatrix::identity(2), 1e-14));
    }

    #[test]
    fn random_svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(r, c) in &[(3, 3), (5, 2), (2, 6), (8, 8)] {
            let m = ComplexMatrix::random_gaussian(r, c, &mut rng);
            let s = m.svd().unwrap();
            let scale = s.sigma[0];
            assert!(s.reconstruct().approx_eq(&m, 1e-12 * scale));
            let k = r.min(c);
            assert!((&s.u.adjoint() * &s.u).approx_eq(&ComplexMatrix::identity(k), 1e-12));
            assert!((&s.v.adjoint() * &s.v).approx_eq(&ComplexMatrix::identity(k), 1e-12));
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = ComplexMatrix::random_gaussian(4, 1, &mut rng);
        let b = ComplexMatrix::random_gaussian(1, 4, &mut rng);
        let m = &a * &b;
        let s = m.svd().unwrap();
        assert!(s.sigma[1] < 1e-12 * s.sigma[0]);
        assert!(s.reconstruct().approx_eq(&m, 1e-12 * s.sigma[0]));
        assert!((&s.u.adjoint() * &s.u).approx_eq(&ComplexMatrix::identity(4), 1e-10));
    }

    #[test]
    fn schatten_basic_values() {
        let m = ComplexMatrix::diag_real(&[3.0, 4.0]);
        assert!((m.schatten_norm(2.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((ComplexMatrix::identity(3).schatten_norm(1.0).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(m.schatten_norm(f64::INFINITY).unwrap(), 4.0);
        assert!(matches!(m.schatten_norm(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn polar_of_negative_scalar() {
        let m = ComplexMatrix::from_real(1, 1, &[-2.0]).unwrap();
        let (w, h) = m.polar().unwrap();
        assert!((w[(0, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!((h[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn polar_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ComplexMatrix::random_gaussian(4, 4, &mut rng);
        let (w, h) = m.polar().unwrap();
        assert!((&w * &h).approx_eq(&m, 1e-12 * m.operator_norm()));
        assert!(h.approx_eq(&h.adjoint(), 1e-13));
    }

    #[test]
    fn kron_identity_and_convention() {
        let k = ComplexMatrix::identity(2).kron(&ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(6));
        let a = ComplexMatrix::unit(2, 2, 0, 1);
        let b = ComplexMatrix::unit(3, 3, 2, 0);
        let k = a.kron(&b);
        // (i,k),(j,l) = (0,2),(1,0) -> row 2, col 3
        assert_eq!(k[(2, 3)], ONE);
        assert_eq!(k.data().iter().filter(|z| **z != ZERO).count(), 1);
    }

    #[test]
    fn partial_traces_of_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = ComplexMatrix::random_gaussian(2, 2, &mut rng);
        let b = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        let k = a.kron(&b);
        assert!(k.partial_trace_right(3).approx_eq(&a.scale(b.trace()), 1e-12));
        assert!(k.partial_trace_left(2).approx_eq(&b.scale(a.trace()), 1e-12));
    }

    #[test]
    fn inverse_round_trip_and_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ComplexMatrix::random_gaussian(4, 4, &mut rng);
        let ai = a.inverse().unwrap();
        assert!((&a * &ai).approx_eq(&ComplexMatrix::identity(4), 1e-12));
        assert!(ComplexMatrix::zeros(2, 2).inverse().is_err());
    }

    #[test]
    fn new_rejects_bad_input() {
        assert!(ComplexMatrix::new(2, 2, vec![ONE; 3]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![C64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn schatten_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        let d = ComplexMatrix::random_gaussian(3, 3, &mut rng);
        for &r in &[1.0, 2.0, 3.5, 16.0] {
            let (_, g) = schatten_with_grad(&x, r).unwrap();
            let h = 1e-6;
            let mut xp = x.clone();
            xp.axpy(C64::new(h, 0.0), &d);
            let mut xm = x.clone();
            xm.axpy(C64::new(-h, 0.0), &d);
            let fd = (xp.schatten_norm(r).unwrap() - xm.schatten_norm(r).unwrap()) / (2.0 * h);
            let an = g.inner(&d).re;
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "r={r}: {fd} vs {an}");
        }
    }
}
