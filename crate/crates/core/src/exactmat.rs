//! Exact rational dense matrices, plus the small floating-point mirror used
//! for power iteration on replica matrices.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Default cap on the dimension of a Kronecker product.
pub const KRONECKER_CAP: usize = 4096;

/// Default iteration limit for [`FloatMatrix::spectral_radius`].
pub const POWER_MAX_ITER: usize = 1_000_000;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p"` or `"p/q"` with arbitrary-size integers.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Converts with correct rounding for huge numerators and denominators.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Natural log of `|n|` for arbitrarily large integers.
pub fn bigint_ln_abs(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top = (n.abs() >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Dense square matrix with exact rational entries, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalMatrix {
    dim: usize,
    entries: Vec<Rational>,
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.dim)
            .map(|i| self.row(i).iter().map(format_rational).collect())
            .collect();
        write!(f, "RationalMatrix{rows:?}")
    }
}

impl RationalMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            entries: vec![Rational::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Rational::one();
        }
        m
    }

    /// Matrix with a single 1 at `(i, j)`.
    pub fn elementary(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.set(i, j, Rational::one());
        m
    }

    pub fn from_entries(dim: usize, entries: Vec<Rational>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    /// Builds from integer rows. Panics if the rows are not square.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let entries: Vec<Rational> = rows
            .iter()
            .flat_map(|r| {
                let r = r.as_ref();
                assert_eq!(r.len(), dim, "rows must form a square matrix");
                r.iter().map(|&x| rat(x))
            })
            .collect();
        Self::from_entries(dim, entries).expect("square")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.dim).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|x| !x.is_negative())
    }

    pub fn trace(&self) -> Rational {
        (0..self.dim).map(|i| self.get(i, i).clone()).sum()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|x| x * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.entries[i * n + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `A^k` by repeated squaring; `A^0 = I`.
    pub fn pow(&self, mut k: u32) -> Self {
        let mut result = Self::identity(self.dim);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base).expect("same dimension");
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).expect("same dimension");
            }
        }
        result
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|j| {
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| !x.is_zero())
                    .map(|(i, x)| x * self.get(i, j))
                    .sum()
            })
            .collect()
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn kronecker(&self, other: &Self) -> Result<Self> {
        self.kronecker_capped(other, KRONECKER_CAP)
    }

    /// Block `(i, j)` of the result is `self[i, j] * other`.
    pub fn kronecker_capped(&self, other: &Self, cap: usize) -> Result<Self> {
        let (n, p) = (self.dim, other.dim);
        let dim = n * p;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        let mut out = Self::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..p {
                    for l in 0..p {
                        out.entries[(i * p + k) * dim + j * p + l] = a * other.get(k, l);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Factors a rank-1 matrix as `alpha * beta^T`. `alpha` is the first
    /// nonzero column; `beta` is chosen so the product is exact.
    pub fn rank_one_factor(&self) -> Result<(Vec<Rational>, Vec<Rational>)> {
        let n = self.dim;
        let col = (0..n)
            .find(|&j| (0..n).any(|i| !self.get(i, j).is_zero()))
            .ok_or(Error::ZeroMatrix)?;
        let alpha = self.column(col);
        let pivot = alpha.iter().position(|x| !x.is_zero()).expect("nonzero");
        let beta: Vec<Rational> = self.row(pivot).iter().map(|x| x / &alpha[pivot]).collect();
        for i in 0..n {
            for j in 0..n {
                if &alpha[i] * &beta[j] != *self.get(i, j) {
                    return Err(Error::RankNotOne);
                }
            }
        }
        Ok((alpha, beta))
    }

    /// Exact Gauss-Jordan inverse.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for c in 0..n {
            let p = (c..n).find(|&r| !a.get(r, c).is_zero()).ok_or(Error::Singular)?;
            if p != c {
                a.swap_rows(p, c);
                inv.swap_rows(p, c);
            }
            let piv = a.get(c, c).clone();
            for j in 0..n {
                let x = a.get(c, j) / &piv;
                a.set(c, j, x);
                let y = inv.get(c, j) / &piv;
                inv.set(c, j, y);
            }
            for r in 0..n {
                if r == c || a.get(r, c).is_zero() {
                    continue;
                }
                let f = a.get(r, c).clone();
                for j in 0..n {
                    let x = a.get(r, j) - &f * a.get(c, j);
                    a.set(r, j, x);
                    let y = inv.get(r, j) - &f * inv.get(c, j);
                    inv.set(r, j, y);
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.dim {
            self.entries.swap(a * self.dim + j, b * self.dim + j);
        }
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| rational_to_f64(&self.row(i).iter().map(|x| x.abs()).sum()))
            .fold(0.0, f64::max)
    }

    pub fn to_float(&self) -> FloatMatrix {
        FloatMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(rational_to_f64).collect(),
        }
    }
}

/// Double-precision mirror of [`RationalMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl FloatMatrix {
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.dim;
        assert_eq!(n, other.dim);
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        Self { dim: n, entries: out }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        self.entries.iter_mut().for_each(|x| *x *= c);
    }

    pub fn inf_norm(&self) -> f64 {
        self.entries
            .chunks(self.dim)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (row, yi) in self.entries.chunks(self.dim).zip(y.iter_mut()) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn spectral_radius(&self, tol: f64) -> Result<f64> {
        self.spectral_radius_with(tol, POWER_MAX_ITER)
    }

    /// Dominant eigenvalue modulus of a nonnegative matrix by power
    /// iteration on `A + I` from the all-ones vector. The unit shift makes
    /// the Perron root strictly dominant when `A` is periodic.
    pub fn spectral_radius_with(&self, tol: f64, max_iter: usize) -> Result<f64> {
        if tol <= 0.0 {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        let n = self.dim;
        let mut x = vec![1.0; n];
        let mut y = vec![0.0; n];
        let mut prev = f64::INFINITY;
        for _ in 0..max_iter {
            self.mul_vec_into(&x, &mut y);
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi += xi;
            }
            let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm == 0.0 {
                return Ok(0.0);
            }
            // x is normalized to unit max-norm, so the growth factor is `norm`.
            let estimate = norm - 1.0;
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi = yi / norm;
            }
            if (estimate - prev).abs() < tol {
                return Ok(estimate);
            }
            prev = estimate;
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
        })
    }
}

/// Horner evaluation, coefficients highest degree first.
pub fn poly_eval(coeffs: &[i64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c as f64)
}

pub fn poly_derivative_eval(coeffs: &[i64], x: f64) -> f64 {
    let deg = coeffs.len().saturating_sub(1);
    coeffs[..deg]
        .iter()
        .enumerate()
        .fold(0.0, |acc, (i, &c)| acc * x + c as f64 * (deg - i) as f64)
}

/// `|p(x)| / |p'(x)|`: the Newton step, i.e. an estimate of the distance
/// from `x` to the nearest simple root.
pub fn poly_root_residual(coeffs: &[i64], x: f64) -> f64 {
    let p = poly_eval(coeffs, x);
    let dp = poly_derivative_eval(coeffs, x);
    if dp == 0.0 {
        return if p == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (p / dp).abs()
}
