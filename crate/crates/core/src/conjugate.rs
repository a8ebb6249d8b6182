//! Rank-one sentinel factorization `D0^q = alpha beta^T` and the similarity
//! transform that sends the sentinel power to the elementary matrix `E00`.
//!
//! Corner values `D'_w(0,0)` are computed as `beta^T D_w alpha` with the
//! original matrices; the conjugated matrices are only needed to cross-check
//! published data.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exactmat::{format_rational, Rational, RationalMatrix};
use crate::words::BinaryWord;

/// `D0^q = alpha beta^T` with `beta^T alpha = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentinelFactorization {
    q: u32,
    alpha: Vec<Rational>,
    beta: Vec<Rational>,
    d0: RationalMatrix,
    d1: RationalMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationResult {
    pub q_matrix: RationalMatrix,
    pub q_inverse: RationalMatrix,
    pub d0_prime: RationalMatrix,
    pub d1_prime: RationalMatrix,
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SentinelFactorization {
    pub fn new(d0: &RationalMatrix, d1: &RationalMatrix, q: u32) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        if d0.dim() != d1.dim() {
            return Err(Error::DimensionMismatch {
                left: d0.dim(),
                right: d1.dim(),
            });
        }
        let power = d0.pow(q);
        let (alpha, mut beta) = power.rank_one_factor()?;
        let trace = power.trace();
        debug_assert_eq!(trace, dot(&beta, &alpha));
        if trace.is_zero() {
            return Err(Error::NotIdempotentSimilar {
                trace: format_rational(&trace),
            });
        }
        for b in beta.iter_mut() {
            *b /= &trace;
        }
        if !trace.is_one() {
            return Err(Error::NotIdempotentSimilar {
                trace: format_rational(&trace),
            });
        }
        Ok(Self {
            q,
            alpha,
            beta,
            d0: d0.clone(),
            d1: d1.clone(),
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.d0.dim()
    }

    pub fn alpha(&self) -> &[Rational] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Rational] {
        &self.beta
    }

    pub fn d0(&self) -> &RationalMatrix {
        &self.d0
    }

    pub fn d1(&self) -> &RationalMatrix {
        &self.d1
    }

    pub fn digit_matrix(&self, bit: bool) -> &RationalMatrix {
        if bit {
            &self.d1
        } else {
            &self.d0
        }
    }

    /// Exact `beta^T D_w alpha`.
    pub fn corner_value(&self, w: &BinaryWord) -> Rational {
        let mut row = self.beta.clone();
        for bit in w.iter() {
            row = self.digit_matrix(bit).left_mul_vec(&row);
        }
        dot(&row, &self.alpha)
    }

    /// `Q = [alpha | N]` with `N` the reduced-row-echelon null-space basis of
    /// `beta^T`.
    pub fn conjugation(&self) -> Result<ConjugationResult> {
        let basis = null_space_basis(&self.beta);
        self.conjugation_with_basis(&basis)
    }

    /// Same as [`conjugation`](Self::conjugation) with a caller-supplied
    /// basis of the null space of `beta^T`.
    pub fn conjugation_with_basis(&self, basis: &[Vec<Rational>]) -> Result<ConjugationResult> {
        let m = self.dim();
        if basis.len() + 1 != m {
            return Err(Error::DimensionMismatch {
                left: m - 1,
                right: basis.len(),
            });
        }
        if basis.iter().any(|v| !dot(v, &self.beta).is_zero()) {
            return Err(Error::InvalidArgument(
                "basis vector not orthogonal to beta".into(),
            ));
        }
        let mut q = RationalMatrix::zeros(m);
        for i in 0..m {
            q.set(i, 0, self.alpha[i].clone());
            for (c, v) in basis.iter().enumerate() {
                q.set(i, c + 1, v[i].clone());
            }
        }
        let q_inverse = q.inverse()?;
        let conj = |a: &RationalMatrix| -> Result<RationalMatrix> { q_inverse.mul(a)?.mul(&q) };
        let sentinel = conj(&self.d0.pow(self.q))?;
        if sentinel != RationalMatrix::elementary(m, 0, 0) {
            return Err(Error::InvariantViolation(
                "Q^-1 D0^q Q is not E00".into(),
            ));
        }
        Ok(ConjugationResult {
            d0_prime: conj(&self.d0)?,
            d1_prime: conj(&self.d1)?,
            q_matrix: q,
            q_inverse,
        })
    }
}

/// Basis of `{x : beta . x = 0}`: for each non-pivot coordinate `j`, the
/// vector `e_j - (beta_j / beta_p) e_p` where `p` is the first nonzero entry.
pub fn null_space_basis(beta: &[Rational]) -> Vec<Vec<Rational>> {
    let m = beta.len();
    let p = beta
        .iter()
        .position(|x| !x.is_zero())
        .expect("beta is nonzero");
    (0..m)
        .filter(|&j| j != p)
        .map(|j| {
            let mut v = vec![Rational::zero(); m];
            v[j] = Rational::one();
            v[p] = -(&beta[j] / &beta[p]);
            v
        })
        .collect()
}

/// Corner entry of a product of reference matrices, `(M_w)(0,0)`.
pub fn reference_corner(m0: &RationalMatrix, m1: &RationalMatrix, w: &BinaryWord) -> Rational {
    let mut row = vec![Rational::zero(); m0.dim()];
    row[0] = Rational::one();
    for bit in w.iter() {
        row = if bit { m1 } else { m0 }.left_mul_vec(&row);
    }
    row[0].clone()
}
