//! Recovers `count(n) = u D_{z(n)} v`, where `z(n)` spells the binary digits
//! of `n` and `D_{z(n)}` is the matching product of digit matrices.
//!
//! With `D0^q = alpha beta^T`, `beta^T` is a left eigenvector of `D0` with
//! eigenvalue 1 and `alpha` a right one. Reading digits least significant
//! first, appending a trailing zero multiplies on the left, so `u` is taken
//! proportional to `beta` and `v` is solved for. Most significant first is
//! the mirror image.

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::gf2::{gf2_row_counts, Gf2Poly};
use crate::catalog::MatrixFamily;
use crate::conjugate::{dot, SentinelFactorization};
use crate::error::{Error, Result};
use crate::exactmat::{format_rational, Rational, RationalMatrix};

/// Largest `j` for which [`LinearRepresentation::counts_below_pow2`]
/// enumerates `[0, 2^j)`.
pub const COUNTS_MAX_J: u32 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DigitOrder {
    LsbFirst,
    MsbFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRepresentation {
    pub u: Vec<Rational>,
    pub v: Vec<Rational>,
    pub order: DigitOrder,
    /// Every `n` below this value was checked against the counts.
    pub validated: u64,
    d0: RationalMatrix,
    d1: RationalMatrix,
}

/// Binary digits of `n`, least significant first, without leading zeros.
fn digits_lsb(n: u64) -> Vec<bool> {
    let k = u64::BITS - n.leading_zeros();
    (0..k).map(|i| n >> i & 1 == 1).collect()
}

impl LinearRepresentation {
    fn digit(&self, bit: bool) -> &RationalMatrix {
        if bit {
            &self.d1
        } else {
            &self.d0
        }
    }

    /// Exact `u D_{z(n)} v`.
    pub fn count(&self, n: u64) -> Rational {
        let mut d = digits_lsb(n);
        if self.order == DigitOrder::MsbFirst {
            d.reverse();
        }
        let row = d.iter().fold(self.u.clone(), |row, &b| self.digit(b).left_mul_vec(&row));
        dot(&row, &self.v)
    }

    /// `count(n)` for every `n < 2^j`, by depth-first traversal of the digit
    /// tree in scaled integer arithmetic.
    pub fn counts_below_pow2(&self, j: u32) -> Result<Vec<u64>> {
        if j > COUNTS_MAX_J {
            return Err(Error::InvalidArgument(format!("j = {j} exceeds {COUNTS_MAX_J}")));
        }
        let int_matrix = |m: &RationalMatrix| -> Result<Vec<i128>> {
            m.entries()
                .iter()
                .map(|r| {
                    r.is_integer()
                        .then(|| r.to_integer().to_i128())
                        .flatten()
                        .ok_or_else(|| Error::InvalidArgument(format!("digit matrix entry {} is not a small integer", format_rational(r))))
                })
                .collect()
        };
        let (su, u) = scaled(&self.u)?;
        let (sv, v) = scaled(&self.v)?;
        let walk = Walk {
            dim: self.u.len(),
            mats: [int_matrix(&self.d0)?, int_matrix(&self.d1)?],
            v,
            scale: su.checked_mul(sv).ok_or_else(overflow)?,
            j,
            order: self.order,
        };
        let mut out = vec![0u64; 1usize << j];
        out[0] = walk.emit(&u)?;
        match self.order {
            // the leading digit is always one
            DigitOrder::MsbFirst if j > 0 => walk.visit(&walk.step(&u, true)?, 1, 1, &mut out)?,
            DigitOrder::MsbFirst => {}
            DigitOrder::LsbFirst => walk.visit(&u, 0, 0, &mut out)?,
        }
        Ok(out)
    }
}

fn overflow() -> Error {
    Error::Overflow("digit product left the i128 range".into())
}

/// `(s, s x)` with `s` the least common denominator.
fn scaled(x: &[Rational]) -> Result<(i128, Vec<i128>)> {
    let lcm = x.iter().fold(num_bigint::BigInt::one(), |l, r| num_integer::Integer::lcm(&l, r.denom()));
    let s = lcm.to_i128().ok_or_else(overflow)?;
    let ints = x
        .iter()
        .map(|r| (r * Rational::from_integer(lcm.clone())).to_integer().to_i128().ok_or_else(overflow))
        .collect::<Result<_>>()?;
    Ok((s, ints))
}

struct Walk {
    dim: usize,
    mats: [Vec<i128>; 2],
    v: Vec<i128>,
    scale: i128,
    j: u32,
    order: DigitOrder,
}

impl Walk {
    fn step(&self, row: &[i128], bit: bool) -> Result<Vec<i128>> {
        let m = &self.mats[bit as usize];
        let d = self.dim;
        (0..d)
            .map(|c| {
                (0..d).try_fold(0i128, |acc, r| {
                    row[r].checked_mul(m[r * d + c]).and_then(|x| acc.checked_add(x)).ok_or_else(overflow)
                })
            })
            .collect()
    }

    fn emit(&self, row: &[i128]) -> Result<u64> {
        let num = row
            .iter()
            .zip(&self.v)
            .try_fold(0i128, |acc, (a, b)| a.checked_mul(*b).and_then(|x| acc.checked_add(x)))
            .ok_or_else(overflow)?;
        if num % self.scale != 0 || num < 0 {
            return Err(Error::InvariantViolation(format!("representation yields non-count {num}/{}", self.scale)));
        }
        u64::try_from(num / self.scale).map_err(|_| overflow())
    }

    /// `row` covers `len` digits, the last of which (in reading order) made
    /// `n`.
    fn visit(&self, row: &[i128], n: u64, len: u32, out: &mut [u64]) -> Result<()> {
        match self.order {
            DigitOrder::MsbFirst => {
                out[n as usize] = self.emit(row)?;
                if len < self.j {
                    for b in [false, true] {
                        self.visit(&self.step(row, b)?, 2 * n + b as u64, len + 1, out)?;
                    }
                }
            }
            DigitOrder::LsbFirst => {
                // `n` holds the low `len` digits; it is a complete number only
                // when its top digit is one
                if len > 0 && n >> (len - 1) & 1 == 1 {
                    out[n as usize] = self.emit(row)?;
                }
                if len < self.j {
                    for b in [false, true] {
                        self.visit(&self.step(row, b)?, n | (b as u64) << len, len + 1, out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exact row reduction of `rows x = rhs`. Free variables are set to zero.
/// On inconsistency returns the tag of the offending equation.
fn solve_consistent(mut rows: Vec<Vec<Rational>>, mut rhs: Vec<Rational>, tags: &[u64]) -> std::result::Result<Vec<Rational>, u64> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        rhs.swap(r, p);
        order.swap(r, p);
        let inv = Rational::one() / &rows[r][c];
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        rhs[r] *= &inv;
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for k in 0..cols {
                    let t = &f * &rows[r][k];
                    rows[i][k] -= t;
                }
                let t = &f * &rhs[r];
                rhs[i] -= t;
            }
        }
        pivots.push(c);
        r += 1;
    }
    if let Some(i) = (r..rows.len()).filter(|&i| !rhs[i].is_zero()).min_by_key(|&i| tags[order[i]]) {
        return Err(tags[order[i]]);
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = rhs[i].clone();
    }
    Ok(x)
}

/// Tries one digit order; `Err` carries the first mismatching `n`.
fn fit_order(fact: &SentinelFactorization, counts: &[u64], order: DigitOrder) -> std::result::Result<LinearRepresentation, u64> {
    let dim = fact.dim();
    let n_fit = (4 * dim * dim).max(2).min(counts.len());
    let mut rep = LinearRepresentation {
        u: vec![Rational::zero(); dim],
        v: vec![Rational::zero(); dim],
        order,
        validated: counts.len() as u64,
        d0: fact.d0().clone(),
        d1: fact.d1().clone(),
    };
    // coefficient of the unknown vector in count(n), one row per n
    let rows: Vec<Vec<Rational>> = (0..n_fit as u64)
        .map(|n| {
            let d = digits_lsb(n);
            match order {
                DigitOrder::LsbFirst => d.iter().fold(fact.beta().to_vec(), |row, &b| fact.digit_matrix(b).left_mul_vec(&row)),
                DigitOrder::MsbFirst => d.iter().fold(fact.alpha().to_vec(), |col, &b| fact.digit_matrix(b).mul_vec(&col)),
            }
        })
        .collect();
    let rhs = counts[..n_fit].iter().map(|&c| Rational::from_integer((c as i64).into())).collect();
    let tags: Vec<u64> = (0..n_fit as u64).collect();
    let x = solve_consistent(rows, rhs, &tags)?;
    match order {
        DigitOrder::LsbFirst => {
            rep.u = fact.beta().to_vec();
            rep.v = x;
        }
        DigitOrder::MsbFirst => {
            rep.u = x;
            rep.v = fact.alpha().to_vec();
        }
    }
    let j = u64::BITS - (counts.len() as u64 - 1).leading_zeros();
    let predicted = rep.counts_below_pow2(j).map_err(|_| 0u64)?;
    match counts.iter().zip(&predicted).position(|(a, b)| a != b) {
        Some(n) => Err(n as u64),
        None => Ok(rep),
    }
}

/// Fits against `counts[n]` for `n < counts.len()`, trying least significant
/// digit first before most significant first.
pub fn fit_with_counts(fact: &SentinelFactorization, counts: &[u64]) -> Result<LinearRepresentation> {
    let dim = fact.dim();
    if counts.len() < (2 * dim * dim).max(2) {
        return Err(Error::InvalidArgument(format!(
            "need at least {} counts for a {dim}x{dim} family, got {}",
            2 * dim * dim,
            counts.len()
        )));
    }
    let mut first_mismatch = u64::MAX;
    for order in [DigitOrder::LsbFirst, DigitOrder::MsbFirst] {
        match fit_order(fact, counts, order) {
            Ok(rep) => return Ok(rep),
            Err(n) => first_mismatch = first_mismatch.min(n),
        }
    }
    Err(Error::NoRepresentationFound { first_mismatch })
}

/// Fits the family's digit matrices to the odd-coefficient counts of its
/// polynomial for `n < n_check`.
pub fn fit_linear_representation(family: &MatrixFamily, n_check: u64) -> Result<LinearRepresentation> {
    let mask = family
        .polynomial_mask
        .ok_or_else(|| Error::InvalidArgument(format!("family {} has no counting polynomial", family.name)))?;
    let counts = gf2_row_counts(Gf2Poly::from_mask(mask), n_check as usize)?;
    fit_with_counts(family.factorization(), &counts)
}

impl LinearRepresentation {
    /// True when every entry of `u` and `v` is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| !x.is_negative())
    }
}
