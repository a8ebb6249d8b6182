//! Rows of `p(x)^n` over GF(2), stored as word bitsets.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest exponent [`gf2_row_counts`] accepts.
pub const GF2_MAX_N: usize = 1 << 18;

/// Polynomial over GF(2); bit `i` is the coefficient of `x^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Gf2Poly {
    mask: u64,
}

impl Gf2Poly {
    pub fn from_mask(mask: u64) -> Self {
        Self { mask }
    }

    pub fn mask(self) -> u64 {
        self.mask
    }

    /// `None` for the zero polynomial.
    pub fn degree(self) -> Option<u32> {
        (self.mask != 0).then(|| 63 - self.mask.leading_zeros())
    }

    pub fn weight(self) -> u32 {
        self.mask.count_ones()
    }
}

impl fmt::Display for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mask == 0 {
            return f.write_str("0");
        }
        let terms: Vec<String> = (0..64)
            .filter(|i| self.mask >> i & 1 == 1)
            .map(|i| match i {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            })
            .collect();
        f.write_str(&terms.join("+"))
    }
}

/// Accepts `0b1011`, a plain decimal mask, or a sum of monomials such as
/// `1+x+x^3`.
impl FromStr for Gf2Poly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse GF(2) polynomial '{s}'"));
        if let Some(bits) = s.strip_prefix("0b") {
            return u64::from_str_radix(bits, 2).map(Self::from_mask).map_err(|_| bad());
        }
        if let Ok(m) = s.parse::<u64>() {
            return Ok(Self::from_mask(m));
        }
        let mut mask = 0u64;
        for term in s.split('+').map(str::trim) {
            let e = match term {
                "1" => 0,
                "x" => 1,
                _ => term.strip_prefix("x^").and_then(|e| e.parse::<u32>().ok()).filter(|&e| e < 64).ok_or_else(bad)?,
            };
            // coefficients live in GF(2), so repeated terms cancel
            mask ^= 1 << e;
        }
        Ok(Self::from_mask(mask))
    }
}

/// `dst ^= src << shift` on little-endian word bitsets.
fn xor_shifted(dst: &mut [u64], src: &[u64], shift: usize) {
    let (w, b) = (shift / 64, shift % 64);
    for (i, &s) in src.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if let Some(d) = dst.get_mut(i + w) {
            *d ^= s << b;
        }
        if b != 0 {
            if let Some(d) = dst.get_mut(i + w + 1) {
                *d ^= s >> (64 - b);
            }
        }
    }
}

/// Number of nonzero coefficients of `poly^n` for `n = 0..n_max`.
pub fn gf2_row_counts(poly: Gf2Poly, n_max: usize) -> Result<Vec<u64>> {
    if n_max > GF2_MAX_N {
        return Err(Error::InvalidArgument(format!("n_max {n_max} exceeds {GF2_MAX_N}")));
    }
    let Some(d) = poly.degree() else {
        // 0^0 = 1, and every later power vanishes
        return Ok((0..n_max).map(|n| u64::from(n == 0)).collect());
    };
    let d = d as usize;
    let words = (d * n_max.max(1)) / 64 + 2;
    let shifts: Vec<usize> = (0..=d).filter(|i| poly.mask >> i & 1 == 1).collect();
    let mut row = vec![0u64; words];
    let mut next = vec![0u64; words];
    row[0] = 1;
    let mut used = 1;
    let mut counts = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        counts.push(row[..used].iter().map(|w| w.count_ones() as u64).sum());
        let grown = (used + d / 64 + 1).min(words);
        next[..grown].iter_mut().for_each(|w| *w = 0);
        for &s in &shifts {
            xor_shifted(&mut next[..grown], &row[..used], s);
        }
        std::mem::swap(&mut row, &mut next);
        used = grown;
    }
    Ok(counts)
}
