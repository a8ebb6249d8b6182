//! Three-matrix regrouping of the quadrinomial family. Writing every word as
//! blocks `1 0^j`, the products `D1 D0^j` take only three distinct values
//! (`j = 0`, `j = 1`, `j >= 2`), whose lower-right 2x2 blocks are
//! `E0 = alpha1 beta1^T`, `M = diag(4, 1)` and `E2 = alpha2 beta2^T`.
//! With `zeta = s/2`, block weights are `zeta` for `E0`, `zeta^2` for `M` and
//! `zeta^3 / (1 - zeta)` for `E2`, and `L(t) = -ln s` at the smallest zero of
//! `det(I - F(s, t))`.

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactmat::{Rational, RationalMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct RegroupedMatrices {
    pub e0: RationalMatrix,
    pub m: RationalMatrix,
    pub e2: RationalMatrix,
    pub alpha: [Vec<Rational>; 2],
    pub beta: [Vec<Rational>; 2],
}

fn lower_right(a: &RationalMatrix) -> Result<RationalMatrix> {
    if a.dim() != 3 || a.row(0).iter().any(|x| !x.is_zero()) {
        return Err(Error::InvariantViolation(
            "regrouped matrix must be 3x3 with a zero first row".into(),
        ));
    }
    RationalMatrix::from_entries(
        2,
        vec![
            a.get(1, 1).clone(),
            a.get(1, 2).clone(),
            a.get(2, 1).clone(),
            a.get(2, 2).clone(),
        ],
    )
}

/// Rank-one factor with `alpha` normalized to a leading 1.
fn normalized_factor(a: &RationalMatrix) -> Result<(Vec<Rational>, Vec<Rational>)> {
    let (mut alpha, mut beta) = a.rank_one_factor()?;
    let lead = alpha.iter().find(|x| !x.is_zero()).expect("nonzero").clone();
    alpha.iter_mut().for_each(|x| *x /= &lead);
    beta.iter_mut().for_each(|x| *x *= &lead);
    Ok((alpha, beta))
}

/// Derives `E0`, `M`, `E2` from the quadrinomial `D0`, `D1`, checking that
/// `D1 D0^j` is constant for `j = 2..=6`.
pub fn regroup(d0: &RationalMatrix, d1: &RationalMatrix) -> Result<RegroupedMatrices> {
    let tilde = |j: u32| d1.mul(&d0.pow(j));
    let t2 = tilde(2)?;
    for j in 3..=6 {
        if tilde(j)? != t2 {
            return Err(Error::InvariantViolation(format!("D1 D0^{j} differs from D1 D0^2")));
        }
    }
    let e0 = lower_right(&tilde(0)?)?;
    let m = lower_right(&tilde(1)?)?;
    let e2 = lower_right(&t2)?;
    let (a1, b1) = normalized_factor(&e0)?;
    let (a2, b2) = normalized_factor(&e2)?;
    Ok(RegroupedMatrices {
        e0,
        m,
        e2,
        alpha: [a1, a2],
        beta: [b1, b2],
    })
}

impl RegroupedMatrices {
    /// Exact `beta_j^T M^k alpha_i` (indices 1-based as in `F_{i,j}`).
    pub fn block_corner(&self, i: usize, j: usize, k: u32) -> Rational {
        let v = self.m.pow(k).mul_vec(&self.alpha[i - 1]);
        self.beta[j - 1].iter().zip(&v).map(|(a, b)| a * b).sum()
    }

    /// `F_{i,j}(s, t)` summed term by term up to `k_max`.
    pub fn f_series(&self, s: f64, t: f64, k_max: u32) -> [[f64; 2]; 2] {
        let z = s / 2.0;
        let r = [z, z.powi(3) / (1.0 - z)];
        let mut f = [[0.0; 2]; 2];
        for (i, row) in f.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (0..=k_max)
                    .map(|k| {
                        let c = self.block_corner(i + 1, j + 1, k).abs().to_f64().expect("finite");
                        r[i] * z.powi(2 * k as i32) * c.powf(t)
                    })
                    .sum();
            }
        }
        f
    }
}

/// Closed-form `F_{i,j}(s, t)`.
pub fn f_closed(s: f64, t: f64) -> [[f64; 2]; 2] {
    let z = s / 2.0;
    let a = 2f64.powf(t);
    let b = 4f64.powf(t);
    let d1 = 1.0 - z * z;
    let d2 = (1.0 - z) * (1.0 - b * z * z);
    [
        [a * z / d1, b * z / d1],
        [z.powi(3) / d2, b * z.powi(3) / d2],
    ]
}

pub fn det_i_minus_f(s: f64, t: f64) -> f64 {
    let f = f_closed(s, t);
    (1.0 - f[0][0]) * (1.0 - f[1][1]) - f[0][1] * f[1][0]
}

/// `L(t)` from the smallest zero of `det(I - F(s, t))` in `(0, 2)`.
pub fn quadrinomial_regroup_l(t: f64, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    // F has poles at zeta = 2^-t and zeta = 1; the first zero precedes both.
    let s_pole = (2.0 * 2f64.powf(-t)).min(2.0);
    const GRID: usize = 4096;
    let mut prev_s = 0.0;
    let mut prev = 1.0;
    for k in 1..GRID {
        let s = s_pole * k as f64 / GRID as f64;
        let d = det_i_minus_f(s, t);
        if !d.is_finite() {
            break;
        }
        if d.signum() != prev.signum() || d == 0.0 {
            let (mut lo, mut hi) = (prev_s, s);
            let sign_lo = prev.signum();
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if det_i_minus_f(mid, t).signum() == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(-(0.5 * (lo + hi)).ln());
        }
        prev_s = s;
        prev = d;
    }
    Err(Error::NoRoot { t })
}

/// The quadrinomial as a ternary-block system is only meaningful if every
/// block is nonnegative.
pub fn is_nonnegative(r: &RegroupedMatrices) -> bool {
    [&r.e0, &r.m, &r.e2].iter().all(|m| m.is_nonnegative())
        && r.alpha.iter().chain(&r.beta).flatten().all(|x| !x.is_negative())
        && !r.m.get(0, 0).is_one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::rat;

    fn quad() -> RegroupedMatrices {
        regroup(
            &RationalMatrix::from_rows(&[&[1, 2, 0], &[0, 0, 1], &[0, 0, 0]]),
            &RationalMatrix::from_rows(&[&[0, 0, 0], &[2, 0, 0], &[0, 1, 2]]),
        )
        .unwrap()
    }

    #[test]
    fn blocks() {
        let r = quad();
        assert_eq!(r.e0, RationalMatrix::from_rows(&[&[0, 0], &[1, 2]]));
        assert_eq!(r.m, RationalMatrix::from_rows(&[&[4, 0], &[0, 1]]));
        assert_eq!(r.e2, RationalMatrix::from_rows(&[&[4, 4], &[0, 0]]));
        assert_eq!(r.alpha[0], vec![rat(0), rat(1)]);
        assert_eq!(r.beta[0], vec![rat(1), rat(2)]);
        assert_eq!(r.alpha[1], vec![rat(1), rat(0)]);
        assert_eq!(r.beta[1], vec![rat(4), rat(4)]);
        assert!(is_nonnegative(&r));
    }

    #[test]
    fn block_corners() {
        let r = quad();
        for k in 0..=5 {
            assert_eq!(r.block_corner(1, 1, k), rat(2));
            assert_eq!(r.block_corner(1, 2, k), rat(4));
            assert_eq!(r.block_corner(2, 1, k), rat(4).pow(k as i32));
            assert_eq!(r.block_corner(2, 2, k), rat(2).pow(2 * (k as i32 + 1)));
        }
    }

    #[test]
    fn closed_form_matches_series() {
        let r = quad();
        for (s, t) in [(0.5, 0.0), (0.8, 1.0), (0.4, 2.0), (1.2, -0.5)] {
            let a = r.f_series(s, t, 200);
            let b = f_closed(s, t);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-12 * b[i][j].abs().max(1.0), "{s} {t}");
                }
            }
        }
    }

    #[test]
    fn determinant_factorization() {
        for (s, t) in [(0.3, 0.0), (0.7, 1.0), (0.41, 2.0), (1.1, -0.5)] {
            let z: f64 = s / 2.0;
            let a = 2f64.powf(t);
            let num = (1.0 - (a + 1.0) * z) * (1.0 - (1.0 - a + a * a) * z * z);
            let den = (1.0 - z) * (1.0 - z * z) * (1.0 - a * a * z * z);
            assert!((det_i_minus_f(s, t) - num / den).abs() < 1e-12);
        }
    }

    #[test]
    fn exponent_closed_form() {
        assert!(quadrinomial_regroup_l(0.0, 1e-15).unwrap().abs() < 1e-14);
        for t in [-0.5, 0.5, 1.0, 1.5, 2.0, 3.0] {
            let l = quadrinomial_regroup_l(t, 1e-15).unwrap();
            let expect = ((2f64.powf(t) + 1.0) / 2.0).ln();
            assert!((l - expect).abs() < 1e-12, "t={t}: {l} vs {expect}");
        }
        assert!((quadrinomial_regroup_l(1.0, 1e-15).unwrap() - 1.5f64.ln()).abs() < 1e-12);
        assert!((quadrinomial_regroup_l(2.0, 1e-15).unwrap() - 2.5f64.ln()).abs() < 1e-12);
    }
}
