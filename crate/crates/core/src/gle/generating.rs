//! The generating function
//! `F(s, t) = sum_{w in chi(0^q)} (s/2)^(len(w)+q) |beta^T D_w alpha|^t`
//! and the generalized exponent `L(t) = -ln s(t)` where `F(s(t), t) = 1`.

use serde::Serialize;

use crate::conjugate::SentinelFactorization;
use crate::error::{Error, Result};
use crate::gle::wynn::wynn_epsilon;
use crate::numeric::{cumulative, CompensatedSum};
use crate::words::{fold_log_corners, CornerSink};

/// Per-length sums `sum_{len(w) = l} |corner|^t` for a set of exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabSums {
    pub q: u32,
    pub ts: Vec<f64>,
    /// `sums[i][l]` is the slab of length `l` for exponent `ts[i]`.
    pub sums: Vec<Vec<f64>>,
    pub skipped: u64,
}

struct SlabSink {
    ts: Vec<f64>,
    sums: Vec<Vec<CompensatedSum>>,
    skipped: u64,
}

impl CornerSink for SlabSink {
    #[inline]
    fn visit(&mut self, len: usize, ln_abs: Option<f64>) {
        match ln_abs {
            Some(x) => {
                for (t, s) in self.ts.iter().zip(self.sums.iter_mut()) {
                    s[len].add((t * x).exp());
                }
            }
            None => self.skipped += 1,
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        self.skipped += other.skipped;
    }
}

/// One pass over the words up to `max_len` for every exponent in `ts`.
pub fn slab_sums(fact: &SentinelFactorization, max_len: usize, ts: &[f64]) -> Result<SlabSums> {
    let sink = fold_log_corners(fact, max_len, || SlabSink {
        ts: ts.to_vec(),
        sums: vec![vec![CompensatedSum::new(); max_len + 1]; ts.len()],
        skipped: 0,
    });
    let sums: Vec<Vec<f64>> = sink
        .sums
        .iter()
        .map(|v| v.iter().map(CompensatedSum::value).collect())
        .collect();
    for (t, v) in ts.iter().zip(&sums) {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow(format!("|corner|^t overflows at t = {t}")));
        }
    }
    Ok(SlabSums {
        q: fact.q(),
        ts: ts.to_vec(),
        sums,
        skipped: sink.skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FValue {
    /// Accelerated value (equal to `raw` when acceleration is off).
    pub value: f64,
    /// Truncated sum.
    pub raw: f64,
    /// Contribution of the longest slab relative to the truncated sum.
    pub last_slab_ratio: f64,
    pub error: f64,
}

impl SlabSums {
    pub fn max_len(&self) -> usize {
        self.sums.first().map_or(0, |v| v.len() - 1)
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.ts.iter().position(|&x| x == t)
    }

    /// Per-length terms of `F(s, ts[ti])` for lengths `0..=upto`.
    pub fn f_terms(&self, ti: usize, s: f64, upto: usize) -> Vec<f64> {
        let h = s / 2.0;
        let base = h.powi(self.q as i32);
        self.sums[ti][..=upto]
            .iter()
            .enumerate()
            .map(|(l, x)| base * h.powi(l as i32) * x)
            .collect()
    }

    pub fn f_eval(&self, ti: usize, s: f64, upto: usize, accelerate: bool) -> Result<FValue> {
        if s <= 0.0 {
            return Err(Error::InvalidArgument("s must be positive".into()));
        }
        let terms = self.f_terms(ti, s, upto);
        let partials = cumulative(&terms);
        let raw = *partials.last().expect("nonempty");
        if !raw.is_finite() {
            return Err(Error::Overflow(format!("F({s}, {}) is not finite", self.ts[ti])));
        }
        let last_slab_ratio = if raw == 0.0 { 0.0 } else { terms[upto] / raw };
        if !accelerate || partials.len() < 3 {
            return Ok(FValue {
                value: raw,
                raw,
                last_slab_ratio,
                error: terms[upto].abs(),
            });
        }
        let w = wynn_epsilon(&partials)?;
        Ok(FValue {
            value: w.estimate,
            raw,
            last_slab_ratio,
            error: w.error,
        })
    }

    /// Smallest `s` in `(0, 2)` with `F(s, ts[ti]) = 1` using slabs up to
    /// `upto`, bisected until the bracket is narrower than `tol`.
    pub fn solve_s(&self, ti: usize, upto: usize, tol: f64, accelerate: bool) -> Result<f64> {
        let t = self.ts[ti];
        let raw = |s: f64| -> Result<f64> { Ok(self.f_eval(ti, s, upto, false)?.raw) };
        // The truncated sum is increasing in s, so its root bounds the true
        // root from above.
        let hi0 = 2.0 * (1.0 - 1e-12);
        if raw(hi0)? < 1.0 {
            return Err(Error::NoBracket { t });
        }
        let s_raw = bisect(|s| Ok(raw(s)? - 1.0), 0.0, hi0, tol)?;
        if !accelerate {
            return Ok(s_raw);
        }
        let acc = |s: f64| -> Result<f64> { Ok(self.f_eval(ti, s, upto, true)?.value - 1.0) };
        let mut hi = s_raw;
        if acc(hi)? < 0.0 {
            // the extrapolated tail came out negative; fall back to the raw root
            return Ok(s_raw);
        }
        let mut step = 1e-3 * s_raw;
        let mut lo = s_raw - step;
        while acc(lo)? >= 0.0 {
            hi = lo;
            step *= 2.0;
            lo = s_raw - step;
            if lo <= 0.0 {
                return Err(Error::NoBracket { t });
            }
        }
        bisect(acc, lo, hi, tol)
    }
}

/// Bisection for an increasing function with `f(lo) < 0 <= f(hi)`.
fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `F(s, t)` truncated at `max_len`, Wynn-accelerated over lengths.
pub fn f_eval(fact: &SentinelFactorization, s: f64, t: f64, max_len: usize) -> Result<FValue> {
    let slabs = slab_sums(fact, max_len, &[t])?;
    slabs.f_eval(0, s, max_len, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LtSolution {
    pub t: f64,
    pub l: f64,
    /// Root computed from the slabs up to `max_len - 4`.
    pub l_shallow: f64,
}

impl LtSolution {
    pub fn truncation_error(&self) -> f64 {
        (self.l - self.l_shallow).abs()
    }
}

/// Number of slabs dropped for the truncation stability check.
pub const SHALLOW_DROP: usize = 4;

impl SlabSums {
    /// Solves at full depth and at `max_len - 4`, without judging the gap.
    pub fn solve_l(&self, ti: usize, tol: f64) -> Result<LtSolution> {
        let max_len = self.max_len();
        if max_len < SHALLOW_DROP + 3 {
            return Err(Error::InvalidArgument(format!(
                "max_len must be at least {}",
                SHALLOW_DROP + 3
            )));
        }
        let s = self.solve_s(ti, max_len, tol, true)?;
        let s_shallow = self.solve_s(ti, max_len - SHALLOW_DROP, tol, true)?;
        Ok(LtSolution {
            t: self.ts[ti],
            l: -s.ln(),
            l_shallow: -s_shallow.ln(),
        })
    }

    /// [`solve_l`](Self::solve_l) plus the stability requirement: both
    /// depths agree within `10 * tol`.
    pub fn l_of_t_checked(&self, ti: usize, tol: f64) -> Result<f64> {
        let sol = self.solve_l(ti, tol)?;
        if sol.truncation_error() > 10.0 * tol {
            return Err(Error::TruncationUnstable {
                t: sol.t,
                full: sol.l,
                shallow: sol.l_shallow,
            });
        }
        Ok(sol.l)
    }
}

/// Generalized Lyapunov exponent `L(t)`.
pub fn l_of_t(fact: &SentinelFactorization, t: f64, max_len: usize, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    slab_sums(fact, max_len, &[t])?.l_of_t_checked(0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::RationalMatrix;

    fn fact(d0: &[&[i64]], d1: &[&[i64]], q: u32) -> SentinelFactorization {
        SentinelFactorization::new(&RationalMatrix::from_rows(d0), &RationalMatrix::from_rows(d1), q).unwrap()
    }

    fn binomial() -> SentinelFactorization {
        fact(&[&[1]], &[&[2]], 1)
    }

    fn quadrinomial() -> SentinelFactorization {
        fact(&[&[1, 2, 0], &[0, 0, 1], &[0, 0, 0]], &[&[0, 0, 0], &[2, 0, 0], &[0, 1, 2]], 2)
    }

    /// `(s/2)^q (1 - s/2) / (1 - s + (s/2)^(q+1))`
    fn f_closed(s: f64, q: i32) -> f64 {
        let h = s / 2.0;
        h.powi(q) * (1.0 - h) / (1.0 - s + h.powi(q + 1))
    }

    #[test]
    fn f_at_one_zero() {
        let v = f_eval(&quadrinomial(), 1.0, 0.0, 40).unwrap();
        assert!((v.value - 1.0).abs() < 1e-6, "{v:?}");
        assert!(v.raw < 1.0);
    }

    #[test]
    fn f_matches_closed_form_at_t0() {
        let f = quadrinomial();
        let slabs = slab_sums(&f, 30, &[0.0]).unwrap();
        for s in [0.25, 0.5, 0.9, 1.0, 1.1] {
            let v = slabs.f_eval(0, s, 30, true).unwrap();
            assert!((v.value - f_closed(s, 2)).abs() < 1e-9, "s={s}: {v:?} vs {}", f_closed(s, 2));
        }
        // raw sum at s = 0.5 already converged: tail ratio is (golden ratio)/4
        let v = slabs.f_eval(0, 0.5, 30, false).unwrap();
        assert!((v.raw - f_closed(0.5, 2)).abs() < 1e-12);
    }

    #[test]
    fn f_s_derivative() {
        let slabs = slab_sums(&quadrinomial(), 36, &[0.0]).unwrap();
        let h = 1e-4;
        let d = (slabs.f_eval(0, 1.0 + h, 36, true).unwrap().value
            - slabs.f_eval(0, 1.0 - h, 36, true).unwrap().value)
            / (2.0 * h);
        assert!((d - 6.0).abs() < 1e-5, "{d}");
    }

    #[test]
    fn l_at_zero() {
        let l = l_of_t(&quadrinomial(), 0.0, 30, 1e-12).unwrap();
        assert!(l.abs() < 1e-10, "{l}");
    }

    #[test]
    fn binomial_l2() {
        let l = l_of_t(&binomial(), 2.0, 36, 1e-13).unwrap();
        assert!((l - 2.5f64.ln()).abs() < 1e-11, "{l}");
    }

    #[test]
    fn quadrinomial_l1() {
        let l = l_of_t(&quadrinomial(), 1.0, 36, 1e-11).unwrap();
        assert!((l - 1.5f64.ln()).abs() < 1e-9, "{l}");
    }

    #[test]
    fn strongly_negative_t_is_unstable() {
        // shallow truncation cannot pin the root for t << 0
        let r = l_of_t(&quadrinomial(), -6.0, 12, 1e-12);
        assert!(
            matches!(r, Err(Error::TruncationUnstable { .. }) | Err(Error::NoBracket { .. })),
            "{r:?}"
        );
    }

    #[test]
    fn overflow_reported() {
        let r = slab_sums(&binomial(), 30, &[2000.0]);
        assert!(matches!(r, Err(Error::Overflow(_))));
    }
}
