//! The lambda, kappa and mu series over `chi(0^q)`.

use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::conjugate::SentinelFactorization;
use crate::exactmat::{rat, Rational};
use crate::numeric::{cumulative, CompensatedSum};
use crate::words::{fold_log_corners, CornerSink};

/// Sums for one word length, already weighted by `2^-len` but without the
/// common prefactor `1 / (2^(q+1) (2^q - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSlab {
    pub len: usize,
    pub words: u64,
    pub lambda: f64,
    pub kappa: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub q: u32,
    pub slabs: Vec<MomentSlab>,
    /// Words whose corner value is exactly zero.
    pub skipped: u64,
}

/// `1 / (2^(q+1) (2^q - 1))`.
pub fn series_prefactor(q: u32) -> Rational {
    let p = rat(2).pow(q as i32);
    Rational::one() / (rat(2) * &p * (p - rat(1)))
}

/// `1 + 2 (2^(2q+1) - (3+q) 2^q + 1) / (2^q - 1)`, the coefficient of
/// `lambda^2` in the dispersion formula.
pub fn sigma2_prefactor(q: u32) -> Rational {
    let p = rat(2).pow(q as i32);
    let num = rat(2) * &p * &p - rat(3 + q as i64) * &p + rat(1);
    rat(1) + rat(2) * num / (p - rat(1))
}

pub fn sigma2_from_moments(lambda: f64, kappa: f64, mu: f64, q: u32) -> f64 {
    let c = sigma2_prefactor(q).to_f64().expect("small rational");
    c * lambda * lambda - 2.0 * lambda * kappa + mu
}

#[derive(Debug, Clone, Default)]
struct LenSums {
    words: u64,
    ln: CompensatedSum,
    ln2: CompensatedSum,
}

#[derive(Debug, Clone)]
struct MomentSink {
    lens: Vec<LenSums>,
    skipped: u64,
}

impl CornerSink for MomentSink {
    #[inline]
    fn visit(&mut self, len: usize, ln_abs: Option<f64>) {
        match ln_abs {
            Some(x) => {
                let s = &mut self.lens[len];
                s.words += 1;
                s.ln.add(x);
                s.ln2.add(x * x);
            }
            None => self.skipped += 1,
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.lens.iter_mut().zip(&other.lens) {
            a.words += b.words;
            a.ln.merge(&b.ln);
            a.ln2.merge(&b.ln2);
        }
        self.skipped += other.skipped;
    }
}

pub fn accumulate_moments(fact: &SentinelFactorization, max_len: usize) -> MomentSeries {
    let q = fact.q();
    let sink = fold_log_corners(fact, max_len, || MomentSink {
        lens: vec![LenSums::default(); max_len + 1],
        skipped: 0,
    });
    let slabs = sink
        .lens
        .iter()
        .enumerate()
        .map(|(len, s)| {
            let w = 0.5f64.powi(len as i32);
            let ln = s.ln.value();
            MomentSlab {
                len,
                words: s.words,
                lambda: w * ln,
                kappa: (q as usize + len) as f64 * w * ln,
                mu: w * s.ln2.value(),
            }
        })
        .collect();
    MomentSeries {
        q,
        slabs,
        skipped: sink.skipped,
    }
}

impl MomentSeries {
    pub fn max_len(&self) -> usize {
        self.slabs.len() - 1
    }

    fn prefactor(&self) -> f64 {
        series_prefactor(self.q).to_f64().expect("small rational")
    }

    fn partials(&self, f: impl Fn(&MomentSlab) -> f64) -> Vec<f64> {
        let p = self.prefactor();
        cumulative(&self.slabs.iter().map(f).collect::<Vec<_>>())
            .into_iter()
            .map(|x| p * x)
            .collect()
    }

    /// Cumulative, prefactored lambda partial sums, one per length.
    pub fn lambda_partials(&self) -> Vec<f64> {
        self.partials(|s| s.lambda)
    }

    pub fn kappa_partials(&self) -> Vec<f64> {
        self.partials(|s| s.kappa)
    }

    pub fn mu_partials(&self) -> Vec<f64> {
        self.partials(|s| s.mu)
    }

    /// Drops every slab longer than `max_len`.
    pub fn truncated(&self, max_len: usize) -> Self {
        Self {
            q: self.q,
            slabs: self.slabs[..=max_len.min(self.max_len())].to_vec(),
            skipped: self.skipped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::{rat_frac, RationalMatrix};

    fn binomial() -> SentinelFactorization {
        SentinelFactorization::new(&RationalMatrix::from_rows(&[&[1]]), &RationalMatrix::from_rows(&[&[2]]), 1).unwrap()
    }

    #[test]
    fn prefactors() {
        assert_eq!(sigma2_prefactor(1), rat(3));
        assert_eq!(sigma2_prefactor(2), rat_frac(29, 3));
        assert_eq!(sigma2_prefactor(3), rat_frac(169, 7));
        assert_eq!(series_prefactor(1), rat_frac(1, 4));
        assert_eq!(series_prefactor(2), rat_frac(1, 24));
        assert_eq!(series_prefactor(3), rat_frac(1, 112));
    }

    #[test]
    fn binomial_sigma2_closed_form() {
        let ln2 = std::f64::consts::LN_2;
        let s = sigma2_from_moments(ln2 / 2.0, 2.0 * ln2, 1.5 * ln2 * ln2, 1);
        assert!((s - ln2 * ln2 / 4.0).abs() < 1e-15);
        assert!((s - 0.120_113_253_479_550_3).abs() < 1e-15);
    }

    #[test]
    fn binomial_partials() {
        let ln2 = std::f64::consts::LN_2;
        let series = accumulate_moments(&binomial(), 36);
        let lam = series.lambda_partials();
        for (k, v) in lam.iter().enumerate() {
            let expect: f64 = (0..=k).map(|j| j as f64 / 2f64.powi(j as i32)).sum::<f64>() * ln2 / 4.0;
            assert!((v - expect).abs() < 1e-15);
        }
        assert!((lam[36] - ln2 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_word_only() {
        let series = accumulate_moments(&binomial(), 0);
        assert_eq!(series.slabs.len(), 1);
        assert_eq!(series.lambda_partials(), vec![0.0]);
        assert_eq!(series.kappa_partials(), vec![0.0]);
        assert_eq!(series.mu_partials(), vec![0.0]);
    }
}
