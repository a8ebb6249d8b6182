//! Finite-`n` dispersion of odd-coefficient counts, and the distribution of
//! `#(aN + b)` for uniform `N`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::digit_sum;
use super::linrep::fit_linear_representation;
use crate::catalog::MatrixFamily;
use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, ols_slope, CompensatedSum};

/// Smallest octave used in the regressions.
pub const DISPERSION_J_MIN: u32 = 8;
/// Octaves in the trailing regression window.
pub const TRAILING_OCTAVES: usize = 5;
/// Counts used to fit the linear representation before enumerating.
const FIT_CHECK: u64 = 1 << 12;
const COMPARE_SEED: u64 = 0x6469_6769_7473;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OctaveStats {
    /// Statistics over `N` uniform on `[0, 2^j)`.
    pub j: u32,
    pub mean: f64,
    pub var: f64,
    /// `Var(ln count(N))`.
    pub var_ln: f64,
    /// `ln Var / ln n`.
    pub var_ratio: f64,
    /// `var_ln(j) - var_ln(j - 1)`, NaN for the first octave.
    pub var_ln_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionResult {
    pub j_max: u32,
    /// Slopes against `ln n` over the last [`TRAILING_OCTAVES`] octaves.
    pub avg_slope: f64,
    pub typ_slope: f64,
    /// The same slopes over every octave from [`DISPERSION_J_MIN`].
    pub avg_slope_full: f64,
    pub typ_slope_full: f64,
    pub octaves: Vec<OctaveStats>,
}

/// Per-octave statistics of `counts[0..2^j)` for `j_min <= j <= j_max`.
pub fn octave_stats(counts: &[u64], j_min: u32, j_max: u32) -> Result<Vec<OctaveStats>> {
    if j_min > j_max || counts.len() < 1usize << j_max {
        return Err(Error::InvalidArgument(format!(
            "need j_min <= j_max and 2^{j_max} counts, got {j_min}, {j_max} and {}",
            counts.len()
        )));
    }
    if let Some(n) = counts[..1usize << j_max].iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("count({n}) is zero")));
    }
    // prefixes are nested, so one pass accumulates every octave
    let (mut s1, mut s2) = (0u128, 0u128);
    let (mut l1, mut l2) = (CompensatedSum::new(), CompensatedSum::new());
    let mut out = Vec::new();
    let mut prev_var_ln = f64::NAN;
    let mut lo = 0usize;
    for j in 0..=j_max {
        let hi = 1usize << j;
        for &c in &counts[lo..hi] {
            s1 += c as u128;
            s2 += (c as u128) * (c as u128);
            let l = (c as f64).ln();
            l1.add(l);
            l2.add(l * l);
        }
        lo = hi;
        let n = hi as f64;
        let mean = s1 as f64 / n;
        let var = s2 as f64 / n - mean * mean;
        let ml = l1.value() / n;
        let var_ln = l2.value() / n - ml * ml;
        if j >= j_min {
            out.push(OctaveStats {
                j,
                mean,
                var,
                var_ln,
                var_ratio: var.ln() / n.ln(),
                var_ln_diff: var_ln - prev_var_ln,
            });
        }
        prev_var_ln = var_ln;
    }
    if let Some(o) = out.first_mut() {
        o.var_ln_diff = f64::NAN;
    }
    Ok(out)
}

fn slopes(octaves: &[OctaveStats]) -> (f64, f64) {
    let x: Vec<f64> = octaves.iter().map(|o| o.j as f64 * std::f64::consts::LN_2).collect();
    let avg: Vec<f64> = octaves.iter().map(|o| o.var.ln()).collect();
    let typ: Vec<f64> = octaves.iter().map(|o| o.var_ln).collect();
    (ols_slope(&x, &avg), ols_slope(&x, &typ))
}

/// Dispersion slopes from exact counts for `n = 2^j`, `j = 8..=j_max`.
pub fn dispersion_from_counts(counts: &[u64], j_max: u32) -> Result<DispersionResult> {
    if j_max < DISPERSION_J_MIN + TRAILING_OCTAVES as u32 - 1 {
        return Err(Error::InvalidArgument(format!(
            "j_max must be at least {}",
            DISPERSION_J_MIN + TRAILING_OCTAVES as u32 - 1
        )));
    }
    let octaves = octave_stats(counts, DISPERSION_J_MIN, j_max)?;
    let (avg_slope_full, typ_slope_full) = slopes(&octaves);
    let (avg_slope, typ_slope) = slopes(&octaves[octaves.len() - TRAILING_OCTAVES..]);
    Ok(DispersionResult {
        j_max,
        avg_slope,
        typ_slope,
        avg_slope_full,
        typ_slope_full,
        octaves,
    })
}

/// Fits the family's linear representation and enumerates its counts below
/// `2^j_max`.
pub fn empirical_dispersion(family: &MatrixFamily, j_max: u32) -> Result<DispersionResult> {
    let rep = fit_linear_representation(family, FIT_CHECK)?;
    let counts = rep.counts_below_pow2(j_max)?;
    dispersion_from_counts(&counts, j_max)
}

/// `j,var,var_ln,var_ratio,var_ln_diff` rows.
pub fn write_octaves_csv<W: Write>(octaves: &[OctaveStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "var", "var_ln", "var_ratio", "var_ln_diff"])?;
    for o in octaves {
        w.write_record([
            o.j.to_string(),
            format!("{:.17e}", o.var),
            format!("{:.17e}", o.var_ln),
            format!("{:.17e}", o.var_ratio),
            format!("{:.17e}", o.var_ln_diff),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardizedMoments {
    /// Mean of `(#(aN+b) - j/2) / sqrt(j/4)`.
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigitComparison {
    pub a: u64,
    pub b: u64,
    pub j: u32,
    /// Number of `N` drawn; `2^j` means the whole range was enumerated.
    pub samples: u64,
    pub moments: StandardizedMoments,
    /// Moments of `#(N)` over the same `N`.
    pub reference: StandardizedMoments,
    /// Largest gap between the two empirical CDFs.
    pub ks_distance: f64,
    /// Largest gap between the standardized CDF of `#(aN+b)` and the standard
    /// normal, evaluated at half-integers.
    pub normal_distance: f64,
    pub reference_normal_distance: f64,
}

/// Histogram of digit sums, indexed by value.
type Histogram = [u64; 129];

fn add_hist(mut x: Histogram, y: Histogram) -> Histogram {
    x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
    x
}

fn moments(h: &Histogram, j: u32) -> StandardizedMoments {
    let total: u64 = h.iter().sum();
    let (c, s) = (j as f64 / 2.0, (j as f64 / 4.0).sqrt());
    let z = |k: usize| (k as f64 - c) / s;
    let e = |f: &dyn Fn(f64) -> f64| h.iter().enumerate().map(|(k, &m)| m as f64 * f(z(k))).sum::<f64>() / total as f64;
    let mean = e(&|x| x);
    let variance = e(&|x| (x - mean).powi(2));
    let skewness = e(&|x| (x - mean).powi(3)) / variance.powf(1.5);
    StandardizedMoments { mean, variance, skewness }
}

fn cdf(h: &Histogram) -> Vec<f64> {
    let total: u64 = h.iter().sum();
    let mut acc = 0u64;
    h.iter()
        .map(|&m| {
            acc += m;
            acc as f64 / total as f64
        })
        .collect()
}

fn normal_distance(h: &Histogram, j: u32) -> f64 {
    let (c, s) = (j as f64 / 2.0, (j as f64 / 4.0).sqrt());
    cdf(h)
        .iter()
        .enumerate()
        .map(|(k, f)| (f - normal_cdf((k as f64 + 0.5 - c) / s)).abs())
        .fold(0.0, f64::max)
}

/// Compares `#(aN + b)` with `#(N)` for `N` uniform on `[0, 2^j)`. When
/// `n_samples >= 2^j` the range is enumerated; otherwise `N` is drawn from a
/// fixed-seed stream and both sums use the same draws.
pub fn digit_distribution_compare(a: u64, b: u64, j: u32, n_samples: u64) -> Result<DigitComparison> {
    if b >= a {
        return Err(Error::InvalidArgument(format!("need 0 <= b < a, got a = {a}, b = {b}")));
    }
    if j == 0 || j > 48 || a.checked_shl(j).is_none_or(|x| x >> j != a) || n_samples == 0 {
        return Err(Error::InvalidArgument(format!("a 2^j must fit in 64 bits and n_samples must be positive (a = {a}, j = {j})")));
    }
    let n = 1u64 << j;
    let sums = |x: u64| [digit_sum(a * x + b), digit_sum(x)];
    let empty = || ([0u64; 129], [0u64; 129]);
    let fold = |(mut ha, mut hr): (Histogram, Histogram), x: u64| {
        let [sa, sr] = sums(x);
        ha[sa as usize] += 1;
        hr[sr as usize] += 1;
        (ha, hr)
    };
    let merge = |(a1, r1), (a2, r2)| (add_hist(a1, a2), add_hist(r1, r2));
    let (ha, hr, samples) = if n_samples >= n {
        let (ha, hr) = (0..n).into_par_iter().fold(empty, fold).reduce(empty, merge);
        (ha, hr, n)
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(COMPARE_SEED);
        let xs: Vec<u64> = (0..n_samples).map(|_| rng.gen_range(0..n)).collect();
        let (ha, hr) = xs.par_iter().copied().fold(empty, fold).reduce(empty, merge);
        (ha, hr, n_samples)
    };
    let ks_distance = cdf(&ha).iter().zip(cdf(&hr)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(DigitComparison {
        a,
        b,
        j,
        samples,
        moments: moments(&ha, j),
        reference: moments(&hr, j),
        ks_distance,
        normal_distance: normal_distance(&ha, j),
        reference_normal_distance: normal_distance(&hr, j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::get_family;

    #[test]
    fn binomial_typ_slope_is_exact() {
        // #(N) is Binomial(j, 1/2), so Var(ln 2^#) = ln^2 2 j/4
        let counts: Vec<u64> = (0..1u64 << 16).map(|n| 1 << digit_sum(n)).collect();
        let r = dispersion_from_counts(&counts, 16).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((r.typ_slope - ln2 / 4.0).abs() < 1e-12, "{}", r.typ_slope);
        assert!((r.typ_slope_full - ln2 / 4.0).abs() < 1e-12);
        for o in &r.octaves {
            // E 4^# = (5/2)^j and E 2^# = (3/2)^j
            let j = o.j as i32;
            let var = 2.5f64.powi(j) - 2.25f64.powi(j);
            assert!((o.var / var - 1.0).abs() < 1e-12);
            assert!((o.var_ln - ln2 * ln2 * j as f64 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn family_route_matches_direct_counts() {
        let g1 = get_family("g1").unwrap();
        let r = empirical_dispersion(&g1, 14).unwrap();
        assert_eq!(r.octaves.len(), 7);
        assert!((r.typ_slope - std::f64::consts::LN_2 / 4.0).abs() < 1e-12);
        assert!(r.octaves[0].var_ln_diff.is_nan());
    }

    #[test]
    fn octave_csv_header() {
        let counts: Vec<u64> = (0..1u64 << 12).map(|n| 1 << digit_sum(n)).collect();
        let r = dispersion_from_counts(&counts, 12).unwrap();
        let mut buf = Vec::new();
        write_octaves_csv(&r.octaves, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("j,var,var_ln,var_ratio,var_ln_diff\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn identity_comparison_is_zero() {
        let c = digit_distribution_compare(1, 0, 12, 1 << 12).unwrap();
        assert_eq!(c.ks_distance, 0.0);
        assert_eq!(c.moments, c.reference);
        assert_eq!(c.samples, 1 << 12);
        // exact binomial moments
        assert!(c.moments.mean.abs() < 1e-12);
        assert!((c.moments.variance - 1.0).abs() < 1e-12);
        assert!(c.moments.skewness.abs() < 1e-12);
    }

    #[test]
    fn sampled_comparison_is_deterministic() {
        let x = digit_distribution_compare(3, 1, 20, 10_000).unwrap();
        let y = digit_distribution_compare(3, 1, 20, 10_000).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.samples, 10_000);
    }

    #[test]
    fn bad_arguments() {
        assert!(digit_distribution_compare(3, 3, 10, 100).is_err());
        assert!(digit_distribution_compare(3, 0, 63, 100).is_err());
        assert!(digit_distribution_compare(3, 0, 10, 0).is_err());
    }
}
