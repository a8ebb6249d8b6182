//! `Phi(log2 n) = S(n)/n - log2(n)/2` and
//! `Psi(log2 n) = (Sf(n)/n) n^(-log2(3/2))`, both evaluated from the exact
//! summatory functions with a single final rounding.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{summatory_digit_sum, summatory_f};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fluctuation {
    Phi,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluctuationSample {
    pub n: u64,
    /// `log2(n) mod 1`.
    pub x: f64,
    pub value: f64,
}

/// `floor(log2 n)` and `log2(n) - floor(log2 n)`.
fn split_log2(n: u64) -> (u32, f64) {
    let j = u64::BITS - 1 - n.leading_zeros();
    let y = n as f64 / 2f64.powi(j as i32);
    (j, y.log2())
}

pub fn phi(n: u64) -> FluctuationSample {
    assert!(n >= 1, "phi is defined for n >= 1");
    let (j, x) = split_log2(n);
    // S(n)/n - j/2 = (2 S(n) - j n) / (2n), exactly zero at powers of two
    let r = 2 * summatory_digit_sum(n) as i128 - j as i128 * n as i128;
    FluctuationSample {
        n,
        x,
        value: r as f64 / (2.0 * n as f64) - x / 2.0,
    }
}

pub fn psi(n: u64) -> FluctuationSample {
    assert!(n >= 1, "psi is defined for n >= 1");
    let (j, x) = split_log2(n);
    // Sf(n) / n^(log2 3) = (Sf(n) / 3^j) / 2^(x log2 3); reduce the fraction
    // so that n and 2n round identically
    let (mut a, mut e) = (summatory_f(n), j);
    while e > 0 && a % 3 == 0 {
        a /= 3;
        e -= 1;
    }
    let ratio = a as f64 / 3f64.powi(e as i32);
    FluctuationSample {
        n,
        x,
        value: ratio / (x * 3f64.log2()).exp2(),
    }
}

impl Fluctuation {
    pub fn eval(self, n: u64) -> FluctuationSample {
        match self {
            Fluctuation::Phi => phi(n),
            Fluctuation::Psi => psi(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrema {
    pub inf: f64,
    pub argmin: u64,
    pub sup: f64,
    pub argmax: u64,
}

impl Extrema {
    fn of(s: FluctuationSample) -> Self {
        Self {
            inf: s.value,
            argmin: s.n,
            sup: s.value,
            argmax: s.n,
        }
    }

    /// Ties go to the smaller `n`, which keeps chunked scans deterministic.
    fn merge(self, o: Self) -> Self {
        let (inf, argmin) = if o.inf < self.inf || (o.inf == self.inf && o.argmin < self.argmin) {
            (o.inf, o.argmin)
        } else {
            (self.inf, self.argmin)
        };
        let (sup, argmax) = if o.sup > self.sup || (o.sup == self.sup && o.argmax < self.argmax) {
            (o.sup, o.argmax)
        } else {
            (self.sup, self.argmax)
        };
        Self { inf, argmin, sup, argmax }
    }
}

/// Exhaustive minimum and maximum over `lo..=hi`.
pub fn scan_extrema(kind: Fluctuation, lo: u64, hi: u64) -> Result<Extrema> {
    if lo < 1 || hi < lo {
        return Err(Error::InvalidArgument(format!("bad scan range {lo}..={hi}")));
    }
    const CHUNK: u64 = 1 << 16;
    let chunks: Vec<u64> = (lo..=hi).step_by(CHUNK as usize).collect();
    let parts: Vec<Extrema> = chunks
        .par_iter()
        .map(|&start| {
            let end = hi.min(start + CHUNK - 1);
            (start + 1..=end).fold(Extrema::of(kind.eval(start)), |e, n| e.merge(Extrema::of(kind.eval(n))))
        })
        .collect();
    Ok(parts.into_iter().reduce(Extrema::merge).expect("nonempty range"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationStats {
    pub kind: Fluctuation,
    pub inf: f64,
    pub sup: f64,
    /// Trapezoid-rule mean over one period, from the top octave.
    pub mean: f64,
    /// `(percent, value)` pairs from the measure of `{x : value < tau}`.
    pub percentiles: Vec<(f64, f64)>,
    /// `(bin_lo, bin_hi, mass)`.
    pub histogram: Vec<(f64, f64, f64)>,
    #[serde(skip)]
    pub samples: Vec<FluctuationSample>,
}

pub const PERCENT_LEVELS: [f64; 11] = [0.0, 1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0, 100.0];
pub const HISTOGRAM_BINS: usize = 64;

/// Samples `n = round(2^(j + i/m))` for `i < m` in octave `j`, without
/// repeats.
fn octave_samples(kind: Fluctuation, j: u32, m: usize) -> Vec<FluctuationSample> {
    let lo = 1u64 << j;
    let hi = (lo << 1) - 1;
    let mut ns: Vec<u64> = (0..m)
        .map(|i| ((j as f64 + i as f64 / m as f64).exp2().round() as u64).clamp(lo, hi))
        .collect();
    ns.dedup();
    ns.par_iter().map(|&n| kind.eval(n)).collect()
}

/// Width of the part of the period closest to each sample, for samples
/// sorted by `x`.
fn cell_widths(xs: &[f64]) -> Vec<f64> {
    let k = xs.len();
    (0..k)
        .map(|i| {
            let prev = if i == 0 { xs[k - 1] - 1.0 } else { xs[i - 1] };
            let next = if i + 1 == k { xs[0] + 1.0 } else { xs[i + 1] };
            (next - prev) / 2.0
        })
        .collect()
}

pub fn fluctuation_statistics(kind: Fluctuation, j_min: u32, j_max: u32, samples_per_octave: usize) -> Result<FluctuationStats> {
    if j_max > 40 || j_min >= j_max || samples_per_octave < 2 {
        return Err(Error::InvalidArgument(format!(
            "need j_min < j_max <= 40 and at least two samples per octave (got {j_min}, {j_max}, {samples_per_octave})"
        )));
    }
    let mut samples = Vec::new();
    for j in j_min..j_max {
        samples.extend(octave_samples(kind, j, samples_per_octave));
    }
    let inf = samples.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let sup = samples.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);

    let top = octave_samples(kind, j_max - 1, samples_per_octave);
    let xs: Vec<f64> = top.iter().map(|s| s.x).collect();
    let vs: Vec<f64> = top.iter().map(|s| s.value).collect();
    let k = top.len();
    // periodic trapezoid rule, closing the gap between the last sample and
    // the first one shifted by a period
    let mean = (0..k)
        .map(|i| {
            let (x1, v1) = if i + 1 == k { (xs[0] + 1.0, vs[0]) } else { (xs[i + 1], vs[i + 1]) };
            (x1 - xs[i]) * (vs[i] + v1) / 2.0
        })
        .sum();

    let widths = cell_widths(&xs);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| vs[a].total_cmp(&vs[b]));
    let mut cum = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &i in &order {
        acc += widths[i];
        cum.push(acc);
    }
    let percentiles = PERCENT_LEVELS
        .iter()
        .map(|&p| {
            let target = p / 100.0 * acc;
            let pos = cum.partition_point(|&c| c < target).min(k - 1);
            (p, vs[order[pos]])
        })
        .collect();

    let (lo, hi) = (vs[order[0]], vs[order[k - 1]]);
    let step = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut mass = vec![0.0; HISTOGRAM_BINS];
    for (v, w) in vs.iter().zip(&widths) {
        let b = if step > 0.0 { (((v - lo) / step) as usize).min(HISTOGRAM_BINS - 1) } else { 0 };
        mass[b] += w;
    }
    let histogram = mass
        .iter()
        .enumerate()
        .map(|(b, m)| (lo + b as f64 * step, lo + (b + 1) as f64 * step, *m))
        .collect();
    Ok(FluctuationStats {
        kind,
        inf,
        sup,
        mean,
        percentiles,
        histogram,
        samples,
    })
}

pub fn phi_statistics(j_min: u32, j_max: u32, samples_per_octave: usize) -> Result<FluctuationStats> {
    fluctuation_statistics(Fluctuation::Phi, j_min, j_max, samples_per_octave)
}

pub fn psi_statistics(j_min: u32, j_max: u32, samples_per_octave: usize) -> Result<FluctuationStats> {
    fluctuation_statistics(Fluctuation::Psi, j_min, j_max, samples_per_octave)
}

/// `n,x,value` rows.
pub fn write_samples_csv<W: Write>(samples: &[FluctuationSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "x", "value"])?;
    for s in samples {
        w.write_record([s.n.to_string(), format!("{:.17e}", s.x), format!("{:.17e}", s.value)])?;
    }
    w.flush()?;
    Ok(())
}

/// `bin_lo,bin_hi,mass` rows.
pub fn write_histogram_csv<W: Write>(histogram: &[(f64, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "mass"])?;
    for (lo, hi, m) in histogram {
        w.write_record([format!("{lo:.17e}"), format!("{hi:.17e}"), format!("{m:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_two_attain_sup() {
        for j in 0..40 {
            assert_eq!(phi(1 << j).value, 0.0);
            assert_eq!(psi(1 << j).value, 1.0);
            assert_eq!(phi(1 << j).x, 0.0);
        }
    }

    #[test]
    fn exact_periodicity() {
        for n in [3u64, 5, 7, 11, 12345, 999_999, 87_654_321] {
            assert_eq!(phi(n).value, phi(2 * n).value, "{n}");
            assert_eq!(psi(n).value, psi(2 * n).value, "{n}");
            assert_eq!(phi(n).x, phi(4 * n).x);
        }
    }

    #[test]
    fn sample_bounds() {
        for n in 1..20_000u64 {
            let p = phi(n).value;
            let s = psi(n).value;
            assert!(p <= 0.0, "phi({n}) = {p}");
            assert!(s > 0.0 && s <= 1.0, "psi({n}) = {s}");
        }
    }

    #[test]
    fn phi_matches_float_definition() {
        for n in [3u64, 10, 1000, 65_537] {
            let s: u64 = (0..n).map(|k| k.count_ones() as u64).sum();
            let direct = s as f64 / n as f64 - (n as f64).log2() / 2.0;
            assert!((phi(n).value - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_small_range() {
        let e = scan_extrema(Fluctuation::Phi, 2, 1 << 12).unwrap();
        assert_eq!(e.sup, 0.0);
        assert_eq!(e.argmax, 2);
        let brute = (2..=1u64 << 12).map(|n| phi(n).value).fold(f64::INFINITY, f64::min);
        assert_eq!(e.inf, brute);
        assert!(scan_extrema(Fluctuation::Phi, 0, 5).is_err());
    }

    #[test]
    fn statistics_shape() {
        let s = phi_statistics(8, 12, 512).unwrap();
        assert_eq!(s.percentiles.len(), PERCENT_LEVELS.len());
        assert_eq!(s.percentiles.last().unwrap().1, 0.0);
        let total: f64 = s.histogram.iter().map(|b| b.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(s.mean < 0.0 && s.mean > s.inf);
        assert!(phi_statistics(8, 41, 16).is_err());
    }

    #[test]
    fn csv_headers() {
        let s = psi_statistics(4, 6, 16).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&s.samples, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,x,value\n"));
        let mut buf = Vec::new();
        write_histogram_csv(&s.histogram, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bin_lo,bin_hi,mass\n"));
    }
}
