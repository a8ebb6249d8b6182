//! Monte Carlo estimates of `lambda`, `sigma^2` and `L(t)` from random
//! products `D_{z_0} ... D_{z_{k-1}}` with fair coin digits.
//!
//! Every trial draws from its own ChaCha20 stream (`stream = trial index`),
//! and statistics are computed from the stored per-trial values in trial
//! order, so results do not depend on the number of worker threads.
//!
//! Besides `ln ||P_k||` each trial records `ln ||P_h||` for the prefix of
//! length `h = k / 2`. The plain estimators `mean / k` and `var / k` carry an
//! `O(1/k)` bias from the constant terms of `E ln ||P_k||` and
//! `Var ln ||P_k||`; the difference estimators
//! `(E ln ||P_k|| - E ln ||P_h||) / (k - h)` cancel it.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactmat::{FloatMatrix, RationalMatrix};

pub const SIM_SCHEMA_VERSION: u32 = 1;
/// Products are rescaled once their infinity norm exceeds `2^100`.
pub const RENORM_THRESHOLD: f64 = 1.2676506002282294e30;
/// Largest `|t|` accepted by [`simulate_moment`].
pub const MAX_MOMENT_T: f64 = 4.0;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    /// Word length.
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(k: usize, trials: usize, seed: u64) -> Result<Self> {
        let c = Self { k, trials, seed };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("word length must be at least 1".into()));
        }
        if self.trials < 2 {
            return Err(Error::InvalidArgument("at least two trials are needed".into()));
        }
        Ok(())
    }

    fn half(&self) -> usize {
        self.k / 2
    }
}

/// `ln ||P_h||` and `ln ||P_k||` for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialLogNorms {
    pub half: f64,
    pub full: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub t: f64,
    /// `(1/k) ln` of the sample mean of `||P_k||^t`.
    pub growth: f64,
    pub growth_se: f64,
    /// Two-length difference version of `growth`.
    pub growth_diff: f64,
    pub growth_diff_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub schema_version: u32,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Trials whose product vanished; they are excluded from every statistic.
    pub degenerate: usize,
    pub mean: f64,
    pub variance: f64,
    pub lambda_hat: f64,
    pub lambda_se: f64,
    pub sigma2_hat: f64,
    pub sigma2_se: f64,
    pub lambda_diff: f64,
    pub lambda_diff_se: f64,
    pub sigma2_diff: f64,
    pub sigma2_diff_se: f64,
    pub moment: Option<MomentEstimate>,
}

impl SimResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn inf_norm(m: &[f64], dim: usize) -> f64 {
    m.chunks(dim).map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Right-multiplies `p` by `d` in place using `tmp` as scratch.
fn mul_into(p: &mut [f64], d: &[f64], tmp: &mut [f64], dim: usize) {
    for i in 0..dim {
        for j in 0..dim {
            tmp[i * dim + j] = (0..dim).map(|l| p[i * dim + l] * d[l * dim + j]).sum();
        }
    }
    p.copy_from_slice(tmp);
}

/// Log infinity norms of one random product and its half-length prefix.
/// Returns `None` if the product becomes exactly zero.
fn run_trial(digits: &[FloatMatrix; 2], cfg: &SimConfig, trial: usize) -> Option<TrialLogNorms> {
    let dim = digits[0].dim();
    let mut rng = trial_rng(cfg.seed, trial);
    let mut p = FloatMatrix::identity(dim).entries().to_vec();
    let mut tmp = vec![0.0; dim * dim];
    let mut log_scale = 0.0;
    let mut half = 0.0;
    let mut bits = 0u64;
    for i in 0..cfg.k {
        if i == cfg.half() {
            half = log_scale + inf_norm(&p, dim).ln();
        }
        if i % 64 == 0 {
            bits = rng.next_u64();
        }
        let bit = (bits >> (i % 64)) & 1;
        mul_into(&mut p, digits[bit as usize].entries(), &mut tmp, dim);
        let n = inf_norm(&p, dim);
        if n == 0.0 {
            return None;
        }
        if n > RENORM_THRESHOLD {
            p.iter_mut().for_each(|x| *x /= n);
            log_scale += n.ln();
        }
    }
    let full = log_scale + inf_norm(&p, dim).ln();
    if cfg.half() == cfg.k {
        half = full;
    }
    Some(TrialLogNorms { half, full })
}

/// Per-trial log norms in trial order; `None` marks a vanished product.
pub fn trial_log_norms(d0: &RationalMatrix, d1: &RationalMatrix, cfg: &SimConfig) -> Result<Vec<Option<TrialLogNorms>>> {
    cfg.validate()?;
    if d0.dim() != d1.dim() {
        return Err(Error::DimensionMismatch {
            left: d0.dim(),
            right: d1.dim(),
        });
    }
    let digits = [d0.to_float(), d1.to_float()];
    Ok((0..cfg.trials).into_par_iter().map(|i| run_trial(&digits, cfg, i)).collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean of `xs`.
fn se_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

fn centered_squares(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).collect()
}

fn usable(values: &[Option<TrialLogNorms>]) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let kept: Vec<TrialLogNorms> = values.iter().flatten().copied().collect();
    let degenerate = values.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::DegenerateProduct {
            count: degenerate,
            trials: values.len(),
        });
    }
    Ok((
        kept.iter().map(|v| v.half).collect(),
        kept.iter().map(|v| v.full).collect(),
        degenerate,
    ))
}

fn summarize(cfg: &SimConfig, values: &[Option<TrialLogNorms>]) -> Result<SimResult> {
    let (half, full, degenerate) = usable(values)?;
    let k = cfg.k as f64;
    let span = (cfg.k - cfg.half()) as f64;
    let m = mean(&full);
    let var = variance(&full);
    let sq_full = centered_squares(&full);
    let diffs: Vec<f64> = full.iter().zip(&half).map(|(f, h)| f - h).collect();
    let sq_diff: Vec<f64> = sq_full.iter().zip(centered_squares(&half)).map(|(f, h)| f - h).collect();
    Ok(SimResult {
        schema_version: SIM_SCHEMA_VERSION,
        k: cfg.k,
        trials: cfg.trials,
        seed: cfg.seed,
        degenerate,
        mean: m,
        variance: var,
        lambda_hat: m / k,
        lambda_se: se_of_mean(&full) / k,
        sigma2_hat: var / k,
        sigma2_se: se_of_mean(&sq_full) / k,
        lambda_diff: mean(&diffs) / span,
        lambda_diff_se: se_of_mean(&diffs) / span,
        sigma2_diff: (var - variance(&half)) / span,
        sigma2_diff_se: se_of_mean(&sq_diff) / span,
        moment: None,
    })
}

pub fn simulate(d0: &RationalMatrix, d1: &RationalMatrix, cfg: &SimConfig) -> Result<SimResult> {
    summarize(cfg, &trial_log_norms(d0, d1, cfg)?)
}

/// `ln` of the sample mean of `exp(t x)` for the resampled indices.
fn log_mean_exp(shifted: &[f64], max: f64, t: f64, idx: impl Iterator<Item = usize>) -> f64 {
    let mut n = 0usize;
    let mut s = 0.0;
    for i in idx {
        s += shifted[i];
        n += 1;
    }
    max * t + (s / n as f64).ln()
}

/// `exp(t x_i - max_j t x_j)` together with `max_j x_j`-scaled shift.
fn shifted_exp(xs: &[f64], t: f64) -> (Vec<f64>, f64) {
    if t == 0.0 {
        return (vec![1.0; xs.len()], 0.0);
    }
    let m = xs.iter().map(|x| t * x).fold(f64::NEG_INFINITY, f64::max);
    (xs.iter().map(|x| (t * x - m).exp()).collect(), m / t)
}

pub fn simulate_moment(d0: &RationalMatrix, d1: &RationalMatrix, cfg: &SimConfig, t: f64) -> Result<SimResult> {
    if t.is_nan() || t.abs() > MAX_MOMENT_T {
        return Err(Error::InvalidArgument(format!("|t| must not exceed {MAX_MOMENT_T}")));
    }
    let values = trial_log_norms(d0, d1, cfg)?;
    let mut result = summarize(cfg, &values)?;
    let (half, full, _) = usable(&values)?;
    let n = full.len();
    let (ef, mf) = shifted_exp(&full, t);
    let (eh, mh) = shifted_exp(&half, t);
    let k = cfg.k as f64;
    let span = (cfg.k - cfg.half()) as f64;
    let growth_of = |idx: &[usize]| {
        let lf = log_mean_exp(&ef, mf, t, idx.iter().copied());
        let lh = log_mean_exp(&eh, mh, t, idx.iter().copied());
        (lf / k, (lf - lh) / span)
    };
    let all: Vec<usize> = (0..n).collect();
    let (growth, growth_diff) = growth_of(&all);
    let mut rng = trial_rng(cfg.seed, usize::MAX);
    let mut idx = vec![0usize; n];
    let (mut g, mut gd) = (Vec::new(), Vec::new());
    for _ in 0..BOOTSTRAP_RESAMPLES {
        idx.iter_mut().for_each(|i| *i = rng.gen_range(0..n));
        let (a, b) = growth_of(&idx);
        g.push(a);
        gd.push(b);
    }
    result.moment = Some(MomentEstimate {
        t,
        growth,
        growth_se: variance(&g).sqrt(),
        growth_diff,
        growth_diff_se: variance(&gd).sqrt(),
    });
    Ok(result)
}

/// Per-trial log norms as CSV (`trial,log_norm_half,log_norm`); vanished
/// products are written with empty fields.
pub fn write_trials_csv<W: Write>(values: &[Option<TrialLogNorms>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "log_norm_half", "log_norm"])?;
    for (i, v) in values.iter().enumerate() {
        let (h, f) = v.map_or((String::new(), String::new()), |v| {
            (format!("{:.17e}", v.half), format!("{:.17e}", v.full))
        });
        w.write_record([i.to_string(), h, f])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial() -> (RationalMatrix, RationalMatrix) {
        (RationalMatrix::from_rows(&[&[1]]), RationalMatrix::from_rows(&[&[2]]))
    }

    fn trinomial() -> (RationalMatrix, RationalMatrix) {
        (
            RationalMatrix::from_rows(&[&[1, 2], &[0, 0]]),
            RationalMatrix::from_rows(&[&[1, 2], &[1, 0]]),
        )
    }

    fn quadrinomial() -> (RationalMatrix, RationalMatrix) {
        (
            RationalMatrix::from_rows(&[&[1, 2, 0], &[0, 0, 1], &[0, 0, 0]]),
            RationalMatrix::from_rows(&[&[0, 0, 0], &[2, 0, 0], &[0, 1, 2]]),
        )
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 10, 1).is_err());
        assert!(SimConfig::new(4, 1, 1).is_err());
        assert!(SimConfig::new(1, 2, 1).is_ok());
    }

    #[test]
    fn binomial_counts_ones() {
        let (d0, d1) = binomial();
        let cfg = SimConfig::new(100, 50, 9).unwrap();
        let v = trial_log_norms(&d0, &d1, &cfg).unwrap();
        for (i, x) in v.iter().enumerate() {
            let mut rng = trial_rng(9, i);
            let (a, b) = (rng.next_u64(), rng.next_u64());
            let ones = a.count_ones() + (b & ((1 << 36) - 1)).count_ones();
            let x = x.unwrap();
            assert!((x.full - ones as f64 * std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn renormalization_matches_naive_product() {
        let (d0, d1) = trinomial();
        let digits = [d0.to_float(), d1.to_float()];
        for k in 1..=20 {
            let cfg = SimConfig::new(k, 4, 3).unwrap();
            for trial in 0..4 {
                let got = run_trial(&digits, &cfg, trial).unwrap();
                let mut rng = trial_rng(3, trial);
                let bits = rng.next_u64();
                let mut p = FloatMatrix::identity(2);
                for i in 0..k {
                    p = p.mul(&digits[((bits >> i) & 1) as usize]);
                }
                assert!((got.full - p.inf_norm().ln()).abs() < 1e-12);
            }
        }
        // force renormalization: 2^120 overflows the threshold
        let (b0, b1) = binomial();
        let cfg = SimConfig::new(200, 3, 5).unwrap();
        let v = trial_log_norms(&b0, &b1, &cfg).unwrap();
        assert!(v.iter().all(|x| x.unwrap().full > 60.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let (d0, d1) = trinomial();
        let cfg = SimConfig::new(64, 500, 42).unwrap();
        let a = simulate(&d0, &d1, &cfg).unwrap();
        let b = simulate(&d0, &d1, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&d0, &d1, &SimConfig::new(64, 500, 43).unwrap()).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let (d0, d1) = trinomial();
        let cfg = SimConfig::new(64, 300, 7).unwrap();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = serial.install(|| simulate(&d0, &d1, &cfg)).unwrap();
        let b = wide.install(|| simulate(&d0, &d1, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binomial_lambda() {
        let (d0, d1) = binomial();
        let r = simulate(&d0, &d1, &SimConfig::new(64, 100_000, 1).unwrap()).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((r.lambda_hat - ln2 / 2.0).abs() < 4.0 * r.lambda_se, "{r:?}");
        assert!((r.sigma2_hat - ln2 * ln2 / 4.0).abs() < 4.0 * r.sigma2_se, "{r:?}");
        assert_eq!(r.degenerate, 0);
        assert!(r.variance >= 0.0 && r.lambda_se.is_finite());
    }

    #[test]
    fn bias_shrinks_with_length() {
        // ln ||P_k|| / ln 2 is Binomial(k, 1/2), so the estimator is unbiased
        // and the bound only has to absorb sampling noise
        let (d0, d1) = binomial();
        let lam = std::f64::consts::LN_2 / 2.0;
        let a = simulate(&d0, &d1, &SimConfig::new(32, 20_000, 11).unwrap()).unwrap();
        let b = simulate(&d0, &d1, &SimConfig::new(64, 20_000, 11).unwrap()).unwrap();
        let combined = (a.lambda_se.powi(2) + b.lambda_se.powi(2)).sqrt();
        assert!((b.lambda_hat - lam).abs() <= (a.lambda_hat - lam).abs() + 4.0 * combined);
    }

    #[test]
    fn moment_t_zero_is_zero() {
        let (d0, d1) = trinomial();
        let r = simulate_moment(&d0, &d1, &SimConfig::new(16, 100, 2).unwrap(), 0.0).unwrap();
        let m = r.moment.unwrap();
        assert_eq!(m.growth, 0.0);
        assert_eq!(m.growth_diff, 0.0);
    }

    #[test]
    fn moment_guard() {
        let (d0, d1) = binomial();
        let cfg = SimConfig::new(8, 10, 2).unwrap();
        assert!(simulate_moment(&d0, &d1, &cfg, 4.5).is_err());
        assert!(simulate_moment(&d0, &d1, &cfg, f64::NAN).is_err());
    }

    #[test]
    fn binomial_second_moment() {
        let (d0, d1) = binomial();
        let r = simulate_moment(&d0, &d1, &SimConfig::new(32, 1_000_000, 5).unwrap(), 2.0).unwrap();
        let m = r.moment.unwrap();
        assert!((m.growth - 2.5f64.ln()).abs() < 4.0 * m.growth_se, "{m:?}");
    }

    #[test]
    fn quadrinomial_first_moment() {
        let (d0, d1) = quadrinomial();
        let r = simulate_moment(&d0, &d1, &SimConfig::new(32, 200_000, 5).unwrap(), 1.0).unwrap();
        let m = r.moment.unwrap();
        assert!((m.growth_diff - 1.5f64.ln()).abs() < 4.0 * m.growth_diff_se, "{m:?}");
    }

    #[test]
    fn degenerate_products_excluded() {
        let z = RationalMatrix::zeros(1);
        let one = RationalMatrix::from_rows(&[&[1]]);
        let r = simulate(&z, &one, &SimConfig::new(3, 64, 1).unwrap()).unwrap();
        assert!(r.degenerate > 0 && r.degenerate < 64);
        assert_eq!(r.mean, 0.0);
        assert!(matches!(
            simulate(&z, &z, &SimConfig::new(3, 8, 1).unwrap()),
            Err(Error::DegenerateProduct { count: 8, trials: 8 })
        ));
    }

    #[test]
    fn csv_output() {
        let (d0, d1) = binomial();
        let v = trial_log_norms(&d0, &d1, &SimConfig::new(4, 3, 1).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_trials_csv(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("trial,log_norm_half,log_norm\n"));
    }
}
