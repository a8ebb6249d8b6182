//! Assembled exponent reports and their JSON/CSV forms.

use std::io::Write;

use serde::Serialize;

use crate::conjugate::SentinelFactorization;
use crate::error::Result;
use crate::gle::generating::slab_sums;
use crate::gle::replica::replica_exponent;
use crate::gle::series::{accumulate_moments, sigma2_from_moments, sigma2_prefactor, MomentSeries};
use crate::gle::wynn::EpsilonTable;
use crate::exactmat::KRONECKER_CAP;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accelerated {
    /// Last partial sum.
    pub raw: f64,
    pub accel: f64,
    pub err: f64,
    /// Even Wynn column used (0 when acceleration is off).
    pub depth: usize,
}

impl Accelerated {
    fn from_partials(partials: &[f64], accel: bool) -> Self {
        let raw = *partials.last().expect("nonempty");
        let n = partials.len();
        if !accel || n < 3 {
            let err = if n >= 2 { (raw - partials[n - 2]).abs() } else { f64::INFINITY };
            return Self { raw, accel: raw, err, depth: 0 };
        }
        let table = EpsilonTable::new(partials).expect("at least three terms");
        // at most floor((n - 1) / 2) even columns
        let cap = 2 * ((n - 1) / 2);
        let est = table.estimate(Some(cap));
        Self {
            raw,
            accel: est.estimate,
            err: est.error,
            depth: est.column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LSample {
    pub t: f64,
    pub value: f64,
    /// Gap between the full-depth root and the one four lengths shallower.
    pub truncation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicaValue {
    pub t: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub schema_version: u32,
    pub family: String,
    pub q: u32,
    pub max_len: usize,
    pub lambda: Accelerated,
    pub kappa: Accelerated,
    pub mu: Accelerated,
    pub sigma2: Accelerated,
    #[serde(rename = "L_samples")]
    pub l_samples: Vec<LSample>,
    pub replica: Vec<ReplicaValue>,
    pub skipped_words: u64,
    #[serde(skip)]
    pub series: MomentSeries,
}

/// Propagates the three error bars through `c l^2 - 2 l k + m`.
fn sigma2_error(l: &Accelerated, k: &Accelerated, m: &Accelerated, q: u32) -> f64 {
    use num_traits::ToPrimitive;
    let c = sigma2_prefactor(q).to_f64().expect("small rational");
    (2.0 * c * l.accel - 2.0 * k.accel).abs() * l.err + 2.0 * l.accel.abs() * k.err + m.err
}

pub fn exponents(fact: &SentinelFactorization, family: &str, max_len: usize, accel: bool) -> Result<ExponentReport> {
    let series = accumulate_moments(fact, max_len);
    let q = fact.q();
    let lambda = Accelerated::from_partials(&series.lambda_partials(), accel);
    let kappa = Accelerated::from_partials(&series.kappa_partials(), accel);
    let mu = Accelerated::from_partials(&series.mu_partials(), accel);
    let sigma2 = Accelerated {
        raw: sigma2_from_moments(lambda.raw, kappa.raw, mu.raw, q),
        accel: sigma2_from_moments(lambda.accel, kappa.accel, mu.accel, q),
        err: sigma2_error(&lambda, &kappa, &mu, q),
        depth: lambda.depth.min(kappa.depth).min(mu.depth),
    };
    let mut replica = Vec::new();
    for t in 1..=2u32 {
        if fact.dim().pow(t) <= KRONECKER_CAP {
            replica.push(ReplicaValue {
                t,
                value: replica_exponent(fact.d0(), fact.d1(), t)?,
            });
        }
    }
    Ok(ExponentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        family: family.to_string(),
        q,
        max_len,
        lambda,
        kappa,
        mu,
        sigma2,
        l_samples: Vec::new(),
        replica,
        skipped_words: series.skipped,
        series,
    })
}

impl ExponentReport {
    /// Solves `L(t)` at each `t` from one extra pass over the words.
    pub fn add_l_samples(&mut self, fact: &SentinelFactorization, ts: &[f64], tol: f64) -> Result<()> {
        let slabs = slab_sums(fact, self.max_len, ts)?;
        for (i, &t) in ts.iter().enumerate() {
            let sol = slabs.solve_l(i, tol)?;
            self.l_samples.push(LSample {
                t,
                value: sol.l,
                truncation: sol.truncation_error(),
            });
        }
        Ok(())
    }

    pub fn replica_value(&self, t: u32) -> Option<f64> {
        self.replica.iter().find(|r| r.t == t).map(|r| r.value)
    }

    /// `(L(2) / ln 2, sigma^2 / ln 2)`.
    pub fn dispersion(&self) -> Option<(f64, f64)> {
        let ln2 = std::f64::consts::LN_2;
        self.replica_value(2).map(|x| (x.ln() / ln2, self.sigma2.accel / ln2))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-length cumulative partial sums with the prefactor applied.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_partials_csv(&self.series, out)
    }
}

pub fn write_partials_csv<W: Write>(series: &MomentSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["len", "words", "Slambda", "Skappa", "Smu"])?;
    let (l, k, m) = (series.lambda_partials(), series.kappa_partials(), series.mu_partials());
    for (i, slab) in series.slabs.iter().enumerate() {
        w.write_record([
            slab.len.to_string(),
            slab.words.to_string(),
            format!("{:.17e}", l[i]),
            format!("{:.17e}", k[i]),
            format!("{:.17e}", m[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(avg, typ) = (L(2) / ln 2, sigma^2 / ln 2)`.
pub fn dispersion_params(fact: &SentinelFactorization, max_len: usize) -> Result<(f64, f64)> {
    let ln2 = std::f64::consts::LN_2;
    let xi = replica_exponent(fact.d0(), fact.d1(), 2)?;
    let report = exponents(fact, "", max_len, true)?;
    Ok((xi.ln() / ln2, report.sigma2.accel / ln2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::RationalMatrix;

    fn binomial() -> SentinelFactorization {
        SentinelFactorization::new(&RationalMatrix::from_rows(&[&[1]]), &RationalMatrix::from_rows(&[&[2]]), 1).unwrap()
    }

    #[test]
    fn binomial_report() {
        let r = exponents(&binomial(), "g1", 36, true).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((r.lambda.accel - ln2 / 2.0).abs() < 1e-12, "{:?}", r.lambda);
        assert!((r.sigma2.accel / ln2 - 0.173_286_795_139_986_3).abs() < 1e-10);
        assert!(r.lambda.err >= 0.0 && r.sigma2.err >= 0.0);
        let (avg, typ) = r.dispersion().unwrap();
        assert!((avg - 1.321_928_094_887_362_3).abs() < 1e-12);
        assert!((typ - 0.173_286_795_139_986_3).abs() < 1e-10);
        assert_eq!(r.skipped_words, 0);
    }

    #[test]
    fn raw_mode_is_partial_sum() {
        let r = exponents(&binomial(), "g1", 10, false).unwrap();
        assert_eq!(r.lambda.accel, r.lambda.raw);
        assert_eq!(r.lambda.depth, 0);
    }

    #[test]
    fn json_and_csv() {
        let mut r = exponents(&binomial(), "g1", 12, true).unwrap();
        r.add_l_samples(&binomial(), &[1.0], 1e-12).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["family"], "g1");
        assert!(v["lambda"]["accel"].is_f64());
        assert_eq!(v["L_samples"].as_array().unwrap().len(), 1);
        assert_eq!(v["replica"][1]["t"], 2);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("len,words,Slambda,Skappa,Smu\n"));
        assert_eq!(text.lines().count(), 14);
    }
}
