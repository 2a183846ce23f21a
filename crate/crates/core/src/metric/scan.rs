//! Monte-Carlo dispersion scans over random dilation factors.
//!
//! Every task draws from its own ChaCha stream `(seed, index)`, so results do
//! not depend on scheduling or worker count.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{dilate_fixed, fixed_gap_to_f64, max_gap_fixed, DyadicReal, Precision, Rounding};

/// `epsilon` of the `(ln N)^(2 + epsilon)` column unless overridden.
pub const SCAN_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Lebesgue,
    /// I.i.d. partial quotients uniform on `1..=B`. A heuristic stand-in for a
    /// measure on badly approximable numbers; no Fourier decay is claimed.
    BoundedCf(u32),
}

impl Measure {
    pub fn label(&self) -> String {
        match self {
            Measure::Lebesgue => "lebesgue".into(),
            Measure::BoundedCf(b) => format!("bounded-cf({b})"),
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    /// Accepts `lebesgue`, `bounded-cf:B` and `bounded-cf(B)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "lebesgue" {
            return Ok(Measure::Lebesgue);
        }
        let unsupported = || Error::MeasureUnsupported(s.to_string());
        let arg = s
            .strip_prefix("bounded-cf:")
            .or_else(|| s.strip_prefix("bounded-cf(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(unsupported)?;
        let b: u32 = arg.trim().parse().map_err(|_| unsupported())?;
        if b == 0 {
            return Err(unsupported());
        }
        Ok(Measure::BoundedCf(b))
    }
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one dilation factor in `[0, 1)` known to `bits` fractional bits.
pub fn sample_alpha(measure: Measure, seed: u64, index: u64, bits: u64) -> Result<DyadicReal> {
    let mut rng = rng_for(seed, index);
    match measure {
        Measure::Lebesgue => {
            let words = bits.div_ceil(64) as usize;
            let digits: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
            let mut m = BigUint::from_slice(&digits.iter().flat_map(|d| [*d as u32, (*d >> 32) as u32]).collect::<Vec<_>>());
            let excess = words as u64 * 64 - bits;
            m >>= excess;
            Ok(DyadicReal::from_parts(BigInt::from(m), -(bits as i64)).with_precision(Precision::Bits(bits)))
        }
        Measure::BoundedCf(0) => Err(Error::MeasureUnsupported("bounded-cf(0)".into())),
        Measure::BoundedCf(b) => {
            // Convergents of [0; a_1, a_2, ...] until q^2 > 2^(bits + 2).
            let limit = BigUint::one() << (bits + 2);
            let (mut p0, mut q0) = (BigUint::one(), BigUint::zero());
            let (mut p1, mut q1) = (BigUint::zero(), BigUint::one());
            while &q1 * &q1 <= limit {
                let a: u32 = rng.gen_range(1..=b);
                let p2 = &p1 * a + &p0;
                let q2 = &q1 * a + &q0;
                p0 = std::mem::replace(&mut p1, p2);
                q0 = std::mem::replace(&mut q1, q2);
            }
            Ok(DyadicReal::from_ratio(&BigInt::from(p1), &BigInt::from(q1), bits, Rounding::NearestEven)?
                .with_precision(Precision::Bits(bits)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub alpha_id: usize,
    pub n: u64,
    /// Gap of the dilates truncated to 64 fractional bits, in units of `2^-64`;
    /// within `2^-64` of the exact gap.
    pub max_gap_fixed: u128,
    pub max_gap: f64,
    pub norm_log1: f64,
    pub norm_log2e: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub seed: Option<u64>,
    pub measure: String,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Summary { mean: v.iter().sum::<f64>() / v.len() as f64, median: percentile(&v, 0.5), p95: percentile(&v, 0.95) })
    }

    pub fn to_json(&self) -> Value {
        json!({ "mean": self.mean, "median": self.median, "p95": self.p95 })
    }
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ScanTable {
    pub fn n_values(&self) -> Vec<u64> {
        let mut ns: Vec<u64> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn column_for(&self, n: u64, f: impl Fn(&ScanRow) -> f64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.n == n).map(f).collect()
    }

    /// Per-`N` summaries of both normalized columns.
    pub fn summaries(&self) -> Vec<(u64, Summary, Summary)> {
        self.n_values()
            .into_iter()
            .map(|n| {
                let a = Summary::of(&self.column_for(n, |r| r.norm_log1)).expect("rows for n");
                let b = Summary::of(&self.column_for(n, |r| r.norm_log2e)).expect("rows for n");
                (n, a, b)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha_id,N,max_gap,norm_log1,norm_log2e\n");
        for r in &self.rows {
            let g = DyadicReal::from_parts(BigInt::from(r.max_gap_fixed), -64).to_decimal(20);
            writeln!(out, "{},{},{},{:e},{:e}", r.alpha_id, r.n, g, r.norm_log1, r.norm_log2e).expect("string write");
        }
        out
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "measure": self.measure,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "alphas": self.rows.iter().map(|r| r.alpha_id).max().map(|m| m + 1).unwrap_or(0),
            "per_N": self.summaries().into_iter().map(|(n, a, b)| json!({
                "N": n,
                "norm_log1": a.to_json(),
                "norm_log2e": b.to_json(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Gaps of `{alpha a_n}_{n <= N}` for every alpha and every `N` in `n_list`.
pub fn dispersion_scan(terms: &[BigUint], alphas: &[DyadicReal], n_list: &[u64], epsilon: f64) -> Result<ScanTable> {
    let n_max = n_list.iter().copied().max().unwrap_or(0) as usize;
    if n_list.contains(&0) {
        return Err(Error::EmptyConfiguration);
    }
    if n_max > terms.len() {
        return Err(Error::InvalidInput(format!("scan needs {n_max} terms, sequence has {}", terms.len())));
    }
    let per_alpha: Vec<Result<Vec<ScanRow>>> = alphas
        .par_iter()
        .enumerate()
        .map(|(id, alpha)| {
            let xs = dilate_fixed(alpha, &terms[..n_max])?;
            Ok(n_list
                .iter()
                .map(|&n| {
                    let mut pts = xs[..n as usize].to_vec();
                    let g = max_gap_fixed(&mut pts);
                    let gf = fixed_gap_to_f64(g);
                    let ln = (n as f64).ln();
                    let (norm_log1, norm_log2e) = if n > 1 {
                        (n as f64 * gf / ln, n as f64 * gf / ln.powf(2.0 + epsilon))
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    ScanRow { alpha_id: id, n, max_gap_fixed: g, max_gap: gf, norm_log1, norm_log2e }
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_alpha {
        rows.extend(r?);
    }
    Ok(ScanTable { rows, seed: None, measure: "explicit".into(), epsilon })
}

/// Samples `count` alphas with enough bits for `terms` and scans them.
pub fn random_scan(terms: &[BigUint], measure: Measure, seed: u64, count: usize, n_list: &[u64], epsilon: f64) -> Result<ScanTable> {
    let n_max = n_list.iter().copied().max().unwrap_or(0) as usize;
    let a_max = terms[..n_max.min(terms.len())].iter().max().cloned().unwrap_or_default();
    let bits = crate::numerics::required_bits(&a_max);
    let alphas: Vec<DyadicReal> =
        (0..count as u64).into_par_iter().map(|i| sample_alpha(measure, seed, i, bits)).collect::<Result<_>>()?;
    let mut table = dispersion_scan(terms, &alphas, n_list, epsilon)?;
    table.seed = Some(seed);
    table.measure = measure.label();
    Ok(table)
}

/// Maximal gaps of `N` i.i.d. uniform points, summarized as `N G / ln N`.
pub fn iid_baseline(n: u64, trials: u64, seed: u64) -> Result<Summary> {
    if n < 2 {
        return Err(Error::NBelowThreshold(format!("i.i.d. baseline needs N >= 2, got {n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    let ln = (n as f64).ln();
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let mut pts: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            n as f64 * fixed_gap_to_f64(max_gap_fixed(&mut pts)) / ln
        })
        .collect();
    Ok(Summary::of(&values).expect("trials > 0"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub median: f64,
    /// `(q25, q75)` of the per-alpha slopes.
    pub iqr: (f64, f64),
    pub slopes: Vec<f64>,
}

impl ExponentFit {
    pub fn to_json(&self) -> Value {
        json!({ "kappa_median": self.median, "kappa_q25": self.iqr.0, "kappa_q75": self.iqr.1, "alphas": self.slopes.len() })
    }
}

/// Per-alpha least-squares slope of `ln(N G)` against `ln ln N`.
pub fn exponent_fit(table: &ScanTable) -> Result<ExponentFit> {
    let ns: Vec<u64> = table.n_values().into_iter().filter(|&n| n >= 3).collect();
    let ids: std::collections::BTreeSet<usize> = table.rows.iter().map(|r| r.alpha_id).collect();
    if ns.len() < 3 || ids.len() < 10 {
        return Err(Error::FitUnderdetermined(format!("{} distinct N and {} alphas; need 3 and 10", ns.len(), ids.len())));
    }
    let mut slopes = Vec::with_capacity(ids.len());
    for id in ids {
        let pts: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter(|r| r.alpha_id == id && r.n >= 3)
            .map(|r| ((r.n as f64).ln().ln(), (r.n as f64 * r.max_gap).ln()))
            .collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx == 0.0 {
            return Err(Error::FitUnderdetermined(format!("alpha {id} has a single N")));
        }
        slopes.push(sxy / sxx);
    }
    let mut sorted = slopes.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(ExponentFit { median: percentile(&sorted, 0.5), iqr: (percentile(&sorted, 0.25), percentile(&sorted, 0.75)), slopes })
}
