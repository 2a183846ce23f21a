//! Lacunary sequences with `a_n ||beta a_n - zeta|| <= 8`, and scans of the
//! inhomogeneous Littlewood product `n ||alpha n - eta|| ||beta n - zeta||`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cf::{expand, inhom_distance, lambda_estimate, ContinuedFraction, RealSpec};
use crate::error::{Error, Result};
use crate::numerics::{dist_nearest_int, DoubleDouble, DyadicReal, Precision};
use crate::sequences::ln_biguint;

/// Products `a ||beta a - zeta||` allowed in a sequence.
pub const PRODUCT_BOUND: u32 = 8;
/// Minimal ratio between consecutive terms, and base of the lower growth bound.
pub const GROWTH: u32 = 8;
/// A growth-rate estimate above this is treated as a Liouville-type `beta`.
pub const LAMBDA_CAP: f64 = 64.0;
/// Expansion attempts, each doubling the bit budget, before giving up.
const ATTEMPTS: u32 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct CzTerm {
    /// 1-based index.
    pub n: usize,
    pub a: BigUint,
    /// `a ||beta a - zeta||`, recomputed independently of the construction.
    pub product: DyadicReal,
    /// `8^n < a`.
    pub lower_ok: bool,
    /// `a <= 4^(6 Lambda n)` with the estimated `Lambda`.
    pub upper_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CzSequence {
    pub beta: RealSpec,
    pub zeta: DyadicReal,
    pub lambda_beta: DyadicReal,
    pub cf_depth: usize,
    pub terms: Vec<CzTerm>,
}

impl CzSequence {
    pub fn values(&self) -> Vec<BigUint> {
        self.terms.iter().map(|t| t.a.clone()).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "beta": self.beta.to_string(),
            "zeta": self.zeta.to_decimal(30),
            "lambda_beta": self.lambda_beta.to_decimal(20),
            "cf_depth": self.cf_depth,
            "terms": self.terms.iter().map(|t| json!({
                "n": t.n,
                "a": t.a.to_string(),
                "product": t.product.to_decimal(30),
                "lower_ok": t.lower_ok,
                "upper_ok": t.upper_ok,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Candidates from a signed-digit expansion `zeta ~ sum_k b_k theta_k` in the
/// system `theta_k = q_k beta' - p_k` (`beta'` the fractional part), with each
/// digit the nearest integer so the residual after step `k` is at most
/// `|theta_k| / 2`. The partial sums `A_K = sum_{k<K} b_k q_k` then satisfy
/// `||A_K beta - zeta|| <= |theta_{K-1}| / 2`; negative sums are shifted by
/// multiples of `q_K`, which moves the dilate by multiples of `|theta_K|`.
fn ostrowski_candidates(cf: &ContinuedFraction, beta_frac: &DyadicReal, zeta: &DyadicReal) -> Vec<BigUint> {
    let a0 = &cf.a0;
    let half = DyadicReal::one().mul_pow2(-1);
    let mut rho = zeta.frac();
    if rho >= half {
        rho = &rho - &DyadicReal::one();
    }
    let mut out = Vec::new();
    let mut acc = BigInt::zero();
    for k in 0..cf.depth() {
        let qk = BigInt::from(cf.q[k].clone());
        let pk = &cf.p[k] - a0 * &qk;
        let theta = &(beta_frac * &DyadicReal::from_int(qk.clone())) - &DyadicReal::from_int(pk);
        let ratio = rho.to_rational() / theta.to_rational();
        let b = ratio.round().to_integer();
        if !b.is_zero() {
            rho = &rho - &theta.mul_int(&b);
            acc += &b * &qk;
        }
        let next = BigInt::from(cf.q[k + 1].clone());
        let mut n = acc.clone();
        while n.sign() != num_bigint::Sign::Plus {
            n += &next;
        }
        out.push(n.magnitude().clone());
    }
    out.sort();
    out.dedup();
    out
}

fn ln_big(a: &BigUint) -> DoubleDouble {
    ln_biguint(a)
}

/// Builds `n_max` terms, rechecking every emitted term at full precision.
pub fn cz_build(beta: &RealSpec, zeta: &DyadicReal, n_max: usize) -> Result<CzSequence> {
    if let RealSpec::Rational(_) = beta {
        return Err(Error::InvalidInput("beta must be irrational".into()));
    }
    let homogeneous = zeta.frac().is_zero();
    let ln4 = DoubleDouble::from_u64(4).ln();
    let mut target_bits = 3 * n_max as u64 + 3 * GROWTH as u64 + 16;
    let mut best: Option<CzSequence> = None;
    for _ in 0..ATTEMPTS {
        // Depth with q_depth comfortably above 2^target_bits.
        let mut depth = 16usize;
        let cf = loop {
            let cf = match expand(beta, depth) {
                Ok(cf) => cf,
                Err(Error::CfPrecisionExhausted { reliable }) if reliable >= 2 => expand(beta, reliable)?,
                Err(e) => return Err(e),
            };
            if cf.q.last().map(|q| q.bits()).unwrap_or(0) > target_bits || cf.depth() < depth {
                break cf;
            }
            depth *= 2;
        };
        let lambda = lambda_estimate(&cf)?;
        if lambda.to_f64() > LAMBDA_CAP {
            return Err(Error::BetaLiouvilleSuspect(lambda.to_decimal(10)));
        }
        let q_max_bits = cf.q.last().map(|q| q.bits()).unwrap_or(1);
        let work = 2 * q_max_bits + 64 + zeta_bits(zeta);
        let beta_frac = beta.approx(work).with_precision(Precision::Exact).frac();
        let pool: Vec<BigUint> =
            if homogeneous { cf.q.iter().skip(1).cloned().collect() } else { ostrowski_candidates(&cf, &beta_frac, zeta) };
        let lambda_dd = DoubleDouble::from_dyadic(&lambda);
        let mut terms: Vec<CzTerm> = Vec::new();
        for a in pool {
            let n = terms.len() + 1;
            if n > n_max {
                break;
            }
            let lower_ok = a > BigUint::from(GROWTH).pow(n as u32);
            let ratio_ok = terms.last().map(|t| a >= &t.a * GROWTH).unwrap_or(true);
            if !lower_ok || !ratio_ok {
                continue;
            }
            let product = recheck_product(beta, zeta, &a)?;
            if product > DyadicReal::from_int(BigInt::from(PRODUCT_BOUND)) {
                continue;
            }
            let ln_a = ln_big(&a);
            let upper = lambda_dd.mul_f64(6.0) * DoubleDouble::from_u64(n as u64) * ln4;
            let upper_ok = (upper - ln_a).to_f64() >= 0.0;
            terms.push(CzTerm { n, a, product, lower_ok, upper_ok });
        }
        let seq = CzSequence { beta: beta.clone(), zeta: zeta.clone(), lambda_beta: lambda, cf_depth: cf.depth(), terms };
        if seq.terms.len() >= n_max {
            return Ok(seq);
        }
        let exhausted = cf.depth() < depth;
        best = Some(seq);
        if exhausted {
            break;
        }
        target_bits *= 2;
    }
    let achieved = best.map(|s| s.terms.len()).unwrap_or(0);
    Err(Error::CzPoolExhausted { achieved, requested: n_max })
}

fn zeta_bits(zeta: &DyadicReal) -> u64 {
    match zeta.precision() {
        Precision::Exact => (-zeta.exponent()).max(0) as u64,
        Precision::Bits(_) => 0,
    }
}

/// `a ||beta a - zeta||` from a fresh approximation of `beta`.
fn recheck_product(beta: &RealSpec, zeta: &DyadicReal, a: &BigUint) -> Result<DyadicReal> {
    let d = inhom_distance(beta, &BigInt::from(a.clone()), zeta)?;
    Ok(d.mul_int(&BigInt::from(a.clone())))
}

/// Independent check of both growth bounds, the ratio and the product bound.
/// Returns the indices of failing terms.
pub fn verify_cz(seq: &CzSequence) -> Result<Vec<usize>> {
    let mut bad = Vec::new();
    let lambda = DoubleDouble::from_dyadic(&seq.lambda_beta);
    let ln4 = DoubleDouble::from_u64(4).ln();
    for (i, t) in seq.terms.iter().enumerate() {
        // Doubled precision, computed without the builder's working values.
        let bits = 2 * (t.a.bits() + 64);
        let b = seq.beta.approx(bits);
        let prod = &b * &DyadicReal::from_biguint(&t.a);
        let p = dist_nearest_int(&(&prod - &seq.zeta)).mul_int(&BigInt::from(t.a.clone()));
        let product_ok = p <= DyadicReal::from_int(BigInt::from(PRODUCT_BOUND));
        let lower = t.a > BigUint::from(GROWTH).pow(t.n as u32);
        let ratio = i == 0 || t.a >= &seq.terms[i - 1].a * GROWTH;
        let upper = (lambda.mul_f64(6.0) * DoubleDouble::from_u64(t.n as u64) * ln4 - ln_big(&t.a)).to_f64() >= 0.0;
        if !(product_ok && lower && ratio && upper == t.upper_ok) {
            bad.push(t.n);
        }
    }
    Ok(bad)
}

/// `(ln ln n)^(2 + eps) / ln n`; defined for `n >= 3`.
pub fn littlewood_threshold(n: &BigUint, epsilon: f64) -> Option<f64> {
    if n < &BigUint::from(3u32) {
        return None;
    }
    let l = ln_big(n).to_f64();
    Some(l.ln().powf(2.0 + epsilon) / l)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScanMode {
    /// Every `n` in `1..=limit`.
    Brute(u64),
    /// The given `n` values.
    Terms(Vec<BigUint>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub n: BigUint,
    pub product: DyadicReal,
    /// The product recomputed at doubled precision.
    pub product_doubled: DyadicReal,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LittlewoodReport {
    pub alpha: RealSpec,
    pub beta: RealSpec,
    pub eta: DyadicReal,
    pub zeta: DyadicReal,
    pub epsilon: f64,
    pub evaluated: u64,
    pub solutions: Vec<Solution>,
    /// Candidates that failed the doubled-precision recheck.
    pub flipped: usize,
    /// Solutions per block `[2^j, 2^(j+1))`, keyed by `j`.
    pub block_counts: BTreeMap<u64, usize>,
}

impl LittlewoodReport {
    pub fn to_json(&self) -> Value {
        json!({
            "alpha": self.alpha.to_string(),
            "beta": self.beta.to_string(),
            "eta": self.eta.to_decimal(30),
            "zeta": self.zeta.to_decimal(30),
            "epsilon": self.epsilon,
            "evaluated": self.evaluated,
            "solutions": self.solutions.len(),
            "flipped": self.flipped,
            "block_counts": self.block_counts.iter().map(|(j, c)| json!({ "block": j, "count": c })).collect::<Vec<_>>(),
        })
    }

    pub fn solutions_csv(&self) -> String {
        let mut out = String::from("n,product,product_doubled,threshold\n");
        for s in &self.solutions {
            writeln!(out, "{},{},{},{:e}", s.n, s.product.to_decimal(30), s.product_doubled.to_decimal(30), s.threshold)
                .expect("string write");
        }
        out
    }
}

/// `n ||alpha n - eta|| ||beta n - zeta||` with both reals taken to `bits` fractional bits.
fn product_at(alpha: &RealSpec, beta: &RealSpec, eta: &DyadicReal, zeta: &DyadicReal, n: &BigUint, bits: u64) -> DyadicReal {
    let nd = DyadicReal::from_biguint(n);
    let a = alpha.approx(bits);
    let b = beta.approx(bits);
    let da = dist_nearest_int(&(&(&a * &nd) - eta));
    let db = dist_nearest_int(&(&(&b * &nd) - zeta));
    &(&da * &db) * &nd
}

fn check_spec_precision(x: &RealSpec, n_max: &BigUint) -> Result<()> {
    if let RealSpec::Dyadic(v) = x {
        crate::numerics::check_precision(v, n_max)?;
    }
    Ok(())
}

/// Evaluates the product along the chosen `n` and keeps confirmed solutions.
pub fn littlewood_scan(
    alpha: &RealSpec,
    beta: &RealSpec,
    eta: &DyadicReal,
    zeta: &DyadicReal,
    epsilon: f64,
    mode: &ScanMode,
) -> Result<LittlewoodReport> {
    let n_max = match mode {
        ScanMode::Brute(limit) => BigUint::from(*limit),
        ScanMode::Terms(v) => v.iter().max().cloned().unwrap_or_default(),
    };
    check_spec_precision(alpha, &n_max)?;
    check_spec_precision(beta, &n_max)?;
    let work = n_max.bits() + 64 + zeta_bits(eta).max(zeta_bits(zeta));
    let evaluate = |n: &BigUint| -> Option<(Solution, bool)> {
        let threshold = littlewood_threshold(n, epsilon)?;
        let product = product_at(alpha, beta, eta, zeta, n, work);
        // Screen with a little headroom, then decide at doubled precision.
        if product.to_f64() > threshold * (1.0 + 1e-9) {
            return None;
        }
        let product_doubled = product_at(alpha, beta, eta, zeta, n, 2 * work);
        let ok = product_doubled.to_f64() <= threshold && product.to_f64() <= threshold;
        Some((Solution { n: n.clone(), product, product_doubled, threshold }, ok))
    };
    let (found, evaluated): (Vec<(Solution, bool)>, u64) = match mode {
        ScanMode::Brute(limit) => {
            let (fa, fb) = (fixed_frac(alpha), fixed_frac(beta));
            let (fe, fz) = (fixed_point(eta), fixed_point(zeta));
            let hits: Vec<(Solution, bool)> = (1..=*limit)
                .into_par_iter()
                .filter(|&n| {
                    // 128-bit screen: error below n 2^-128 per factor.
                    let Some(t) = littlewood_threshold(&BigUint::from(n), epsilon) else { return false };
                    let da = fixed_dist(fa.wrapping_mul(n as u128).wrapping_sub(fe));
                    let db = fixed_dist(fb.wrapping_mul(n as u128).wrapping_sub(fz));
                    n as f64 * da * db <= t * (1.0 + 1e-6)
                })
                .filter_map(|n| evaluate(&BigUint::from(n)))
                .collect();
            (hits, *limit)
        }
        ScanMode::Terms(v) => (v.par_iter().filter_map(evaluate).collect(), v.len() as u64),
    };
    let mut solutions = Vec::new();
    let mut flipped = 0;
    let mut block_counts = BTreeMap::new();
    for (s, ok) in found {
        if ok {
            *block_counts.entry(s.n.bits() - 1).or_insert(0) += 1;
            solutions.push(s);
        } else {
            flipped += 1;
        }
    }
    solutions.sort_by(|a, b| a.n.cmp(&b.n));
    Ok(LittlewoodReport {
        alpha: alpha.clone(),
        beta: beta.clone(),
        eta: eta.clone(),
        zeta: zeta.clone(),
        epsilon,
        evaluated,
        solutions,
        flipped,
        block_counts,
    })
}

fn fixed_frac(x: &RealSpec) -> u128 {
    fixed_point(&x.approx(130))
}

/// `floor(frac(x) 2^128)`.
fn fixed_point(x: &DyadicReal) -> u128 {
    x.frac().mul_pow2(128).floor().to_u128().unwrap_or(0)
}

fn fixed_dist(v: u128) -> f64 {
    let d = v.min(v.wrapping_neg());
    d as f64 / 2f64.powi(128)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockBest {
    pub big_n: usize,
    /// Index in `(N, 2N]` minimizing the distance.
    pub n: usize,
    pub distance: DyadicReal,
    /// `(ln n)^(2 + eps) / n`.
    pub bound: f64,
    pub meets: bool,
}

/// For each dyadic `N`, the best `||alpha a_n - eta||` over `N < n <= 2N`.
/// Blocks with no terms are skipped.
pub fn dispersion_to_littlewood(alpha: &RealSpec, eta: &DyadicReal, terms: &[BigUint], epsilon: f64) -> Result<Vec<BlockBest>> {
    let a_max = terms.iter().max().cloned().unwrap_or_default();
    check_spec_precision(alpha, &a_max)?;
    let bits = a_max.bits() + 64 + zeta_bits(eta);
    let a = alpha.approx(bits);
    let mut rows = Vec::new();
    if terms.len() == 1 {
        let d = dist_nearest_int(&(&(&a * &DyadicReal::from_biguint(&terms[0])) - eta));
        rows.push(BlockBest { big_n: 0, n: 1, meets: false, bound: f64::NAN, distance: d });
        return Ok(rows);
    }
    let mut big_n = 1usize;
    while big_n < terms.len() {
        let hi = (2 * big_n).min(terms.len());
        let best = (big_n + 1..=hi)
            .map(|n| (n, dist_nearest_int(&(&(&a * &DyadicReal::from_biguint(&terms[n - 1])) - eta))))
            .min_by(|x, y| x.1.cmp(&y.1));
        if let Some((n, distance)) = best {
            let nf = n as f64;
            let bound = nf.ln().powf(2.0 + epsilon) / nf;
            let meets = distance.to_f64() <= bound;
            rows.push(BlockBest { big_n, n, distance, bound, meets });
        }
        big_n *= 2;
    }
    Ok(rows)
}

/// Per-term ratio `((ln n)^(2+eps) / n) / ((ln ln a_n)^(2+eps) / ln a_n)` and
/// the constant `C = 6 Lambda ln 4` that bounds it once `ln a_n >= e^(2+eps)`.
pub fn chain_ratios(seq: &CzSequence, epsilon: f64) -> (Vec<f64>, f64) {
    let c = 6.0 * seq.lambda_beta.to_f64() * 4f64.ln();
    let ratios = seq
        .terms
        .iter()
        .map(|t| {
            let n = t.n as f64;
            let la = ln_big(&t.a).to_f64();
            let lhs = if t.n == 1 { 0.0 } else { n.ln().powf(2.0 + epsilon) / n };
            lhs / (la.ln().powf(2.0 + epsilon) / la)
        })
        .collect();
    (ratios, c)
}

pub fn cz_csv(seq: &CzSequence) -> String {
    let mut out = String::from("n,a_n,product,lower_ok,upper_ok\n");
    for t in &seq.terms {
        writeln!(out, "{},{},{},{},{}", t.n, t.a, t.product.to_decimal(30), t.lower_ok, t.upper_ok).expect("string write");
    }
    out
}
