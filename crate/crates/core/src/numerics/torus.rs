//! Points on the unit torus, maximal gaps, and dilates `{alpha * a_n}`.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde_json::json;

use super::dd::DoubleDouble;
use super::dyadic::{DyadicReal, Precision};
use crate::error::{Error, Result};

/// Default `epsilon` of the `(ln N)^(2+epsilon)` normalization column.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Number of significant digits used in decimal renderings.
pub const DECIMAL_DIGITS: usize = 30;

/// A dyadic in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TorusPoint(DyadicReal);

impl TorusPoint {
    pub fn new(x: DyadicReal) -> Result<Self> {
        if x.is_negative() || x >= DyadicReal::one() {
            return Err(Error::InvalidInput(format!("{} is not in [0, 1)", x.to_decimal(12))));
        }
        Ok(TorusPoint(x))
    }

    pub fn zero() -> Self {
        TorusPoint(DyadicReal::zero())
    }

    pub fn value(&self) -> &DyadicReal {
        &self.0
    }

    pub fn into_inner(self) -> DyadicReal {
        self.0
    }
}

pub fn frac(x: &DyadicReal) -> TorusPoint {
    TorusPoint(x.frac())
}

/// Distance to the nearest integer, in `[0, 1/2]`.
pub fn dist_nearest_int(x: &DyadicReal) -> DyadicReal {
    let f = x.frac();
    let g = &DyadicReal::one().with_precision(f.precision()) - &f;
    if f <= g {
        f
    } else {
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub log1: DyadicReal,
    pub log2: DyadicReal,
    pub log2_eps: DyadicReal,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub n_points: usize,
    pub sorted_points: Vec<TorusPoint>,
    /// `gaps[i]` follows `sorted_points[i]`; the last entry is the wrap-around gap.
    pub gaps: Vec<DyadicReal>,
    pub max_gap: DyadicReal,
    /// `N * G / (ln N)^kappa` for kappa in {1, 2, 2 + epsilon}; absent for N = 1.
    pub normalized: Option<Normalized>,
}

/// `n * g / (ln n)^kappa` in double-double precision; `n >= 2`.
pub fn normalize_gap(n: u64, g: DoubleDouble, kappa: DoubleDouble) -> DoubleDouble {
    let ln_n = DoubleDouble::from_u64(n).ln();
    DoubleDouble::from_u64(n) * g / ln_n.powf(kappa)
}

fn normalized_for(n: usize, max_gap: &DyadicReal, epsilon: f64) -> Option<Normalized> {
    if n < 2 {
        return None;
    }
    let g = DoubleDouble::from_dyadic(max_gap);
    let n = n as u64;
    let kappa_eps = DoubleDouble::from_f64(2.0) + DoubleDouble::from_f64(epsilon);
    Some(Normalized {
        log1: normalize_gap(n, g, DoubleDouble::ONE).to_dyadic(),
        log2: normalize_gap(n, g, DoubleDouble::from_f64(2.0)).to_dyadic(),
        log2_eps: normalize_gap(n, g, kappa_eps).to_dyadic(),
        epsilon,
    })
}

/// Gap report of integer numerators `v_i / 2^scale`, all `< 2^scale`.
fn report_from_scaled(mut nums: Vec<BigUint>, scale: u64, precision: Precision, epsilon: f64) -> Result<GapReport> {
    if nums.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    nums.sort_unstable();
    let one = BigUint::one() << scale;
    let n = nums.len();
    let mut gaps = Vec::with_capacity(n);
    let mut max_idx = 0;
    let mut max_num = BigUint::zero();
    for i in 0..n {
        let g = if i + 1 < n { &nums[i + 1] - &nums[i] } else { &one - &nums[n - 1] + &nums[0] };
        if g > max_num {
            max_num = g.clone();
            max_idx = i;
        }
        gaps.push(g);
    }
    let to_dyadic = |v: BigUint| DyadicReal::from_parts(num_bigint::BigInt::from(v), -(scale as i64)).with_precision(precision);
    let max_gap = to_dyadic(gaps[max_idx].clone());
    let normalized = normalized_for(n, &max_gap, epsilon);
    Ok(GapReport {
        n_points: n,
        sorted_points: nums.into_iter().map(|v| TorusPoint(to_dyadic(v))).collect(),
        gaps: gaps.into_iter().map(to_dyadic).collect(),
        max_gap,
        normalized,
    })
}

pub fn gap_report(points: &[TorusPoint]) -> Result<GapReport> {
    gap_report_with_epsilon(points, DEFAULT_EPSILON)
}

pub fn gap_report_with_epsilon(points: &[TorusPoint], epsilon: f64) -> Result<GapReport> {
    if points.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    let scale = points.iter().map(|p| (-p.0.exponent()).max(0) as u64).max().unwrap_or(0);
    let precision = points.iter().fold(Precision::Exact, |acc, p| match (acc, p.0.precision()) {
        (Precision::Exact, q) => q,
        (a, Precision::Exact) => a,
        (Precision::Bits(a), Precision::Bits(b)) => Precision::Bits(a.min(b)),
    });
    let nums = points.iter().map(|p| p.0.to_scaled_biguint(scale).expect("torus point in [0,1)")).collect();
    report_from_scaled(nums, scale, precision, epsilon)
}

impl GapReport {
    pub fn to_json(&self) -> serde_json::Value {
        let dec = |x: &DyadicReal| x.to_decimal(DECIMAL_DIGITS);
        json!({
            "n": self.n_points,
            "max_gap": dec(&self.max_gap),
            "normalized_log1": self.normalized.as_ref().map(|n| dec(&n.log1)),
            "normalized_log2": self.normalized.as_ref().map(|n| dec(&n.log2)),
        })
    }

    /// `n,max_gap,norm1,norm2`; empty normalization fields for a single point.
    pub fn to_csv_row(&self) -> String {
        let dec = |x: &DyadicReal| x.to_decimal(DECIMAL_DIGITS);
        let (n1, n2) = match &self.normalized {
            Some(n) => (dec(&n.log1), dec(&n.log2)),
            None => (String::new(), String::new()),
        };
        format!("{},{},{},{}", self.n_points, dec(&self.max_gap), n1, n2)
    }
}

/// Bits of `alpha` the dilation by terms up to `a_max` needs.
pub fn required_bits(a_max: &BigUint) -> u64 {
    a_max.bits() + 32
}

pub fn check_precision(alpha: &DyadicReal, a_max: &BigUint) -> Result<()> {
    let required = required_bits(a_max);
    match alpha.precision() {
        Precision::Exact => Ok(()),
        Precision::Bits(b) if b >= required => Ok(()),
        Precision::Bits(b) => Err(Error::PrecisionTooLow { required, available: b }),
    }
}

/// `x mod 2^bits`.
pub(crate) fn low_bits(x: &BigUint, bits: u64) -> BigUint {
    if x.bits() <= bits {
        return x.clone();
    }
    let words = bits.div_ceil(64) as usize;
    let mut digits: Vec<u64> = x.iter_u64_digits().take(words).collect();
    let rem = bits % 64;
    if rem != 0 {
        if let Some(last) = digits.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
    let mut out = BigUint::zero();
    for (i, d) in digits.into_iter().enumerate() {
        if d != 0 {
            out |= BigUint::from(d) << (64 * i);
        }
    }
    out
}

/// `alpha` reduced into `[0, 1)` as `(m, s)` with value `m / 2^s`.
fn reduced_alpha(alpha: &DyadicReal) -> (BigUint, u64) {
    let f = alpha.frac();
    if f.is_zero() {
        return (BigUint::zero(), 0);
    }
    let s = (-f.exponent()) as u64;
    (f.mantissa().magnitude().clone(), s)
}

/// Numerator of `{ (m / 2^s) * a }` at scale `2^s`.
fn dilate_numerator(m: &BigUint, s: u64, a: &BigUint) -> BigUint {
    let tz = a.trailing_zeros().unwrap_or(0);
    if tz >= s {
        return BigUint::zero();
    }
    let odd = a >> tz;
    let keep = s - tz;
    let prod = low_bits(m, keep) * odd;
    low_bits(&prod, keep) << tz
}

/// The dilates `{alpha * a}` for each term, exact for the dyadic `alpha`.
pub fn dilate(alpha: &DyadicReal, terms: &[BigUint]) -> Result<Vec<TorusPoint>> {
    let (nums, scale) = dilate_scaled(alpha, terms)?;
    let precision = dilate_precision(alpha, terms);
    Ok(nums
        .into_iter()
        .map(|v| TorusPoint(DyadicReal::from_parts(num_bigint::BigInt::from(v), -(scale as i64)).with_precision(precision)))
        .collect())
}

fn dilate_precision(alpha: &DyadicReal, terms: &[BigUint]) -> Precision {
    match alpha.precision() {
        Precision::Exact => Precision::Exact,
        Precision::Bits(b) => Precision::Bits(b.saturating_sub(terms.iter().map(|a| a.bits()).max().unwrap_or(0))),
    }
}

fn dilate_scaled(alpha: &DyadicReal, terms: &[BigUint]) -> Result<(Vec<BigUint>, u64)> {
    if let Some(a_max) = terms.iter().max() {
        check_precision(alpha, a_max)?;
    }
    let (m, s) = reduced_alpha(alpha);
    Ok((terms.iter().map(|a| dilate_numerator(&m, s, a)).collect(), s))
}

pub fn dilate_gap_report(alpha: &DyadicReal, terms: &[BigUint], epsilon: f64) -> Result<GapReport> {
    let (nums, scale) = dilate_scaled(alpha, terms)?;
    report_from_scaled(nums, scale, dilate_precision(alpha, terms), epsilon)
}

/// Exact maximal gap of the dilates without materializing the full report.
pub fn dilate_max_gap(alpha: &DyadicReal, terms: &[BigUint]) -> Result<DyadicReal> {
    let (mut nums, scale) = dilate_scaled(alpha, terms)?;
    if nums.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    nums.sort_unstable();
    let n = nums.len();
    let mut best = (BigUint::one() << scale) - &nums[n - 1] + &nums[0];
    for w in nums.windows(2) {
        let g = &w[1] - &w[0];
        if g > best {
            best = g;
        }
    }
    Ok(DyadicReal::from_parts(num_bigint::BigInt::from(best), -(scale as i64)).with_precision(dilate_precision(alpha, terms)))
}

/// Bits `[lo, lo + 64)` of `x` as a `u64`.
fn bit_window(x: &BigUint, lo: u64) -> u64 {
    let word = (lo / 64) as usize;
    let off = lo % 64;
    let mut it = x.iter_u64_digits().skip(word);
    let w0 = it.next().unwrap_or(0);
    if off == 0 {
        return w0;
    }
    let w1 = it.next().unwrap_or(0);
    (w0 >> off) | (w1 << (64 - off))
}

/// `floor({ (m / 2^s) * a } * 2^64)`.
fn dilate_fixed_one(m: &BigUint, s: u64, a: &BigUint) -> u64 {
    let tz = a.trailing_zeros().unwrap_or(0);
    if tz >= s {
        return 0;
    }
    let keep = s - tz;
    let odd = a >> tz;
    if odd.is_one() {
        // {m * 2^tz / 2^s} = (m mod 2^keep) / 2^keep
        return if keep >= 64 {
            bit_window(m, keep - 64)
        } else {
            let low = bit_window(m, 0) & ((1u64 << keep) - 1);
            low << (64 - keep)
        };
    }
    let prod = low_bits(m, keep) * odd;
    if keep >= 64 {
        bit_window(&prod, keep - 64)
    } else {
        let low = bit_window(&prod, 0) & ((1u64 << keep) - 1);
        low << (64 - keep)
    }
}

/// Dilates truncated to 64 fractional bits (error below `2^-64` each).
pub fn dilate_fixed(alpha: &DyadicReal, terms: &[BigUint]) -> Result<Vec<u64>> {
    if let Some(a_max) = terms.iter().max() {
        check_precision(alpha, a_max)?;
    }
    let (m, s) = reduced_alpha(alpha);
    Ok(terms.iter().map(|a| dilate_fixed_one(&m, s, a)).collect())
}

/// Maximal gap of 64-bit fixed-point torus points, in units of `2^-64`.
/// Sorts `points` in place.
pub fn max_gap_fixed(points: &mut [u64]) -> u128 {
    assert!(!points.is_empty(), "max_gap_fixed of an empty configuration");
    points.sort_unstable();
    let wrap = (1u128 << 64) - points[points.len() - 1] as u128 + points[0] as u128;
    points.windows(2).map(|w| (w[1] - w[0]) as u128).fold(wrap, u128::max)
}

/// `g / 2^64` as a double.
pub fn fixed_gap_to_f64(g: u128) -> f64 {
    g as f64 / 18446744073709551616.0
}
