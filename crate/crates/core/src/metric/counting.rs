//! Smoothed counts `omega(alpha) = sum_u sum_n f((alpha b_n - t - u) / w)` of
//! dilates in a window of width `w = M/N` around `t`, evaluated directly and
//! through Poisson summation.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::bump::{BumpFunction, NEGLIGIBLE_FROM};
use super::params::MetricParameters;
use crate::error::{Error, Result};
use crate::numerics::{dilate_fixed, DyadicReal, TorusPoint};

/// Signed offsets `{alpha b_n - t}` mapped into `[-1/2, 1/2)`.
pub fn centered_offsets(alpha: &DyadicReal, terms: &[BigUint], t: &TorusPoint) -> Result<Vec<f64>> {
    let xs = dilate_fixed(alpha, terms)?;
    Ok(offsets_fixed(&xs, fixed_point(t)))
}

/// `floor(t * 2^64)`.
pub fn fixed_point(t: &TorusPoint) -> u64 {
    t.value().mul_pow2(64).floor().to_u64().unwrap_or(0)
}

fn offsets_fixed(xs: &[u64], t: u64) -> Vec<f64> {
    xs.iter().map(|&x| (x.wrapping_sub(t) as i64) as f64 / 18446744073709551616.0).collect()
}

/// Direct count from dilates already in 64-bit fixed point.
pub fn count_direct_fixed(xs: &[u64], t: u64, w: f64, bump: &BumpFunction) -> f64 {
    offsets_fixed(xs, t).iter().map(|d| bump.eval(d / w)).sum()
}

fn check_width(params: &MetricParameters) -> Result<f64> {
    let w = params.width();
    if w >= 0.5 {
        return Err(Error::NBelowThreshold(format!("window width M/N = {w:.3} is not below 1/2")));
    }
    Ok(w)
}

/// Direct evaluation; with `w < 1/2` only the nearest translate `u` contributes.
pub fn smooth_count_direct(
    alpha: &DyadicReal,
    terms: &[BigUint],
    t: &TorusPoint,
    params: &MetricParameters,
    bump: &BumpFunction,
) -> Result<f64> {
    let w = check_width(params)?;
    let xs = dilate_fixed(alpha, terms)?;
    Ok(count_direct_fixed(&xs, fixed_point(t), w, bump))
}

/// `sum_n cos(2 pi k d_n)` for `k = 0..=k_max`, by rotation with periodic resynchronization.
fn cosine_sums(offsets: &[f64], k_max: u64) -> Vec<f64> {
    let mut sums = vec![0.0; k_max as usize + 1];
    for &d in offsets {
        let (s1, c1) = (2.0 * PI * d).sin_cos();
        let (mut c, mut s) = (1.0f64, 0.0f64);
        sums[0] += 1.0;
        for (k, slot) in sums.iter_mut().enumerate().skip(1) {
            if k % 32 == 0 {
                let (sk, ck) = (2.0 * PI * d * k as f64).sin_cos();
                c = ck;
                s = sk;
            } else {
                let nc = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = nc;
            }
            *slot += c;
        }
    }
    sums
}

/// `w * sum_{|k| <= k_max} Ff(w k) sum_n cos(2 pi k (alpha b_n - t))`.
pub fn smooth_count_fourier(
    alpha: &DyadicReal,
    terms: &[BigUint],
    t: &TorusPoint,
    params: &MetricParameters,
    bump: &BumpFunction,
    k_max: u64,
) -> Result<f64> {
    let w = check_width(params)?;
    let offsets = centered_offsets(alpha, terms, t)?;
    let sums = cosine_sums(&offsets, k_max);
    let mut acc = bump.fourier(0.0) * sums[0];
    for (k, c) in sums.iter().enumerate().skip(1) {
        acc += 2.0 * bump.fourier(w * k as f64) * c;
    }
    Ok(w * acc)
}

/// The centered, truncated count: the sum over `0 < |k| <= N/P` only.
pub fn omega_star(
    alpha: &DyadicReal,
    terms: &[BigUint],
    t: &TorusPoint,
    params: &MetricParameters,
    bump: &BumpFunction,
) -> Result<f64> {
    let w = check_width(params)?;
    let k1 = truncation_frequency(params);
    let offsets = centered_offsets(alpha, terms, t)?;
    let sums = cosine_sums(&offsets, k1);
    Ok(w * sums.iter().enumerate().skip(1).map(|(k, c)| 2.0 * bump.fourier(w * k as f64) * c).sum::<f64>())
}

/// `floor(N / P)`.
pub fn truncation_frequency(params: &MetricParameters) -> u64 {
    let v: BigRational = params.n_over_p();
    v.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

/// Cutoff at which the omitted Fourier terms are negligible, and at least `4 N / P`.
pub fn default_k_max(params: &MetricParameters) -> u64 {
    let four = (params.n_over_p() * BigRational::from_integer(4.into())).ceil().to_integer().to_u64().unwrap_or(0);
    let far = (NEGLIGIBLE_FROM / params.width()).ceil() as u64;
    four.max(far)
}

/// Bound on the change from dropping all `|k| > k_max`, for `k_count` dilates.
pub fn truncation_bound(params: &MetricParameters, bump: &BumpFunction, k_count: usize, k_max: u64) -> f64 {
    let w = params.width();
    2.0 * w * k_count as f64 * bump.tail_sum(w, k_max)
}

/// Exact check that `K * sum_{j<n} b_j < b_n` for every `n`, so no nonzero
/// integer combination with coefficients in `[-K, K]` vanishes.
pub fn frequencies_independent(terms: &[BigUint], k: u64) -> bool {
    let mut prefix = BigUint::from(0u32);
    for b in terms {
        if &prefix * k >= *b {
            return false;
        }
        prefix += b;
    }
    true
}
