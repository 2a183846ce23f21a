//! The exponential moment `integral_0^1 exp(omega*(alpha) / 10R) d alpha`.
//!
//! The integrand factors as `prod_n G(b_n alpha)` with
//! `G(x) = exp(sum_{k=1..D} c_k cos(2 pi k (x - t)))`. Expanding every factor in
//! its Fourier series, only frequency vectors `j` with `sum j_n b_n = 0`
//! survive. The zero vector gives `G_0^K`; any other solution has some
//! `|j_m| >= J` where `J = ceil(min_n b_n / sum_{m<n} b_m)`, which bounds the
//! rest by `K * T_J * S^(K-1)` with `S = sum |G_j|` and `T_J = sum_{|j|>=J} |G_j|`.
//! When the frequencies are small enough the integral is also computed
//! directly by composite Simpson.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use super::bump::BumpFunction;
use super::counting::truncation_frequency;
use super::params::MetricParameters;
use crate::error::{Error, Result};
use crate::numerics::TorusPoint;
use crate::sequences::ThinnedSequence;

/// Samples per period of `G` are at least this many per unit of its top frequency.
pub const POINTS_PER_OSCILLATION: u64 = 8;
/// `pass` allows this relative slack over the bound.
pub const SLACK: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Composite Simpson on the full product.
    Direct,
    /// `G_0^K` plus a bound on the off-diagonal relations.
    Factorized,
}

/// The one-variable factor `x -> exp(sum_k c_k cos(2 pi k (x - t)))`, `k = 1..=D`.
#[derive(Clone, Debug)]
pub struct Factor {
    pub coeffs: Vec<f64>,
    pub t: f64,
}

impl Factor {
    pub fn degree(&self) -> u64 {
        self.coeffs.len() as u64
    }

    pub fn log_eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (2.0 * PI * (i + 1) as f64 * (x - self.t)).cos())
            .sum()
    }

    /// `ln sup |G|` on the strip `|Im x| <= y`.
    fn strip_log_sup(&self, y: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| c.abs() * (2.0 * PI * (i + 1) as f64 * y).cosh()).sum()
    }

    /// Logarithm of a bound on `sum_{|j| >= j0} |G_j|`: shifting the contour to
    /// `Im x = -+y` gives `|G_j| <= sup_strip |G| * exp(-2 pi |j| y)`; `y` is
    /// chosen from a geometric grid.
    pub fn tail_log_bound(&self, j0: f64) -> f64 {
        let mut best = f64::INFINITY;
        let mut y = 1e-4;
        while y < 64.0 {
            let v = self.strip_log_sup(y) - 2.0 * PI * j0 * y - (-(-2.0 * PI * y).exp_m1()).ln() + 2f64.ln();
            if v < best {
                best = v;
            }
            y *= 1.05;
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentCheck {
    pub route: Route,
    /// Number of factors `K`.
    pub k: usize,
    /// Top frequency `D` of the exponent.
    pub degree: u64,
    pub points: u64,
    pub lhs: f64,
    /// Bound on `|lhs - integral|`.
    pub error_bound: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl MomentCheck {
    pub fn to_json(&self) -> Value {
        json!({
            "route": match self.route { Route::Direct => "direct", Route::Factorized => "factorized" },
            "K": self.k,
            "D": self.degree,
            "points": self.points,
            "lhs": self.lhs,
            "error_bound": self.error_bound,
            "rhs": self.rhs,
            "pass": self.pass,
        })
    }
}

/// Composite Simpson over `alpha in [0, 1]` with nodes `i / points`; the
/// reductions `b_n i mod points` are exact.
pub fn moment_direct(freqs: &[BigUint], factor: &Factor, points: u64) -> Result<f64> {
    let need = freqs.iter().max().map(|b| b * POINTS_PER_OSCILLATION * factor.degree().max(1)).unwrap_or_default();
    if BigUint::from(points) < need || points < 2 {
        return Err(Error::QuadratureUnderresolved { required: need.to_u64().unwrap_or(u64::MAX), given: points });
    }
    let points = points + points % 2;
    let residues: Vec<u64> = freqs.iter().map(|b| (b % points).to_u64().expect("residue fits")).collect();
    let log_at = |i: u64| -> f64 {
        residues
            .iter()
            .map(|&b| {
                let r = ((b as u128 * i as u128) % points as u128) as f64;
                factor.log_eval(r / points as f64)
            })
            .sum()
    };
    // Periodic integrand: the endpoint weights combine into one weight-2 node at 0.
    let mut acc = 2.0 * log_at(0).exp();
    for i in 1..points {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * log_at(i).exp();
    }
    Ok(acc / (3.0 * points as f64))
}

/// `ceil(min_n b_n / sum_{m<n} b_m)` over `n >= 2`; `None` for fewer than two terms.
pub fn independence_depth(freqs: &[BigUint]) -> Option<BigUint> {
    let mut prefix = BigUint::zero();
    let mut best: Option<BigUint> = None;
    for (i, b) in freqs.iter().enumerate() {
        if i > 0 {
            let (q, r) = b.div_rem(&prefix);
            let c = if r.is_zero() { q } else { q + 1u32 };
            best = Some(match best {
                Some(x) if x <= c => x,
                _ => c,
            });
        }
        prefix += b;
    }
    best
}

/// `(G_0^K, error bound)` from the Fourier coefficients of one factor.
pub fn moment_factorized(freqs: &[BigUint], factor: &Factor, points: u64) -> Result<(f64, f64)> {
    let d = factor.degree().max(1);
    let need = POINTS_PER_OSCILLATION * d;
    if points < need {
        return Err(Error::QuadratureUnderresolved { required: need, given: points });
    }
    let k = freqs.len();
    if k == 0 {
        return Ok((1.0, 0.0));
    }
    let qs = points.max(64 * d) as usize;
    let samples: Vec<f64> = (0..qs).map(|i| factor.log_eval(i as f64 / qs as f64).exp()).collect();
    // Aliasing in a length-qs DFT of G: sum over m != 0 of |G_{j + m qs}|.
    let alias = factor.tail_log_bound((qs / 2) as f64).exp();
    let g0 = samples.iter().sum::<f64>() / qs as f64;
    let mut s = 0.0;
    for j in 0..qs / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in samples.iter().enumerate() {
            let a = -2.0 * PI * ((j * i) % qs) as f64 / qs as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let mag = (re * re + im * im).sqrt() / qs as f64 + alias;
        s += if j == 0 { mag } else { 2.0 * mag };
    }
    // Coefficients past qs/2.
    s += alias;
    let lhs = (k as f64 * g0.ln()).exp();
    let error = match independence_depth(freqs) {
        None => 0.0,
        Some(j) => {
            let jf = j.to_f64().unwrap_or(f64::INFINITY);
            ((k as f64).ln() + factor.tail_log_bound(jf) + (k as f64 - 1.0) * s.ln()).exp()
        }
    };
    // The DFT mean itself carries the aliasing error, amplified K-fold.
    let alias_effect = lhs * k as f64 * alias / g0;
    Ok((lhs, error + alias_effect))
}

/// The factor whose product over the thinned terms is `exp(omega* / 10R)`.
pub fn omega_star_factor(params: &MetricParameters, bump: &BumpFunction, t: &TorusPoint) -> Factor {
    let w = params.width();
    let ten_r = 10.0 * params.r.to_f64();
    let d = truncation_frequency(params);
    let coeffs = (1..=d).map(|k| 2.0 * w * bump.fourier(w * k as f64) / ten_r).collect();
    Factor { coeffs, t: t.value().to_f64() }
}

/// Checks the moment against `(1 + slack) exp(Q / (divisor R))`.
pub fn exp_moment_check_with(
    thinned: &ThinnedSequence,
    t: &TorusPoint,
    params: &MetricParameters,
    bump: &BumpFunction,
    points: u64,
    divisor: f64,
    slack: f64,
) -> Result<MomentCheck> {
    if thinned.n != params.n {
        return Err(Error::ParameterMismatch(format!("thinned N = {}, parameters N = {}", thinned.n, params.n)));
    }
    let factor = omega_star_factor(params, bump, t);
    let rhs = (params.q.to_f64() / (divisor * params.r.to_f64())).exp();
    let k = thinned.terms.len();
    let degree = factor.degree();
    let direct_need = thinned.terms.iter().max().map(|b| b * POINTS_PER_OSCILLATION * degree.max(1));
    let (route, lhs, error_bound) = match direct_need {
        Some(need) if need <= BigUint::from(points) => (Route::Direct, moment_direct(&thinned.terms, &factor, points)?, 0.0),
        _ => {
            let (lhs, err) = moment_factorized(&thinned.terms, &factor, points)?;
            (Route::Factorized, lhs, err)
        }
    };
    let pass = lhs + error_bound <= rhs * (1.0 + slack);
    Ok(MomentCheck { route, k, degree, points, lhs, error_bound, rhs, pass })
}

/// `exp_moment_check_with` at divisor 50 and slack `SLACK`.
pub fn exp_moment_check(
    thinned: &ThinnedSequence,
    t: &TorusPoint,
    params: &MetricParameters,
    bump: &BumpFunction,
    points: u64,
) -> Result<MomentCheck> {
    exp_moment_check_with(thinned, t, params, bump, points, 50.0, SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DyadicReal;
    use crate::sequences::{thin, LacunarySequence};

    fn toy() -> (Vec<BigUint>, Factor) {
        let freqs = [1u32, 40, 1600].iter().map(|&b| BigUint::from(b)).collect();
        (freqs, Factor { coeffs: vec![0.3, -0.2], t: 0.1 })
    }

    #[test]
    fn routes_agree_on_toy_frequencies() {
        let (freqs, factor) = toy();
        let direct = moment_direct(&freqs, &factor, 32768).unwrap();
        let (fact, err) = moment_factorized(&freqs, &factor, 64).unwrap();
        assert!(err < 1e-12, "{err}");
        assert!((direct - fact).abs() < 1e-10, "{direct} vs {fact}");
        assert_eq!(independence_depth(&freqs), Some(BigUint::from(40u32)));
    }

    #[test]
    fn direct_sees_resonance() {
        // 2 = 2 * 1: the relation j = (2, -1) survives and the factorized main term misses it.
        let freqs = vec![BigUint::from(1u32), BigUint::from(2u32)];
        let factor = Factor { coeffs: vec![0.5, 0.5], t: 0.0 };
        let direct = moment_direct(&freqs, &factor, 4096).unwrap();
        let (fact, err) = moment_factorized(&freqs, &factor, 64).unwrap();
        assert!((direct - fact).abs() > 1e-3);
        assert!((direct - fact).abs() <= err);
    }

    #[test]
    fn single_factor_mean_matches_bessel() {
        // exp(c cos) has mean I_0(c) = sum (c/2)^(2m) / (m!)^2.
        let c = 0.7f64;
        let factor = Factor { coeffs: vec![c], t: 0.3 };
        let (g0, _) = moment_factorized(&[BigUint::from(5u32)], &factor, 64).unwrap();
        let mut i0 = 0.0;
        let mut term = 1.0;
        for m in 0..30 {
            if m > 0 {
                term *= (c / 2.0).powi(2) / (m * m) as f64;
            }
            i0 += term;
        }
        assert!((g0 - i0).abs() < 1e-14);
    }

    #[test]
    fn underresolved() {
        let (freqs, factor) = toy();
        assert_eq!(moment_direct(&freqs, &factor, 1000).unwrap_err().code(), "quadrature-underresolved");
        assert_eq!(moment_factorized(&freqs, &factor, 8).unwrap_err().code(), "quadrature-underresolved");
    }

    #[test]
    fn empty_thinning_is_one() {
        let (_, factor) = toy();
        assert_eq!(moment_factorized(&[], &factor, 64).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn r3_n1024_passes() {
        let params = MetricParameters::new(1024, 0.05).unwrap();
        let seq = LacunarySequence::powers(3, 1024).unwrap();
        let th = thin(&seq, 1024, params.thinning_exponent()).unwrap();
        let t = TorusPoint::new(DyadicReal::zero()).unwrap();
        let res = exp_moment_check(&th, &t, &params, BumpFunction::get(), 4096).unwrap();
        assert_eq!(res.route, Route::Factorized);
        assert!(res.pass, "{res:?}");
        assert!(res.lhs >= 1.0);
        let strict = exp_moment_check_with(&th, &t, &params, BumpFunction::get(), 4096, 500.0, 0.0).unwrap();
        assert!(!strict.pass);
    }
}
