//! Simultaneous approximation `||alpha b_n - x_n|| <= eps` for rapidly growing
//! frequencies, and dilation factors with small maximal gap built from it.
//!
//! The search is a greedy band intersection: the solutions of a single
//! constraint form bands of width `2 eps / b` repeating with period `1 / b`,
//! and as long as consecutive frequencies grow by at least `1/eps + 2`, the
//! band kept at one step always contains a full band of the next.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{dilate_max_gap, dist_nearest_int, DoubleDouble, DyadicReal, Precision, Rounding, TorusPoint};
use crate::sequences::{format_rational, thin, thin_from, LacunarySequence, ThinnedSequence};

/// Extra bits beyond `bitlen(b)` used for band endpoints.
const GUARD_BITS: u64 = 64;
/// Fractional bits of non-dyadic targets such as `j / K`.
const TARGET_BITS: u64 = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct TuranParameters {
    pub k: usize,
    pub epsilon: BigRational,
    pub m: u64,
    /// Certified lower bound for `min |sum m_j b_j|`; zero when not certifiable.
    pub delta_lower: DyadicReal,
    pub delta_certified: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub frequency: BigUint,
    pub target: TorusPoint,
    pub distance: DyadicReal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThinningInfo {
    pub n: u64,
    pub l: u64,
    pub step: u64,
    pub k: usize,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DilationCertificate {
    pub alpha: DyadicReal,
    pub search_interval: (DyadicReal, DyadicReal),
    pub constraints: Vec<Constraint>,
    /// Largest circular gap of the targets plus `2 eps`.
    pub max_gap_bound: DyadicReal,
    pub parameters: TuranParameters,
    pub thinning: Option<ThinningInfo>,
    /// Directly recomputed maximal gap of the full index range, when requested.
    pub verified_gap: Option<DyadicReal>,
    /// Indices `(first, last)` of the range behind `verified_gap`.
    pub verified_range: Option<(usize, usize)>,
}

fn check_epsilon(eps: &BigRational) -> Result<()> {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if !eps.is_positive() || eps >= &half {
        return Err(Error::EpsilonDomain(format_rational(eps)));
    }
    Ok(())
}

fn rational_to_dd(x: &BigRational) -> DoubleDouble {
    DoubleDouble::from_dyadic(&DyadicReal::from_rational(x, 200, Rounding::NearestEven))
}

/// `ceil((1/eps) ln(K/eps))`, rounded upward.
pub fn turan_m(eps: &BigRational, k: usize) -> Result<u64> {
    check_epsilon(eps)?;
    let e = rational_to_dd(eps);
    let x = (DoubleDouble::from_u64(k as u64) / e).ln() / e;
    // K/eps > 2 so the logarithm is irrational; a relative nudge far above the
    // double-double error makes the ceiling an upper bound.
    let bumped = x.to_f64() * (1.0 + 1e-15);
    Ok(bumped.ceil() as u64)
}

/// `min_n (b_n - M sum_{j<n} b_j)`, a lower bound for every nonzero
/// `|sum m_j b_j|` with `|m_j| <= M`.
pub fn delta_lower_bound(terms: &[BigUint], m: u64) -> Result<DyadicReal> {
    let mut prefix = BigUint::zero();
    let mut best: Option<BigInt> = None;
    for (i, b) in terms.iter().enumerate() {
        let load = &prefix * m;
        if &load >= b {
            return Err(Error::DeltaUncertifiable { index: i + 1 });
        }
        let slack = BigInt::from(b - &load);
        best = Some(match best {
            Some(v) if v <= slack => v,
            _ => slack,
        });
        prefix += b;
    }
    Ok(DyadicReal::from_int(best.unwrap_or_else(BigInt::zero)))
}

/// `{ j / K : j = 0..K }`, each rounded to nearest at 128 fractional bits.
pub fn equidistant_targets(k: usize) -> Vec<TorusPoint> {
    assert!(k >= 1, "need at least one target");
    let den = BigInt::from(k);
    (0..k)
        .map(|j| {
            let x = DyadicReal::from_ratio(&BigInt::from(j), &den, TARGET_BITS, Rounding::NearestEven).expect("k > 0");
            // j/K < 1 stays below 1 after rounding at 128 bits for any practical K.
            TorusPoint::new(x).expect("target in [0,1)")
        })
        .collect()
}

/// `eps = l ln N / (2N)`, rounded down to 64 fractional bits.
pub fn block_epsilon(l: u64, n: u64) -> BigRational {
    let v = DoubleDouble::from_u64(n).ln().mul_f64(l as f64) / DoubleDouble::from_u64(2 * n);
    v.to_dyadic().round_to_mode(64, Rounding::Floor).to_rational()
}

/// Largest circular gap of the targets.
fn target_gap(targets: &[TorusPoint]) -> DyadicReal {
    let mut v: Vec<&DyadicReal> = targets.iter().map(|t| t.value()).collect();
    v.sort();
    let wrap = &(&DyadicReal::one() - v[v.len() - 1]) + v[0];
    v.windows(2).map(|w| w[1] - w[0]).fold(wrap, |a, b| if b > a { b } else { a })
}

/// `(num, den)` with `den` a positive power of two.
fn dyadic_ratio(x: &DyadicReal) -> (BigInt, BigInt) {
    if x.exponent() >= 0 {
        (x.mantissa() << x.exponent() as u64, BigInt::one())
    } else {
        (x.mantissa().clone(), BigInt::one() << (-x.exponent()) as u64)
    }
}

/// `floor(d + sign * eps)` by integer division, avoiding rational normalization.
fn floor_plus_eps(d: &DyadicReal, sign: i32, eps: &BigRational) -> BigInt {
    let (dn, dd) = dyadic_ratio(d);
    let e = eps.numer() * &dd;
    let num = &dn * eps.denom() + if sign >= 0 { e } else { -e };
    num.div_floor(&(dd * eps.denom()))
}

/// Nearest integer, halves away from zero.
fn round_half_away(d: &DyadicReal) -> BigInt {
    let half = DyadicReal::from_parts(1, -1);
    if d.is_negative() {
        -(&(-d) + &half).floor()
    } else {
        (d + &half).floor()
    }
}

/// Band `[(k + x - eps)/b, (k + x + eps)/b]` rounded inward at `p` bits.
fn band(k: &BigInt, x: &DyadicReal, eps: &BigRational, b: &BigUint, p: u64) -> (DyadicReal, DyadicReal) {
    let (cn, cd) = dyadic_ratio(&(&DyadicReal::from_int(k.clone()) + x));
    let e = eps.numer() * &cd;
    let base = &cn * eps.denom();
    let den = cd * eps.denom() * BigInt::from(b.clone());
    let lo = DyadicReal::from_ratio(&(&base - &e), &den, p, Rounding::Ceil).expect("positive frequency");
    let hi = DyadicReal::from_ratio(&(&base + &e), &den, p, Rounding::Floor).expect("positive frequency");
    (lo, hi)
}

/// Greedy band-intersection search for `||alpha b_n - x_n|| <= eps` inside
/// `[lo, hi]`; every achieved distance is recomputed exactly.
pub fn find_dilation(
    thinned: &ThinnedSequence,
    targets: &[TorusPoint],
    eps: &BigRational,
    interval: (&DyadicReal, &DyadicReal),
) -> Result<DilationCertificate> {
    check_epsilon(eps)?;
    if targets.len() != thinned.terms.len() {
        return Err(Error::ParameterMismatch(format!(
            "{} targets for {} frequencies",
            targets.len(),
            thinned.terms.len()
        )));
    }
    if interval.0 > interval.1 {
        return Err(Error::InvalidInput("search interval has lo > hi".into()));
    }
    let (mut lo, mut hi) = (interval.0.clone(), interval.1.clone());
    for (step, (b, x)) in thinned.terms.iter().zip(targets).enumerate() {
        let p = b.bits() + GUARD_BITS;
        let bd = DyadicReal::from_biguint(b);
        let xd = x.value();
        let lo_b = &lo * &bd;
        let hi_b = &hi * &bd;
        // Bands k with (k + x + eps) >= lo*b and (k + x - eps) <= hi*b.
        let below = xd - &lo_b;
        let above = &hi_b - xd;
        let kmin = -floor_plus_eps(&below, 1, eps);
        let kmax = floor_plus_eps(&above, 1, eps);
        if kmin > kmax {
            return Err(Error::InfeasibleAtStep { step: step + 1 });
        }
        // Full bands satisfy k >= lo*b - x + eps and k <= hi*b - x - eps.
        let full_min = -floor_plus_eps(&below, -1, eps);
        let full_max = floor_plus_eps(&above, -1, eps);
        let center = (&lo_b + &hi_b).mul_pow2(-1);
        let ideal = round_half_away(&(&center - xd));
        let pick = |a: &BigInt, z: &BigInt| -> BigInt { ideal.clone().max(a.clone()).min(z.clone()) };
        let chosen = if full_min <= full_max {
            pick(&full_min, &full_max)
        } else {
            // No full band: take the largest overlap among the (at most two) partial ones.
            let mut best: Option<(DyadicReal, DyadicReal, DyadicReal)> = None;
            let mut k = kmin.clone();
            while k <= kmax {
                let (bl, bh) = band(&k, xd, eps, b, p);
                let nl = bl.max(lo.clone());
                let nh = bh.min(hi.clone());
                if nl <= nh {
                    let len = &nh - &nl;
                    if best.as_ref().is_none_or(|(l, _, _)| &len > l) {
                        best = Some((len, nl, nh));
                    }
                }
                k += 1;
            }
            match best {
                Some((_, nl, nh)) => {
                    lo = nl;
                    hi = nh;
                    continue;
                }
                None => return Err(Error::InfeasibleAtStep { step: step + 1 }),
            }
        };
        let (bl, bh) = band(&chosen, xd, eps, b, p);
        let nl = bl.max(lo.clone());
        let nh = bh.min(hi.clone());
        if nl > nh {
            return Err(Error::InfeasibleAtStep { step: step + 1 });
        }
        lo = nl;
        hi = nh;
    }
    // The midpoint is the certified object itself, so it is exact.
    let alpha = DyadicReal::midpoint(&lo, &hi).with_precision(Precision::Exact);
    let mut constraints = Vec::with_capacity(targets.len());
    for (step, (b, x)) in thinned.terms.iter().zip(targets).enumerate() {
        let v = &(&alpha * &DyadicReal::from_biguint(b)) - x.value();
        let distance = dist_nearest_int(&v);
        if distance.cmp_rational(eps) == Ordering::Greater {
            return Err(Error::InfeasibleAtStep { step: step + 1 });
        }
        constraints.push(Constraint { frequency: b.clone(), target: x.clone(), distance });
    }
    let two_eps = DyadicReal::from_rational(&(eps * BigRational::from_integer(BigInt::from(2))), TARGET_BITS, Rounding::Ceil);
    let max_gap_bound = if targets.is_empty() { DyadicReal::one() } else { &target_gap(targets) + &two_eps };
    let k = thinned.terms.len();
    let m = turan_m(eps, k.max(1))?;
    let (delta_lower, delta_certified) = match delta_lower_bound(&thinned.terms, m) {
        Ok(d) => (d, true),
        Err(_) => (DyadicReal::zero(), false),
    };
    Ok(DilationCertificate {
        alpha,
        search_interval: (interval.0.clone(), interval.1.clone()),
        constraints,
        max_gap_bound,
        parameters: TuranParameters { k, epsilon: eps.clone(), m, delta_lower, delta_certified },
        thinning: Some(ThinningInfo {
            n: thinned.n,
            l: thinned.l,
            step: thinned.step,
            k: thinned.k,
            offset: thinned.offset,
        }),
        verified_gap: None,
        verified_range: None,
    })
}

/// `3 l ln N / N`, the gap bound the constructions aim for.
pub fn gap_target(l: u64, n: u64) -> f64 {
    3.0 * l as f64 * (n as f64).ln() / n as f64
}

/// Dilation for the first `N` terms: thin, aim at `K` equidistant targets
/// with `eps = l ln N / (2N)`, then recompute the maximal gap of all `N` dilates.
pub fn find_dilation_prefix(
    seq: &LacunarySequence,
    n: u64,
    interval: Option<(&DyadicReal, &DyadicReal)>,
) -> Result<DilationCertificate> {
    let thinned = thin(seq, n, 1.0)?;
    let eps = block_epsilon(thinned.l, n);
    let targets = equidistant_targets(thinned.k);
    let (zero, one) = (DyadicReal::zero(), DyadicReal::one());
    let interval = interval.unwrap_or((&zero, &one));
    let mut cert = find_dilation(&thinned, &targets, &eps, interval)?;
    cert.verified_gap = Some(dilate_max_gap(&cert.alpha, &seq.terms()[..n as usize])?);
    cert.verified_range = Some((1, n as usize));
    Ok(cert)
}

/// Dilation for the block `(N, 2N]` inside an interval of length at least `4 / a_N`.
pub fn find_dilation_block(seq: &LacunarySequence, n: u64, interval: (&DyadicReal, &DyadicReal)) -> Result<DilationCertificate> {
    let n_us = n as usize;
    if seq.len() < 2 * n_us {
        return Err(Error::InvalidInput(format!("block (N, 2N] needs {} terms, have {}", 2 * n_us, seq.len())));
    }
    let len = interval.1 - interval.0;
    let a_n = BigRational::from_integer(BigInt::from(seq.term(n_us).clone()));
    if len.cmp_rational(&(BigRational::from_integer(BigInt::from(4)) / a_n)) == Ordering::Less {
        return Err(Error::IntervalBelow4OverAN);
    }
    let thinned = thin_from(seq, n, 1.0, n_us)?;
    let eps = block_epsilon(thinned.l, n);
    let targets = equidistant_targets(thinned.k);
    let mut cert = find_dilation(&thinned, &targets, &eps, interval)?;
    cert.verified_gap = Some(dilate_max_gap(&cert.alpha, &seq.terms()[n_us..2 * n_us])?);
    cert.verified_range = Some((n_us + 1, 2 * n_us));
    Ok(cert)
}

/// `a_n^q >= N^p a_{n-1}^q` for `theta = p/q`; returns the first failing 1-based index.
fn check_super_lacunary(terms: &[BigUint], n: u64, theta: &BigRational) -> Option<usize> {
    let p = theta.numer().to_u32().unwrap_or(u32::MAX);
    let q = theta.denom().to_u32().unwrap_or(u32::MAX);
    let np = BigUint::from(n).pow(p);
    terms.windows(2).position(|w| w[1].pow(q) < &np * w[0].pow(q)).map(|i| i + 2)
}

/// Dilation for a sequence with `a_n >= N^theta a_{n-1}`: no thinning,
/// `eps = 1/N`, `N` equidistant targets, gap bound `3/N`.
pub fn find_dilation_dense(terms: &[BigUint], n: u64, theta: &BigRational) -> Result<DilationCertificate> {
    if theta <= &BigRational::one() {
        return Err(Error::InvalidInput(format!("theta = {} must exceed 1", format_rational(theta))));
    }
    if terms.len() < n as usize || n < 3 {
        return Err(Error::InvalidInput(format!("need N >= 3 terms, have {} for N = {n}", terms.len())));
    }
    let terms = &terms[..n as usize];
    if let Some(i) = check_super_lacunary(terms, n, theta) {
        return Err(Error::NotSuperLacunary { index: i });
    }
    let thinned = ThinnedSequence::from_terms(terms.to_vec());
    let eps = BigRational::new(BigInt::one(), BigInt::from(n));
    let targets = equidistant_targets(n as usize);
    let mut cert = find_dilation(&thinned, &targets, &eps, (&DyadicReal::zero(), &DyadicReal::one()))?;
    cert.thinning = None;
    cert.verified_gap = Some(dilate_max_gap(&cert.alpha, terms)?);
    cert.verified_range = Some((1, n as usize));
    Ok(cert)
}

/// `{"mantissa": hex, "exponent": e, "decimal": 40 digits}`.
pub fn dyadic_json(x: &DyadicReal, digits: usize) -> Value {
    let sign = if x.is_negative() { "-" } else { "" };
    json!({
        "mantissa": format!("{sign}0x{}", x.mantissa().magnitude().to_str_radix(16)),
        "exponent": x.exponent(),
        "decimal": x.to_decimal(digits),
    })
}

impl DilationCertificate {
    pub fn to_json(&self) -> Value {
        let dec = |x: &DyadicReal| x.to_decimal(30);
        json!({
            "alpha": dyadic_json(&self.alpha, 40),
            "search_interval": [self.search_interval.0.to_hex(), self.search_interval.1.to_hex()],
            "epsilon": format_rational(&self.parameters.epsilon),
            "K": self.parameters.k,
            "M": self.parameters.m,
            "delta_lower": self.parameters.delta_lower.to_string(),
            "delta_certified": self.parameters.delta_certified,
            "thinning": self.thinning.as_ref().map(|t| json!({
                "N": t.n, "l": t.l, "step": t.step, "K": t.k, "offset": t.offset,
            })),
            "max_gap_bound": dec(&self.max_gap_bound),
            "verified_gap": self.verified_gap.as_ref().map(dec),
            "verified_range": self.verified_range.map(|(a, b)| json!([a, b])),
            "max_distance": self.constraints.iter().map(|c| &c.distance).max().map(dec),
            "constraints": self.constraints.iter().map(|c| json!({
                "frequency_bits": c.frequency.bits(),
                "target": dec(c.target.value()),
                "distance": dec(&c.distance),
            })).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gap_report;
    use crate::sequences::parse_rational;

    fn rat(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn ints(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn m_examples() {
        assert_eq!(turan_m(&rat("1/4"), 4).unwrap(), 12);
        assert_eq!(turan_m(&rat("0.4"), 2).unwrap(), 5);
        assert_eq!(turan_m(&rat("1/4"), 1).unwrap(), 6);
        assert_eq!(turan_m(&rat("1/2"), 1).unwrap_err().code(), "epsilon-domain");
        assert_eq!(turan_m(&rat("0"), 1).unwrap_err().code(), "epsilon-domain");
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_lower_bound(&ints(&[1, 1000, 1_000_000]), 10).unwrap(), DyadicReal::one());
        assert_eq!(delta_lower_bound(&ints(&[1, 2]), 1).unwrap(), DyadicReal::one());
        assert_eq!(delta_lower_bound(&ints(&[1, 5]), 10).unwrap_err(), Error::DeltaUncertifiable { index: 2 });
    }

    #[test]
    fn targets() {
        assert_eq!(equidistant_targets(1), vec![TorusPoint::zero()]);
        let t4: Vec<DyadicReal> = equidistant_targets(4).into_iter().map(TorusPoint::into_inner).collect();
        assert_eq!(t4, ["0", "0.25", "0.5", "0.75"].map(|s| DyadicReal::parse(s, 8).unwrap()));
        let t3 = equidistant_targets(3);
        assert!((t3[1].value().to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn single_frequency() {
        let th = ThinnedSequence::from_terms(ints(&[5]));
        let c = find_dilation(&th, &[TorusPoint::zero()], &rat("0.1"), (&DyadicReal::zero(), &DyadicReal::one())).unwrap();
        // The band midpoint j/5 is not dyadic; alpha lands within the guard bits of it.
        assert!(c.constraints[0].distance < DyadicReal::from_parts(1, -60));
    }

    #[test]
    fn three_frequencies_thirds() {
        let th = ThinnedSequence::from_terms(ints(&[1_000, 1_000_000, 1_000_000_000]));
        let targets: Vec<TorusPoint> = [0u64, 1, 2]
            .iter()
            .map(|&j| {
                TorusPoint::new(DyadicReal::from_ratio(&BigInt::from(j), &BigInt::from(3), 128, Rounding::NearestEven).unwrap())
                    .unwrap()
            })
            .collect();
        let eps = rat("0.01");
        let c = find_dilation(&th, &targets, &eps, (&DyadicReal::zero(), &DyadicReal::one())).unwrap();
        for (k, f) in [1_000u64, 1_000_000, 1_000_000_000].iter().enumerate() {
            // Independent check against the exact rational k/3.
            let v = c.alpha.to_rational() * BigRational::from_integer(BigInt::from(*f)) - BigRational::new(BigInt::from(k), BigInt::from(3));
            let frac = &v - v.floor();
            let d = frac.clone().min(BigRational::one() - frac);
            assert!(d <= eps, "k = {k}");
        }
        assert!(c.alpha >= DyadicReal::zero() && c.alpha <= DyadicReal::one());
    }

    #[test]
    fn infeasible_when_ratio_too_small() {
        let th = ThinnedSequence::from_terms(ints(&[1000, 1001]));
        let targets = vec![TorusPoint::zero(), TorusPoint::new(DyadicReal::parse("0.25", 8).unwrap()).unwrap()];
        let err = find_dilation(&th, &targets, &rat("0.001"), (&DyadicReal::zero(), &DyadicReal::one())).unwrap_err();
        assert_eq!(err, Error::InfeasibleAtStep { step: 2 });
    }

    #[test]
    fn prefix_two_powers() {
        let seq = LacunarySequence::powers(2, 1024).unwrap();
        let c = find_dilation_prefix(&seq, 1024, None).unwrap();
        let k = c.parameters.k as f64;
        let eps = c.parameters.epsilon.to_f64().unwrap();
        assert!(c.max_gap_bound.to_f64() <= 1.0 / k + 2.0 * eps + 1e-30);
        let g = c.verified_gap.clone().unwrap();
        assert!(g <= c.max_gap_bound);
        // Independent recomputation through the generic gap report.
        let pts = crate::numerics::dilate(&c.alpha, seq.terms()).unwrap();
        assert_eq!(gap_report(&pts).unwrap().max_gap, g);
        assert!(c.parameters.delta_certified);
        assert!(g.to_f64() <= gap_target(2, 1024));
    }

    #[test]
    fn block_examples() {
        let seq = LacunarySequence::powers(2, 512).unwrap();
        let lo = DyadicReal::parse("0.3", 64).unwrap();
        let a_n = DyadicReal::from_biguint(seq.term(256));
        let width = DyadicReal::from_rational(
            &(BigRational::from_integer(BigInt::from(4)) / a_n.to_rational()),
            300,
            Rounding::NearestEven,
        );
        let hi = &lo + &width;
        let c = find_dilation_block(&seq, 256, (&lo, &hi)).unwrap();
        assert!(c.alpha >= lo && c.alpha <= hi);
        assert!(c.verified_gap.unwrap().to_f64() <= gap_target(2, 256));
        let short = &lo + &width.mul_pow2(-2);
        assert_eq!(find_dilation_block(&seq, 256, (&lo, &short)).unwrap_err(), Error::IntervalBelow4OverAN);
    }

    #[test]
    fn dense_examples() {
        let squares: Vec<BigUint> = (9..=16u32).map(|n| BigUint::one() << (n * n)).collect();
        let c = find_dilation_dense(&squares, 8, &rat("2")).unwrap();
        assert!(c.verified_gap.unwrap().to_f64() <= 3.0 / 8.0);
        let p256: Vec<BigUint> = (1..=16u32).map(|n| BigUint::from(256u32).pow(n)).collect();
        let c = find_dilation_dense(&p256, 16, &rat("2")).unwrap();
        assert!(c.verified_gap.unwrap().to_f64() <= 3.0 / 16.0);
        let p2: Vec<BigUint> = (1..=16u32).map(|n| BigUint::one() << n).collect();
        assert_eq!(find_dilation_dense(&p2, 16, &rat("2")).unwrap_err().code(), "not-super-lacunary");
    }
}
