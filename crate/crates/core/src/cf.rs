//! Continued fractions: expansions of rationals, dyadic approximations and
//! quadratic irrationals, continuants, and growth-rate estimates.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{check_precision, dist_nearest_int, DoubleDouble, DyadicReal, Precision, Rounding};
use crate::sequences::{ln_biguint, parse_rational};

/// A real number given symbolically.
#[derive(Clone, Debug, PartialEq)]
pub enum RealSpec {
    Rational(BigRational),
    /// `(p + sqrt(d)) / q` with `d` a positive non-square.
    Quadratic { p: BigInt, d: BigUint, q: BigInt },
    /// A dyadic value; with `Precision::Bits(b)` it stands for any real within `2^-b`.
    Dyadic(DyadicReal),
}

impl RealSpec {
    /// Parses `sqrt:D`, `golden` / `phi`, `qi:P,D,Q`, `a/b`, decimals, and
    /// `<number>@<bits>` for a value known to `bits` fractional bits.
    pub fn parse(s: &str) -> Result<RealSpec> {
        let s = s.trim();
        match s {
            "golden" | "phi" => return RealSpec::quadratic(BigInt::one(), BigUint::from(5u32), BigInt::from(2)),
            _ => {}
        }
        if let Some(d) = s.strip_prefix("sqrt:") {
            let d: BigUint = d.trim().parse().map_err(|_| Error::Parse(format!("bad radicand in {s}")))?;
            return RealSpec::quadratic(BigInt::zero(), d, BigInt::one());
        }
        if let Some(rest) = s.strip_prefix("qi:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("expected qi:P,D,Q, got {s}")));
            }
            let bad = |_| Error::Parse(format!("bad integer in {s}"));
            let p: BigInt = parts[0].parse().map_err(bad)?;
            let d: BigUint = parts[1].parse().map_err(bad)?;
            let q: BigInt = parts[2].parse().map_err(bad)?;
            return RealSpec::quadratic(p, d, q);
        }
        if let Some((x, bits)) = s.split_once('@') {
            let bits: u64 = bits.trim().parse().map_err(|_| Error::Parse(format!("bad bit count in {s}")))?;
            let v = DyadicReal::parse(x, bits)?.round_to(bits).with_precision(Precision::Bits(bits));
            return Ok(RealSpec::Dyadic(v));
        }
        if s.starts_with("0x") || s.starts_with("-0x") {
            return Ok(RealSpec::Dyadic(DyadicReal::parse(s, 0)?));
        }
        Ok(RealSpec::Rational(parse_rational(s)?))
    }

    pub fn quadratic(p: BigInt, d: BigUint, q: BigInt) -> Result<RealSpec> {
        if q.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        let s = d.sqrt();
        if &s * &s == d {
            let num = p + BigInt::from(s);
            return Ok(RealSpec::Rational(BigRational::new(num, q)));
        }
        Ok(RealSpec::Quadratic { p, d, q })
    }

    /// Approximation with error below `2^-bits`, tagged with that precision.
    pub fn approx(&self, bits: u64) -> DyadicReal {
        match self {
            RealSpec::Rational(r) => DyadicReal::from_rational(r, bits, Rounding::NearestEven),
            RealSpec::Dyadic(x) => match x.precision() {
                Precision::Exact => x.clone(),
                Precision::Bits(b) => x.round_to(bits.min(b)),
            },
            RealSpec::Quadratic { p, d, q } => {
                // floor(sqrt(d) 2^w) / 2^w is within 2^-w of sqrt(d); two guard bits absorb the division.
                let w = bits + 2;
                let root = BigInt::from((d << (2 * w)).sqrt());
                let num = (p << w) + root;
                DyadicReal::from_ratio(&num, &(q << w), bits + 1, Rounding::NearestEven)
                    .expect("nonzero denominator")
                    .with_precision(Precision::Bits(bits))
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.approx(80).to_f64()
    }
}

impl fmt::Display for RealSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RealSpec::Rational(r) => write!(f, "{}", crate::sequences::format_rational(r)),
            RealSpec::Quadratic { p, d, q } => write!(f, "({p} + sqrt({d})) / {q}"),
            RealSpec::Dyadic(x) => write!(f, "{}", x.to_hex()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuedFraction {
    pub a0: BigInt,
    /// `c_1, c_2, ...`.
    pub quotients: Vec<BigUint>,
    /// `p_k` and `q_k` for `k = 0..=quotients.len()`.
    pub p: Vec<BigInt>,
    pub q: Vec<BigUint>,
    /// The expansion ended: the value is the rational `p_last / q_last`.
    pub terminated: bool,
    /// `(preperiod, period)` in terms of `quotients` indices, for quadratic irrationals.
    pub period: Option<(usize, usize)>,
}

impl ContinuedFraction {
    pub fn from_quotients(a0: BigInt, quotients: Vec<BigUint>, terminated: bool) -> ContinuedFraction {
        let mut p = vec![a0.clone()];
        let mut q = vec![BigUint::one()];
        let (mut pm, mut qm) = (BigInt::one(), BigUint::zero());
        for c in &quotients {
            let ci = BigInt::from(c.clone());
            let pk = &ci * p.last().unwrap() + &pm;
            let qk = c * q.last().unwrap() + &qm;
            pm = p.last().unwrap().clone();
            qm = q.last().unwrap().clone();
            p.push(pk);
            q.push(qk);
        }
        ContinuedFraction { a0, quotients, p, q, terminated, period: None }
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_rational(&self) -> bool {
        self.terminated
    }

    pub fn to_json(&self) -> Value {
        json!({
            "a0": self.a0.to_string(),
            "quotients": self.quotients.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "p": self.p.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "q": self.q.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "terminated": self.terminated,
            "period": self.period.map(|(pre, len)| json!({ "preperiod": pre, "length": len })),
        })
    }
}

/// Euclid on `num / den` (`den > 0`): `(a0, quotients, terminated)`, at most `depth` quotients.
fn euclid(num: &BigInt, den: &BigInt, depth: usize) -> (BigInt, Vec<BigUint>, bool) {
    let a0 = num.div_floor(den);
    let mut a = den.magnitude().clone();
    let mut b = (num - &a0 * den).magnitude().clone();
    let mut out = Vec::new();
    while !b.is_zero() && out.len() < depth {
        let (c, r) = a.div_rem(&b);
        out.push(c);
        a = b;
        b = r;
    }
    (a0, out, b.is_zero())
}

pub fn expand_rational(x: &BigRational, depth: usize) -> ContinuedFraction {
    let (a0, qs, done) = euclid(x.numer(), x.denom(), depth);
    ContinuedFraction::from_quotients(a0, qs, done)
}

/// The quotients shared by every real in `[x - 2^-b, x + 2^-b]`; exact for `Precision::Exact`.
pub fn expand_dyadic(x: &DyadicReal, depth: usize) -> Result<ContinuedFraction> {
    let b = match x.precision() {
        Precision::Exact => return Ok(expand_rational(&x.to_rational(), depth)),
        Precision::Bits(b) => b,
    };
    let scale = BigInt::one() << b;
    let center = x.mul_pow2(b as i64);
    let m = center.floor();
    // Interval [m - 1, m + 2] / 2^b covers x +- 2^-b whatever the rounding of the mantissa.
    let (lo0, lo, lo_done) = euclid(&(&m - 1), &scale, depth + 1);
    let (hi0, hi, hi_done) = euclid(&(&m + 2), &scale, depth + 1);
    if lo0 != hi0 {
        return Err(Error::CfPrecisionExhausted { reliable: 0 });
    }
    let mut shared = 0;
    while shared < lo.len() && shared < hi.len() && lo[shared] == hi[shared] {
        shared += 1;
    }
    // The last shared quotient only counts if both expansions continue past it.
    let reliable = if shared == lo.len() && lo_done || shared == hi.len() && hi_done {
        shared.saturating_sub(1)
    } else {
        shared
    };
    if reliable < depth {
        return Err(Error::CfPrecisionExhausted { reliable });
    }
    Ok(ContinuedFraction::from_quotients(lo0, lo[..depth].to_vec(), false))
}

/// Every certified quotient of a dyadic approximation.
pub fn expand_dyadic_all(x: &DyadicReal) -> ContinuedFraction {
    match expand_dyadic(x, usize::MAX / 2) {
        Ok(cf) => cf,
        Err(Error::CfPrecisionExhausted { reliable }) if reliable > 0 => expand_dyadic(x, reliable).expect("reliable prefix"),
        Err(_) => ContinuedFraction::from_quotients(x.floor(), Vec::new(), false),
    }
}

/// Exact periodic expansion of `(p + sqrt(d)) / q`.
pub fn expand_quadratic(p: &BigInt, d: &BigUint, q: &BigInt, depth: usize) -> ContinuedFraction {
    // Normalize so that q divides d - p^2.
    let (mut pp, mut dd, mut qq) = (p.clone(), BigInt::from(d.clone()), q.clone());
    if !(&dd - &pp * &pp).is_multiple_of(&qq) {
        let f = qq.abs();
        pp *= &f;
        dd *= &f * &f;
        qq *= &f;
    }
    let s = dd.magnitude().sqrt();
    let s = BigInt::from(s);
    let floor_of = |pp: &BigInt, qq: &BigInt| -> BigInt {
        if qq.is_positive() {
            (pp + &s).div_floor(qq)
        } else {
            -((pp + &s).div_floor(&-qq)) - 1
        }
    };
    let a0 = floor_of(&pp, &qq);
    let mut quotients = Vec::new();
    let mut seen: HashMap<(BigInt, BigInt), usize> = HashMap::new();
    let mut period = None;
    let mut a = a0.clone();
    while quotients.len() < depth {
        pp = &a * &qq - &pp;
        qq = (&dd - &pp * &pp) / &qq;
        if let Some(&start) = seen.get(&(pp.clone(), qq.clone())) {
            period = Some((start, quotients.len() - start));
            break;
        }
        seen.insert((pp.clone(), qq.clone()), quotients.len());
        a = floor_of(&pp, &qq);
        quotients.push(a.to_biguint().expect("positive partial quotient"));
    }
    if let Some((start, len)) = period {
        let mut i = 0;
        while quotients.len() < depth {
            let c = quotients[start + i % len].clone();
            quotients.push(c);
            i += 1;
        }
    }
    let mut cf = ContinuedFraction::from_quotients(a0, quotients, false);
    cf.period = period;
    cf
}

pub fn expand(x: &RealSpec, depth: usize) -> Result<ContinuedFraction> {
    match x {
        RealSpec::Rational(r) => Ok(expand_rational(r, depth)),
        RealSpec::Quadratic { p, d, q } => Ok(expand_quadratic(p, d, q, depth)),
        RealSpec::Dyadic(v) => expand_dyadic(v, depth),
    }
}

/// `max_{1 <= k <= depth} ln(q_k) / k`.
pub fn lambda_estimate(cf: &ContinuedFraction) -> Result<DyadicReal> {
    if cf.q.len() < 3 {
        return Err(Error::InsufficientDepth { required: 2, available: cf.depth() });
    }
    let mut best = DoubleDouble::ZERO;
    for (k, q) in cf.q.iter().enumerate().skip(1) {
        let v = ln_biguint(q) / DoubleDouble::from_u64(k as u64);
        if v.to_f64() > best.to_f64() || (v - best).to_f64() > 0.0 {
            best = v;
        }
    }
    Ok(best.to_dyadic().round_to(64))
}

/// `ln(q_K) / K` at the deepest convergent, the rate that converges to the
/// Levy constant for almost every real.
pub fn growth_rate(cf: &ContinuedFraction) -> Result<f64> {
    let k = cf.depth();
    if k < 2 {
        return Err(Error::InsufficientDepth { required: 2, available: k });
    }
    Ok(ln_biguint(&cf.q[k]).to_f64() / k as f64)
}

/// Bounded-quotient test; rational (terminated) expansions are never badly approximable.
pub fn is_bad_proxy(cf: &ContinuedFraction, bound: &BigUint) -> bool {
    !cf.terminated && cf.quotients.iter().all(|c| c <= bound)
}

/// `|| beta n - zeta ||`.
pub fn inhom_distance(beta: &RealSpec, n: &BigInt, zeta: &DyadicReal) -> Result<DyadicReal> {
    let nb = n.magnitude().clone();
    if let RealSpec::Rational(r) = beta {
        if zeta.precision() == Precision::Exact {
            let v = r * BigRational::from_integer(n.clone()) - zeta.to_rational();
            let d = (&v - v.round()).abs();
            let den = d.denom();
            if den.trailing_zeros() == Some(den.bits() - 1) {
                // Power-of-two denominator: the distance is itself dyadic.
                return Ok(DyadicReal::from_parts(d.numer().clone(), -(den.bits() as i64 - 1)));
            }
            let bits = nb.bits() + 64;
            return Ok(DyadicReal::from_rational(&d, bits, Rounding::NearestEven).with_precision(Precision::Bits(bits)));
        }
    }
    // Twice the bits of n keeps n times the error small as well.
    let bits = 2 * nb.bits() + 64 + zeta_bits(zeta);
    let b = beta.approx(bits);
    if let RealSpec::Dyadic(_) = beta {
        check_precision(&b, &nb)?;
    }
    let prod = &b * &DyadicReal::from_int(n.clone());
    Ok(dist_nearest_int(&(&prod - zeta)))
}

fn zeta_bits(zeta: &DyadicReal) -> u64 {
    match zeta.precision() {
        Precision::Bits(_) => 0,
        Precision::Exact => (-zeta.exponent()).max(0) as u64,
    }
}
