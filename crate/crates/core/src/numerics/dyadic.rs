//! Arbitrary-precision dyadic numbers `mantissa * 2^exponent`.
//!
//! Sums, differences and products of dyadics are exact. Rounding only happens
//! in the explicit operations that take a [`Rounding`] mode or a bit count
//! (`round_to`, `from_ratio`, `div_int`). Values are kept in canonical form:
//! the mantissa is odd, or zero with exponent 0, so structural equality is
//! value equality.
//!
//! Every value also carries a [`Precision`]: the number of fractional bits to
//! which it is known to approximate some underlying real. This is metadata
//! used by the precision policy of the dilation routines; arithmetic on the
//! dyadic values themselves never looks at it.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Absolute precision of a dyadic approximant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    /// The dyadic is the value itself.
    Exact,
    /// Known to within `2^-bits` of the underlying real.
    Bits(u64),
}

impl Precision {
    pub fn bits(self) -> Option<u64> {
        match self {
            Precision::Exact => None,
            Precision::Bits(b) => Some(b),
        }
    }

    /// True when at least `bits` fractional bits are reliable.
    pub fn covers(self, bits: u64) -> bool {
        match self {
            Precision::Exact => true,
            Precision::Bits(b) => b >= bits,
        }
    }

    fn combine_sum(self, other: Precision) -> Precision {
        match (self, other) {
            (Precision::Exact, p) | (p, Precision::Exact) => p,
            (Precision::Bits(a), Precision::Bits(b)) => Precision::Bits(a.min(b).saturating_sub(1)),
        }
    }
}

/// Rounding direction for the operations that round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    Floor,
    Ceil,
    NearestEven,
}

#[derive(Clone, Debug)]
pub struct DyadicReal {
    mantissa: BigInt,
    exponent: i64,
    precision: Precision,
}

/// `floor(m / 2^s)` for any sign of `m`.
pub(crate) fn floor_shr(m: &BigInt, s: u64) -> BigInt {
    if s == 0 {
        return m.clone();
    }
    if m.sign() != Sign::Minus {
        m >> s
    } else {
        let mag = m.magnitude();
        let mask = (BigUint::one() << s) - 1u32;
        let q = mag >> s;
        let exact = (mag & &mask).is_zero();
        let q = if exact { q } else { q + 1u32 };
        -BigInt::from(q)
    }
}

/// Rounds `num / den` to an integer; `den` must be positive.
pub(crate) fn round_ratio(num: &BigInt, den: &BigInt, mode: Rounding) -> BigInt {
    debug_assert!(den.is_positive());
    let (q, r) = num.div_mod_floor(den);
    if r.is_zero() {
        return q;
    }
    match mode {
        Rounding::Floor => q,
        Rounding::Ceil => q + 1,
        Rounding::NearestEven => {
            let twice: BigInt = &r << 1u32;
            match twice.cmp(den) {
                Ordering::Less => q,
                Ordering::Greater => q + 1,
                Ordering::Equal => {
                    if q.is_odd() {
                        q + 1
                    } else {
                        q
                    }
                }
            }
        }
    }
}

/// `ceil(log2 |x|)` clamped at zero; the number of integer bits of `x`.
fn magnitude_bits(x: &DyadicReal) -> u64 {
    if x.mantissa.is_zero() {
        return 0;
    }
    let bits = x.mantissa.bits() as i64 + x.exponent;
    bits.max(0) as u64
}

impl DyadicReal {
    fn canonical(mantissa: BigInt, exponent: i64, precision: Precision) -> Self {
        if mantissa.is_zero() {
            return DyadicReal { mantissa, exponent: 0, precision };
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        if tz == 0 {
            DyadicReal { mantissa, exponent, precision }
        } else {
            DyadicReal { mantissa: mantissa >> tz, exponent: exponent + tz as i64, precision }
        }
    }

    /// Exact value `mantissa * 2^exponent`.
    pub fn from_parts(mantissa: impl Into<BigInt>, exponent: i64) -> Self {
        Self::canonical(mantissa.into(), exponent, Precision::Exact)
    }

    pub fn zero() -> Self {
        Self::from_parts(0, 0)
    }

    pub fn one() -> Self {
        Self::from_parts(1, 0)
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        Self::from_parts(n, 0)
    }

    pub fn from_biguint(n: &BigUint) -> Self {
        Self::from_parts(BigInt::from(n.clone()), 0)
    }

    /// Exact conversion of a finite `f64`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite float {x}")));
        }
        if x == 0.0 {
            return Ok(Self::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let exp_field = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if exp_field == 0 {
            (frac as i64, -1074)
        } else {
            ((frac | (1u64 << 52)) as i64, exp_field - 1075)
        };
        Ok(Self::from_parts(sign * m, e))
    }

    /// `num / den` rounded to a multiple of `2^-bits`.
    pub fn from_ratio(num: &BigInt, den: &BigInt, bits: u64, mode: Rounding) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        let (num, den) = if den.is_negative() { (-num, -den) } else { (num.clone(), den.clone()) };
        let scaled = &num << bits;
        let exact = (&scaled % &den).is_zero();
        let q = round_ratio(&scaled, &den, mode);
        let precision = if exact { Precision::Exact } else { Precision::Bits(bits) };
        Ok(Self::canonical(q, -(bits as i64), precision))
    }

    /// Parses `"0.7"`, `"-1.25e-3"`, `"1/3"` or `"0x1bp-5"`; inexact inputs are
    /// rounded to nearest at `bits` fractional bits.
    pub fn parse(s: &str, bits: u64) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty number".into()));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let value = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
            Self::parse_hex_body(hex)?
        } else if let Some((a, b)) = body.split_once('/') {
            let num = BigInt::from_str(a.trim()).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
            let den = BigInt::from_str(b.trim()).map_err(|e| Error::Parse(format!("{s}: {e}")))?;
            Self::from_ratio(&num, &den, bits, Rounding::NearestEven)?
        } else {
            Self::parse_decimal_body(body, bits).map_err(|_| Error::Parse(format!("not a number: {s}")))?
        };
        Ok(if neg { -value } else { value })
    }

    fn parse_hex_body(hex: &str) -> Result<Self> {
        let (mant, exp) = match hex.split_once(['p', 'P']) {
            Some((m, e)) => (m, e.parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?),
            None => (hex, 0),
        };
        let m = BigInt::parse_bytes(mant.as_bytes(), 16)
            .ok_or_else(|| Error::Parse(format!("bad hex mantissa {mant}")))?;
        Ok(Self::from_parts(m, exp))
    }

    fn parse_decimal_body(body: &str, bits: u64) -> Result<Self> {
        let (digits, exp10) = match body.split_once(['e', 'E']) {
            Some((d, e)) => (d, e.parse::<i64>().map_err(|e| Error::Parse(e.to_string()))?),
            None => (body, 0),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(Error::Parse("no digits".into()));
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(Error::Parse("bad digit".into()));
        }
        let all = format!("{int_part}{frac_part}");
        let n = BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|e| Error::Parse(e.to_string()))?;
        let shift = exp10 - frac_part.len() as i64;
        if shift >= 0 {
            Ok(Self::from_int(n * BigInt::from(10u32).pow(shift as u32)))
        } else {
            let den = BigInt::from(10u32).pow((-shift) as u32);
            Self::from_ratio(&n, &den, bits, Rounding::NearestEven)
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Same value, different precision tag.
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.exponent >= 0
    }

    pub fn abs(&self) -> Self {
        DyadicReal { mantissa: self.mantissa.abs(), exponent: self.exponent, precision: self.precision }
    }

    /// Largest integer not above the value; exact.
    pub fn floor(&self) -> BigInt {
        if self.exponent >= 0 {
            &self.mantissa << self.exponent as u64
        } else {
            floor_shr(&self.mantissa, (-self.exponent) as u64)
        }
    }

    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// `x - floor(x)`, always in `[0, 1)`.
    pub fn frac(&self) -> Self {
        if self.exponent >= 0 {
            return Self::zero().with_precision(self.precision);
        }
        let s = (-self.exponent) as u64;
        let fl = floor_shr(&self.mantissa, s);
        let rem = &self.mantissa - (fl << s);
        Self::canonical(rem, self.exponent, self.precision)
    }

    /// Rounds to a multiple of `2^-bits`, ties to even.
    pub fn round_to(&self, bits: u64) -> Self {
        self.round_to_mode(bits, Rounding::NearestEven)
    }

    pub fn round_to_mode(&self, bits: u64, mode: Rounding) -> Self {
        let target = -(bits as i64);
        if self.exponent >= target {
            return self.clone();
        }
        let shift = (target - self.exponent) as u64;
        let den = BigInt::one() << shift;
        let q = round_ratio(&self.mantissa, &den, mode);
        let precision = match self.precision {
            Precision::Exact => Precision::Bits(bits),
            Precision::Bits(b) => Precision::Bits(b.min(bits)),
        };
        Self::canonical(q, target, precision)
    }

    /// `self / d` rounded to a multiple of `2^-bits`; `d` must be positive.
    pub fn div_int(&self, d: &BigInt, bits: u64, mode: Rounding) -> Self {
        assert!(d.is_positive(), "div_int needs a positive divisor");
        let shift = self.exponent + bits as i64;
        let (num, den) = if shift >= 0 {
            (&self.mantissa << shift as u64, d.clone())
        } else {
            (self.mantissa.clone(), d << (-shift) as u64)
        };
        let q = round_ratio(&num, &den, mode);
        let exact = (num % den).is_zero();
        let precision = match (exact, self.precision) {
            (true, p) => p,
            (false, Precision::Exact) => Precision::Bits(bits),
            (false, Precision::Bits(b)) => Precision::Bits(b.min(bits)),
        };
        Self::canonical(q, -(bits as i64), precision)
    }

    /// Exact multiplication by a power of two.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        DyadicReal { mantissa: self.mantissa.clone(), exponent: self.exponent + k, precision: self.precision }
    }

    pub fn mul_int(&self, n: &BigInt) -> Self {
        let precision = match self.precision {
            Precision::Exact => Precision::Exact,
            Precision::Bits(b) => Precision::Bits(b.saturating_sub(n.bits())),
        };
        Self::canonical(&self.mantissa * n, self.exponent, precision)
    }

    pub fn midpoint(a: &Self, b: &Self) -> Self {
        (a + b).mul_pow2(-1)
    }

    /// Nearest `f64` (correct up to the final conversion of a 64-bit head).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits();
        let (head, e) = if bits > 64 {
            let drop = bits - 64;
            (floor_shr(&self.mantissa, drop), self.exponent + drop as i64)
        } else {
            (self.mantissa.clone(), self.exponent)
        };
        let h = head.to_f64().unwrap_or(0.0);
        ldexp(h, e)
    }

    /// Value times `2^bits` as an unsigned integer; requires a nonnegative value
    /// with at most `bits` fractional bits.
    pub fn to_scaled_biguint(&self, bits: u64) -> Option<BigUint> {
        if self.is_negative() {
            return None;
        }
        let shift = self.exponent + bits as i64;
        if shift < 0 {
            return None;
        }
        Some(self.mantissa.magnitude() << shift as u64)
    }

    /// The exact rational value.
    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as u64)
        } else {
            BigRational::new(self.mantissa.clone(), BigInt::one() << (-self.exponent) as u64)
        }
    }

    /// Rounds a rational to a multiple of `2^-bits`.
    pub fn from_rational(x: &BigRational, bits: u64, mode: Rounding) -> Self {
        Self::from_ratio(x.numer(), x.denom(), bits, mode).expect("rational has nonzero denominator")
    }

    /// Exact comparison with a rational.
    pub fn cmp_rational(&self, x: &BigRational) -> Ordering {
        // Cross-multiplied; the denominator of `x` is positive.
        if self.exponent >= 0 {
            ((&self.mantissa << self.exponent as u64) * x.denom()).cmp(x.numer())
        } else {
            (&self.mantissa * x.denom()).cmp(&(x.numer() << (-self.exponent) as u64))
        }
    }

    /// `0x<hex mantissa>p<exponent>` rendering; lossless.
    pub fn to_hex(&self) -> String {
        let sign = if self.is_negative() { "-" } else { "" };
        format!("{sign}0x{}p{}", self.mantissa.magnitude().to_str_radix(16), self.exponent)
    }

    /// Plain decimal rendering with exactly `sig` significant digits
    /// (round half to even).
    pub fn to_decimal(&self, sig: usize) -> String {
        assert!(sig > 0);
        if self.is_zero() {
            return "0".to_string();
        }
        let sign = if self.is_negative() { "-" } else { "" };
        let mag = self.mantissa.abs();
        // Decimal exponent estimate of |x|; corrected below.
        let log10 = (mag.bits() as f64 - 1.0 + self.exponent as f64) * std::f64::consts::LOG10_2;
        let mut d = log10.floor() as i64;
        let ten = BigInt::from(10u32);
        let sig_i = sig as i64;
        let limit = ten.pow(sig as u32);
        let lower = ten.pow(sig as u32 - 1);
        let digits = loop {
            // D = round(|x| * 10^(sig - 1 - d))
            let k = sig_i - 1 - d;
            let (mut num, mut den) = (mag.clone(), BigInt::one());
            if k >= 0 {
                num *= ten.pow(k as u32);
            } else {
                den *= ten.pow((-k) as u32);
            }
            if self.exponent >= 0 {
                num <<= self.exponent as u64;
            } else {
                den <<= (-self.exponent) as u64;
            }
            let q = round_ratio(&num, &den, Rounding::NearestEven);
            if q >= limit {
                d += 1;
            } else if q < lower {
                d -= 1;
            } else {
                break q;
            }
        };
        let ds = digits.to_string();
        let body = if d >= 0 {
            let int_len = (d + 1) as usize;
            if int_len >= ds.len() {
                format!("{}{}", ds, "0".repeat(int_len - ds.len()))
            } else {
                format!("{}.{}", &ds[..int_len], &ds[int_len..])
            }
        } else {
            format!("0.{}{}", "0".repeat((-d - 1) as usize), ds)
        };
        format!("{sign}{body}")
    }
}

/// `x * 2^e` without intermediate overflow.
pub(crate) fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

impl PartialEq for DyadicReal {
    fn eq(&self, other: &Self) -> bool {
        self.mantissa == other.mantissa && self.exponent == other.exponent
    }
}

impl Eq for DyadicReal {}

impl PartialOrd for DyadicReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.mantissa.sign(), other.mantissa.sign());
        if sa != sb {
            let rank = |s: Sign| match s {
                Sign::Minus => 0,
                Sign::NoSign => 1,
                Sign::Plus => 2,
            };
            return rank(sa).cmp(&rank(sb));
        }
        if sa == Sign::NoSign {
            return Ordering::Equal;
        }
        // Same sign: compare the integer-bit counts first, then align.
        let la = self.mantissa.bits() as i64 + self.exponent;
        let lb = other.mantissa.bits() as i64 + other.exponent;
        if la != lb {
            let mag = la.cmp(&lb);
            return if sa == Sign::Plus { mag } else { mag.reverse() };
        }
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &other.mantissa << (other.exponent - e) as u64;
        a.cmp(&b)
    }
}

impl std::hash::Hash for DyadicReal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.mantissa.hash(state);
        self.exponent.hash(state);
    }
}

impl<'a> Add<&'a DyadicReal> for &'a DyadicReal {
    type Output = DyadicReal;
    fn add(self, rhs: &DyadicReal) -> DyadicReal {
        let precision = self.precision.combine_sum(rhs.precision);
        if self.is_zero() {
            return rhs.clone().with_precision(precision);
        }
        if rhs.is_zero() {
            return self.clone().with_precision(precision);
        }
        let e = self.exponent.min(rhs.exponent);
        let a = &self.mantissa << (self.exponent - e) as u64;
        let b = &rhs.mantissa << (rhs.exponent - e) as u64;
        DyadicReal::canonical(a + b, e, precision)
    }
}

impl<'a> Sub<&'a DyadicReal> for &'a DyadicReal {
    type Output = DyadicReal;
    fn sub(self, rhs: &DyadicReal) -> DyadicReal {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a DyadicReal> for &'a DyadicReal {
    type Output = DyadicReal;
    fn mul(self, rhs: &DyadicReal) -> DyadicReal {
        let precision = match (self.precision, rhs.precision) {
            (Precision::Exact, Precision::Exact) => Precision::Exact,
            (Precision::Exact, Precision::Bits(b)) => Precision::Bits(b.saturating_sub(magnitude_bits(self))),
            (Precision::Bits(a), Precision::Exact) => Precision::Bits(a.saturating_sub(magnitude_bits(rhs))),
            (Precision::Bits(a), Precision::Bits(b)) => Precision::Bits(
                a.saturating_sub(magnitude_bits(rhs)).min(b.saturating_sub(magnitude_bits(self))).saturating_sub(1),
            ),
        };
        DyadicReal::canonical(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent, precision)
    }
}

impl Neg for &DyadicReal {
    type Output = DyadicReal;
    fn neg(self) -> DyadicReal {
        DyadicReal { mantissa: -&self.mantissa, exponent: self.exponent, precision: self.precision }
    }
}

impl Neg for DyadicReal {
    type Output = DyadicReal;
    fn neg(self) -> DyadicReal {
        DyadicReal { mantissa: -self.mantissa, exponent: self.exponent, precision: self.precision }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<DyadicReal> for DyadicReal {
            type Output = DyadicReal;
            fn $m(self, rhs: DyadicReal) -> DyadicReal {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for DyadicReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(30))
    }
}
