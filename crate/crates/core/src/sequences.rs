//! Lacunary integer sequences and their strided (thinned) subsequences.

use std::io::{BufRead, Write};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numerics::DoubleDouble;

/// Positive integers with `a_{n+1} >= r * a_n`. Indexing is 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct LacunarySequence {
    terms: Vec<BigUint>,
    r: BigRational,
    verified: bool,
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s}"));
    if let Some((a, b)) = s.split_once('/') {
        let a = BigInt::from_str(a.trim()).map_err(|_| bad())?;
        let b = BigInt::from_str(b.trim()).map_err(|_| bad())?;
        if b.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(a, b));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let neg = int.starts_with('-');
    let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let n = BigInt::from_str(&digits).map_err(|_| bad())?;
    let n = if neg { -n } else { n };
    Ok(BigRational::new(n, BigInt::from(10u32).pow(frac.len() as u32)))
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Smallest 1-based `n` with `a_{n+1} < r * a_n`, or `None` when the whole list is lacunary.
pub fn verify_hadamard(terms: &[BigUint], r: &BigRational) -> Option<usize> {
    let (p, q) = (r.numer(), r.denom());
    terms.windows(2).position(|w| BigInt::from(w[1].clone()) * q < BigInt::from(w[0].clone()) * p).map(|i| i + 1)
}

/// `a_n = ceil(r^n)`, pushed up where needed so that `a_{n+1} >= r a_n` holds exactly.
pub fn geometric_sequence(r: &BigRational, n_terms: usize) -> Result<LacunarySequence> {
    if r <= &BigRational::one() {
        return Err(Error::NotLacunary(format_rational(r)));
    }
    // r = p/q in lowest terms, so p^n / q^n needs no further reduction.
    let (p, q) = (r.numer().magnitude(), r.denom().magnitude());
    let mut terms: Vec<BigUint> = Vec::with_capacity(n_terms);
    let (mut pn, mut qn) = (BigUint::one(), BigUint::one());
    for _ in 0..n_terms {
        pn *= p;
        qn *= q;
        let mut t = pn.div_ceil(&qn);
        if let Some(prev) = terms.last() {
            let need = (prev * p).div_ceil(q);
            if need > t {
                t = need;
            }
        }
        terms.push(t);
    }
    Ok(LacunarySequence { terms, r: r.clone(), verified: true })
}

impl LacunarySequence {
    /// Validates the growth condition; fails with the first violating index.
    pub fn new(terms: Vec<BigUint>, r: BigRational) -> Result<Self> {
        if r <= BigRational::one() {
            return Err(Error::NotLacunary(format_rational(&r)));
        }
        if terms.is_empty() || terms[0].is_zero() {
            return Err(Error::InvalidInput("sequence needs positive terms".into()));
        }
        if let Some(i) = verify_hadamard(&terms, &r) {
            return Err(Error::NotLacunary(format!("a_{} < {} a_{i}", i + 1, format_rational(&r))));
        }
        Ok(LacunarySequence { terms, r, verified: true })
    }

    /// Powers `base^1, ..., base^n`; the common test sequence.
    pub fn powers(base: u32, n_terms: usize) -> Result<Self> {
        geometric_sequence(&BigRational::from_integer(BigInt::from(base)), n_terms)
    }

    pub fn terms(&self) -> &[BigUint] {
        &self.terms
    }

    /// `a_n` for `1 <= n <= len`.
    pub fn term(&self, n: usize) -> &BigUint {
        &self.terms[n - 1]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn r(&self) -> &BigRational {
        &self.r
    }

    pub fn verified(&self) -> bool {
        self.verified
    }

    /// `ln r` in double-double precision.
    pub fn ln_r(&self) -> DoubleDouble {
        ln_rational(&self.r)
    }

    /// Writes `# r=<rational>` and one decimal term per line.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# r={}", format_rational(&self.r))?;
        for t in &self.terms {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut ratio = None;
        let mut terms = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("r=") {
                    ratio = Some(parse_rational(v)?);
                }
                continue;
            }
            terms.push(BigUint::from_str(line).map_err(|_| Error::Parse(format!("bad term {line}")))?);
        }
        let ratio = ratio.ok_or_else(|| Error::Parse("missing `# r=` header".into()))?;
        Self::new(terms, ratio)
    }
}

pub fn ln_rational(r: &BigRational) -> DoubleDouble {
    ln_bigint(r.numer().magnitude()) - ln_bigint(r.denom().magnitude())
}

/// `ln n` for a positive integer of any size.
pub fn ln_biguint(n: &BigUint) -> DoubleDouble {
    ln_bigint(n)
}

fn ln_bigint(n: &BigUint) -> DoubleDouble {
    let bits = n.bits();
    if bits <= 100 {
        let hi = n.to_f64().expect("finite");
        let rest = BigInt::from(n.clone()) - BigInt::from_biguint(num_bigint::Sign::Plus, BigUint::from(hi as u128));
        let x = DoubleDouble::new(hi, rest.to_f64().unwrap_or(0.0));
        return x.ln();
    }
    // n = m * 2^shift with m carrying 100 bits.
    let shift = bits - 100;
    let m = n >> shift;
    ln_bigint(&m) + crate::numerics::dd::LN2.mul_f64(shift as f64)
}

/// Smallest positive integer `l` with `r^l > e`, i.e. `l ln r > 1`.
pub fn smallest_l(r: &BigRational) -> u64 {
    let ln_r = ln_rational(r).to_f64();
    let mut l = (1.0 / ln_r).floor().max(1.0) as u64;
    while (l as f64) * ln_r <= 1.0 {
        l += 1;
    }
    l
}

/// Strided subsequence `b_n = a_{offset + n * step}`, `n = 1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinnedSequence {
    pub n: u64,
    pub exponent: f64,
    pub l: u64,
    pub step: u64,
    pub k: usize,
    pub offset: usize,
    pub xi: f64,
    pub r: BigRational,
    pub terms: Vec<BigUint>,
}

/// Thinning parameters for `N` without touching a sequence: `(l, step, K)`.
pub fn thinning_parameters(r: &BigRational, n: u64, exponent: f64) -> Result<(u64, u64, usize)> {
    if r <= &BigRational::one() {
        return Err(Error::NotLacunary(format_rational(r)));
    }
    if exponent < 1.0 {
        return Err(Error::InvalidInput(format!("thinning exponent {exponent} below 1")));
    }
    let l = smallest_l(r);
    let ln_n = DoubleDouble::from_u64(n.max(1)).ln();
    let power = if exponent == 1.0 { ln_n } else { ln_n.powf(DoubleDouble::from_f64(exponent)) };
    let step = l * power.to_f64().floor() as u64;
    let denom = power.mul_f64(l as f64);
    let k = if denom.to_f64() > 0.0 { (DoubleDouble::from_u64(n) / denom).to_f64().floor() as usize } else { 0 };
    if step == 0 || k == 0 {
        return Err(Error::NBelowThreshold(format!("N = {n} gives step {step}, K = {k}")));
    }
    Ok((l, step, k))
}

pub fn thin(seq: &LacunarySequence, n: u64, exponent: f64) -> Result<ThinnedSequence> {
    thin_from(seq, n, exponent, 0)
}

/// Thinning of the block `(offset, offset + N]`.
pub fn thin_from(seq: &LacunarySequence, n: u64, exponent: f64, offset: usize) -> Result<ThinnedSequence> {
    let (l, step, k) = thinning_parameters(seq.r(), n, exponent)?;
    let last = offset + k * step as usize;
    if last > seq.len() || (offset as u64 + n) as usize > seq.len() {
        return Err(Error::InvalidInput(format!(
            "sequence has {} terms, block needs {}",
            seq.len(),
            (offset as u64 + n).max(last as u64)
        )));
    }
    let terms = (1..=k).map(|i| seq.term(offset + i * step as usize).clone()).collect();
    Ok(ThinnedSequence {
        n,
        exponent,
        l,
        step,
        k,
        offset,
        xi: l as f64 * seq.ln_r().to_f64(),
        r: seq.r().clone(),
        terms,
    })
}

impl ThinnedSequence {
    /// A thinned system given directly by its terms (used for small hand-built systems).
    pub fn from_terms(terms: Vec<BigUint>) -> Self {
        ThinnedSequence {
            n: terms.len() as u64,
            exponent: 1.0,
            l: 1,
            step: 1,
            k: terms.len(),
            offset: 0,
            xi: 0.0,
            r: BigRational::one(),
            terms,
        }
    }
}
