//! Double-double floating point (about 106 significant bits).
//!
//! Used where `f64` is too coarse but full dyadic arithmetic would be
//! wasteful: bump-function normalization, logarithms in the normalized gap
//! columns, and the smooth counting sums.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::dyadic::DyadicReal;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub const LN2: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };
pub const PI: DoubleDouble = DoubleDouble { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 };

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn from_u64(n: u64) -> Self {
        let hi = n as f64;
        // `hi` may have rounded; the remainder fits in a double exactly.
        let lo = (n as i128 - hi as i128) as f64;
        Self::new(hi, lo)
    }

    /// Rounds a dyadic to the nearest double-double (head plus residual).
    pub fn from_dyadic(x: &DyadicReal) -> Self {
        let hi = x.to_f64();
        if !hi.is_finite() || hi == 0.0 {
            return Self::from_f64(hi);
        }
        let rest = x - &DyadicReal::from_f64(hi).expect("finite");
        Self::new(hi, rest.to_f64())
    }

    /// Exact conversion to a dyadic.
    pub fn to_dyadic(self) -> DyadicReal {
        let h = DyadicReal::from_f64(self.hi).expect("finite double-double");
        let l = DyadicReal::from_f64(self.lo).expect("finite double-double");
        &h + &l
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    pub fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        DoubleDouble { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn exp(self) -> Self {
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // e^r = (e^(r/1024))^1024; the Taylor series converges fast for tiny s.
        let s = r.ldexp(-10);
        // Work with u = e^s - 1 so squaring, (1 + u)^2 = 1 + u(2 + u), keeps
        // the relative precision of the small quantity.
        let mut term = s;
        let mut u = s;
        for i in 2..=14u32 {
            term = (term * s) / Self::from_f64(i as f64);
            u = u + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            u = u * (u + Self::from_f64(2.0));
        }
        (u + Self::ONE).ldexp(k as i32)
    }

    /// Natural logarithm by Newton iteration on `exp`; requires a positive argument.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of a non-positive double-double");
        let mut y = Self::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::ONE;
        }
        y
    }

    pub fn powf(self, e: DoubleDouble) -> Self {
        (e * self.ln()).exp()
    }

    /// `cos(2 pi x)` accurate to roughly `1e-16` absolute; argument reduced mod 1 first.
    pub fn cos_2pi(x: DoubleDouble) -> f64 {
        let xr = x - Self::from_f64(x.hi.round());
        let xr = xr - Self::from_f64(xr.hi.round());
        (PI.mul_f64(2.0) * xr).to_f64().cos()
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, b: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, b: DoubleDouble) -> DoubleDouble {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, b: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = DoubleDouble;
    fn div(self, b: DoubleDouble) -> DoubleDouble {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + Self::from_f64(q3)
    }
}

impl std::iter::Sum for DoubleDouble {
    fn sum<I: Iterator<Item = DoubleDouble>>(iter: I) -> DoubleDouble {
        iter.fold(DoubleDouble::ZERO, |a, b| a + b)
    }
}
