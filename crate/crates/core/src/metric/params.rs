use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::numerics::{DoubleDouble, DyadicReal, Rounding};

/// Bits kept for `Q` and `R`; everything else is derived exactly from them.
const PARAM_BITS: u64 = 100;

/// Window and truncation parameters for a given `N` and `epsilon`:
/// `Q = (ln N)^(1+2 eps)`, `M = Q^2`, `R = (ln N)^eps`, `P = M / R`.
///
/// `Q` and `R` are rounded once; `M` and `P` are then computed exactly from
/// them so that `M = Q^2` and `R * P = M` hold without error.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricParameters {
    pub n: u64,
    pub epsilon: f64,
    pub ln_n: DoubleDouble,
    pub q: DyadicReal,
    pub m: DyadicReal,
    pub p: BigRational,
    pub r: DyadicReal,
}

pub const DEFAULT_EPSILON: f64 = 0.05;

impl MetricParameters {
    pub fn new(n: u64, epsilon: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::NBelowThreshold(format!("metric parameters need N >= 3, got {n}")));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::EpsilonDomain(epsilon.to_string()));
        }
        let ln_n = DoubleDouble::from_u64(n).ln();
        let e = DoubleDouble::from_f64(epsilon);
        let q = ln_n.powf(DoubleDouble::ONE + e.mul_f64(2.0)).to_dyadic().round_to(PARAM_BITS);
        let r = ln_n.powf(e).to_dyadic().round_to(PARAM_BITS);
        let m = &q * &q;
        let p = m.to_rational() / r.to_rational();
        Ok(MetricParameters { n, epsilon, ln_n, q, m, p, r })
    }

    /// Window width `M / N`.
    pub fn width(&self) -> f64 {
        self.m.to_f64() / self.n as f64
    }

    /// `N / P`, the truncation frequency of the smoothed count.
    pub fn n_over_p(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.n)) / &self.p
    }

    /// `(1 / 10R) * (M/N) * 2 * (N/P)`, the Taylor-domination quantity; equals 1/5.
    pub fn taylor_premise(&self) -> BigRational {
        let ten_r = self.r.to_rational() * BigRational::from_integer(BigInt::from(10));
        let w = self.m.to_rational() / BigRational::from_integer(BigInt::from(self.n));
        w * BigRational::from_integer(BigInt::from(2)) * self.n_over_p() / ten_r
    }

    /// The thinning exponent `1 + 2 eps`.
    pub fn thinning_exponent(&self) -> f64 {
        1.0 + 2.0 * self.epsilon
    }

    pub fn p_dyadic(&self) -> DyadicReal {
        DyadicReal::from_rational(&self.p, PARAM_BITS, Rounding::NearestEven)
    }
}
