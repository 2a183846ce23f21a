//! The standard mollifier `f(x) = c exp(-1 / (1 - x^2))` on `(-1, 1)` and a
//! cached table of its Fourier transform.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::numerics::DoubleDouble;

/// Table spacing in `y`.
const TABLE_STEP: f64 = 1.0 / 512.0;
/// The table covers `[0, TABLE_END]`; beyond it only the tail bound is used.
pub const TABLE_END: f64 = 128.0;
/// Spacing of the `x` grid used to tabulate the transform.
const X_STEP: f64 = 1.0 / 512.0;
/// Past this point the tabulated transform is below `1e-12` (its quadrature
/// noise floor is near `1e-13`) and is dropped from sums.
pub const NEGLIGIBLE_FROM: f64 = 100.0;

#[derive(Debug)]
pub struct BumpFunction {
    /// `1 / integral of exp(-1/(1-x^2))`.
    c: DoubleDouble,
    /// `Ff` and its derivative at `j * TABLE_STEP`.
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `suffix_sup[j] = max_{i >= j} |values[i]|`.
    suffix_sup: Vec<f64>,
}

fn unnormalized(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

fn unnormalized_dd(x: DoubleDouble) -> DoubleDouble {
    let one = DoubleDouble::ONE;
    let d = one - x * x;
    if d.hi() <= 0.0 {
        return DoubleDouble::ZERO;
    }
    (-(one / d)).exp()
}

/// Trapezoid rule for the integral of `exp(-1/(1-x^2))` over `[-1, 1]` with
/// `2^k` panels on `[0, 1]`; spectrally accurate since all derivatives vanish at 1.
pub(crate) fn mass_trapezoid(k: u32) -> DoubleDouble {
    let panels = 1u64 << k;
    let h = DoubleDouble::ONE.ldexp(-(k as i32));
    let mut s = unnormalized_dd(DoubleDouble::ZERO).mul_f64(0.5);
    for i in 1..panels {
        s = s + unnormalized_dd(DoubleDouble::from_u64(i) * h);
    }
    (s * h).mul_f64(2.0)
}

impl BumpFunction {
    fn build() -> Self {
        let mass = mass_trapezoid(9);
        let c = DoubleDouble::ONE / mass;
        let cf = c.to_f64();
        let nx = (1.0 / X_STEP) as usize;
        let fx: Vec<f64> = (0..nx).map(|i| cf * unnormalized(i as f64 * X_STEP)).collect();
        let ny = (TABLE_END / TABLE_STEP) as usize + 1;
        let pairs: Vec<(f64, f64)> = (0..ny)
            .into_par_iter()
            .map(|j| {
                let y = j as f64 * TABLE_STEP;
                // Ff(y) = 2 int_0^1 f(x) cos(2 pi x y) dx; the derivative brings down -2 pi x sin.
                let mut v = 0.5 * fx[0];
                let mut d = 0.0;
                for (i, &f) in fx.iter().enumerate().skip(1) {
                    let x = i as f64 * X_STEP;
                    let (s, co) = (2.0 * PI * x * y).sin_cos();
                    v += f * co;
                    d -= f * 2.0 * PI * x * s;
                }
                (2.0 * X_STEP * v, 2.0 * X_STEP * d)
            })
            .collect();
        let (values, slopes): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut suffix_sup = vec![0.0; ny];
        let mut run: f64 = 0.0;
        for j in (0..ny).rev() {
            run = run.max(values[j].abs());
            suffix_sup[j] = run;
        }
        BumpFunction { c, values, slopes, suffix_sup }
    }

    /// Shared instance; the table is built on first use.
    pub fn get() -> &'static BumpFunction {
        static CELL: OnceLock<BumpFunction> = OnceLock::new();
        CELL.get_or_init(Self::build)
    }

    pub fn normalization(&self) -> DoubleDouble {
        self.c
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.to_f64() * unnormalized(x)
    }

    pub fn eval_dd(&self, x: DoubleDouble) -> DoubleDouble {
        self.c * unnormalized_dd(x)
    }

    /// `(Ff)(y)` by cubic Hermite interpolation; zero past the table.
    pub fn fourier(&self, y: f64) -> f64 {
        let y = y.abs();
        if y >= TABLE_END {
            return 0.0;
        }
        let t = y / TABLE_STEP;
        let j = t.floor() as usize;
        let s = t - j as f64;
        let (p0, p1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * TABLE_STEP, self.slopes[j + 1] * TABLE_STEP);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }

    /// Direct quadrature of `(Ff)(y)`, independent of the table.
    pub fn fourier_direct(&self, y: f64) -> f64 {
        let cf = self.c.to_f64();
        let nx = 4096usize;
        let h = 1.0 / nx as f64;
        let mut v = 0.5 * cf * unnormalized(0.0);
        for i in 1..nx {
            let x = i as f64 * h;
            v += cf * unnormalized(x) * (2.0 * PI * x * y).cos();
        }
        2.0 * h * v
    }

    /// Upper estimate of `sup_{|y| >= from} |(Ff)(y)|` read off the table.
    pub fn tail_sup(&self, from: f64) -> f64 {
        let from = from.abs();
        if from >= TABLE_END {
            return self.suffix_sup[self.suffix_sup.len() - 1];
        }
        let j = (from / TABLE_STEP).floor() as usize;
        self.suffix_sup[j]
    }

    /// Estimate of `sum_{k > k0} |(Ff)(w k)|` over the table range plus an
    /// envelope term for the part beyond it.
    pub fn tail_sum(&self, w: f64, k0: u64) -> f64 {
        let mut s = 0.0;
        let mut k = k0 + 1;
        while (k as f64) * w < TABLE_END {
            s += self.fourier(k as f64 * w).abs();
            k += 1;
        }
        // Past the table |Ff| decays faster than exp(-2 sqrt(pi y)); bound the
        // remaining sum by the end-of-table envelope times that integral.
        let y = TABLE_END;
        let tail_integral = (-2.0 * (PI * y).sqrt()).exp() * ((y / PI).sqrt() + 0.5 / PI);
        let scale = self.tail_sup(TABLE_END - 8.0) / (-2.0 * (PI * (TABLE_END - 8.0)).sqrt()).exp();
        s + scale * tail_integral / w
    }
}
