//! Exact dyadic arithmetic, double-double helpers, and torus gap statistics.

pub mod dd;
pub mod dyadic;
pub mod torus;

pub use dd::DoubleDouble;
pub use dyadic::{DyadicReal, Precision, Rounding};
pub use torus::{
    dilate, dilate_fixed, dilate_gap_report, dilate_max_gap, dist_nearest_int, frac, gap_report, gap_report_with_epsilon,
    check_precision, fixed_gap_to_f64, max_gap_fixed, required_bits, GapReport, Normalized, TorusPoint,
};
