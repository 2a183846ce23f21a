//! Smoothed counting of dilates in short windows, the exponential-moment
//! bound behind the metric gap estimate, and Monte-Carlo gap scans.

pub mod bump;
pub mod counting;
pub mod moment;
pub mod params;
pub mod scan;

pub use bump::BumpFunction;
pub use params::{MetricParameters, DEFAULT_EPSILON};
pub use scan::{Measure, ScanTable};
