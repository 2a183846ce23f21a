pub mod cf;
pub mod error;
pub mod littlewood;
pub mod numerics;
pub mod sequences;
pub mod metric;
pub mod nested;
pub mod turan;

pub use error::{Error, Result};
