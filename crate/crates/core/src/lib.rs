pub mod autodiff;
pub mod dsp;
pub mod error;
pub mod fsutil;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod simvowels;

pub use error::{Error, Result};
