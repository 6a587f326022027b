pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod geometry;
pub mod noise;
pub mod output;
pub mod quadrature;
pub mod scheme;
pub mod sparse;

pub use error::{FsiError, Result};
