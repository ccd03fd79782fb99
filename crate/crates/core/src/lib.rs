pub mod cli;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod measures;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
