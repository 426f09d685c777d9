pub mod distributions;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod hdp;
pub mod linalg;
pub mod modes;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
