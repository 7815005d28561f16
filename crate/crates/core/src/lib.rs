pub mod decay;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod foliation;
pub mod geometry;
pub mod multipliers;
pub mod tensor;

pub use error::{Error, Result};
