mod error;
pub mod estimators;
pub mod losses;
pub mod numerics;
pub mod sampling;
pub mod simulation;
pub mod validation;

pub use error::{Error, Result};
