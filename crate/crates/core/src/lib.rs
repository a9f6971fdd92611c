pub mod cli;
pub mod error;
pub mod kernel;
pub mod limit_density;
pub mod moments;
pub mod perturbation;
pub mod quadrature;
pub mod recurrence;
pub mod scaling;
pub mod special;
pub mod weights;

pub use error::{Error, Result};
