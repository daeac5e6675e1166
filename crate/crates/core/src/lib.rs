pub mod cli;
pub mod error;
pub mod estimators;
pub mod eta;
pub mod interp;
pub mod measures;
pub mod quadrature;
pub mod simulation;
pub mod special;
pub mod tables;

pub use error::{LdError, Result};
