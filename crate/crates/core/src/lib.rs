//! Exact bound states of the conformable fractional Klein-Gordon equation
//! with a generalized Hulthen scalar potential, plus the numeric oracles
//! used to check them.

pub mod cli;
pub mod conformable;
pub mod error;
pub mod hulthen_kg;
pub mod mu_algebra;
pub mod nu_core;
pub mod verify;

pub use conformable::FracOrder;
pub use error::{Error, Result};
pub use hulthen_kg::{Eigenstate, HulthenParams};
pub use mu_algebra::{Exponent, MuTermSum, Shape};
pub use nu_core::{NuProblem, NuSolution};
