//! Exact p-adic arithmetic and the dynamics of `f(x) = a / x^q` over `Q_p`.

pub mod cli;
pub mod dynamics;
pub mod error;
mod json;
pub mod norm_geometry;
pub mod padic;
pub mod roots;
pub mod verification;

pub use error::{Error, Result};
pub use norm_geometry::{MapParams, Measured, RadiusExp};
pub use padic::{PAdicContext, PAdicNumber};
