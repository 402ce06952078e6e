//! Simulation and admissibility checks for linear stochastic Volterra
//! operators `X_f(t) = ∫₀ᵗ H(t,s) f(s) dB(s)`.

pub mod criteria;
pub mod diagnostics;
pub mod error;
pub mod exprlang;
pub mod fixtures;
pub mod function;
pub mod kernel;
pub mod matrix;
pub mod quadrature;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use function::{BoundedFunction, SquareTail};
pub use kernel::{make_additive, make_custom, make_exponential, make_multiplicative, Kernel};
pub use matrix::Matrix;
pub use quadrature::{Grid, IntegralCurve};

// The guide's chapters run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/criteria.md")]
    mod criteria {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
