//! Offspring maxima in branching processes.
//!
//! The crate has three layers that check one another:
//!
//! * [`pgf`] computes exact finite-generation laws by iterating probability
//!   generating functions;
//! * [`simulate`] runs the same processes forward with reproducible random
//!   streams;
//! * [`limits`] evaluates the closed-form limit laws for the offspring
//!   maximum, and [`verify`] measures the distance between any two of these.
//!
//! ```
//! use branchmax::distributions::DiscreteLaw;
//! use branchmax::pgf::{exact_max_cdf, Conditioning, ProcessSpec};
//!
//! let spec = ProcessSpec::plain(DiscreteLaw::geometric(0.6).unwrap());
//! let p = exact_max_cdf(&spec, 100, 0.0, Conditioning::Survival).unwrap();
//! assert!((p - 1.0 / 3.0).abs() < 1e-6);
//! ```

pub mod distributions;
pub mod error;
pub mod limits;
pub mod numerics;
pub mod pgf;
pub mod rng;
pub mod simulate;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/processes.md")]
    mod processes {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
