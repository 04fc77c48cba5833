//! Differentially private approximations of second-moment matrices `AᵀA`,
//! and least-squares regression on top of them.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the experiment
//! harness and the command-line tool live in the `gramdp-cli` crate.

#![no_std]

extern crate alloc;

mod error;

pub mod dataset;
pub mod linalg;
pub mod mechanisms;
pub mod regress;
pub mod rng;
pub mod sampling;
pub mod statcheck;

pub use dataset::{clip_rows, gram, Dataset, PrivacyBudget, SecondMoment};
pub use error::{Error, Result};
pub use linalg::{is_positive_definite, min_singular_value, SymMatrix};
pub use mechanisms::{GramEstimate, Input, MechanismConfig, MechanismId};
pub use rng::RngStream;
pub use regress::{l2_error, solve_from_gram, Coefficients, RegressionTask};
