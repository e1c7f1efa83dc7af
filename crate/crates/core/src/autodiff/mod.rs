//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation as it executes. [`Var`] is a cheap
//! handle into the tape. Parameters enter as named leaves; after
//! [`Tape::backward`] their adjoints are added into a [`GradStore`].

mod gradcheck;
mod ops;
mod tape;

pub use gradcheck::grad_check;
pub use ops::{heaviside_surrogate, ScanMode};
pub(crate) use ops::{heaviside, sigmoid, softplus, softplus_inv};
pub use tape::{GradStore, Tape, Var};

#[cfg(test)]
mod tests;
