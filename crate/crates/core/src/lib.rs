#![no_std]
// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod fock;
pub mod homodyne;
pub mod special;
pub mod state_prep;
pub mod subtraction;
pub mod tomography;
pub mod wigner;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockDim, KrausChannel, TwoModeState};
pub use num_complex::Complex64;
