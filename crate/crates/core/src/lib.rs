#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod cli;
pub mod coeffs;
pub mod dilation;
pub mod errcorr;
pub mod error;
pub mod fock;
pub mod info;
pub mod kraus;
pub mod quadratic;
pub mod random;
pub mod verify;

pub use error::{Error, Result};
