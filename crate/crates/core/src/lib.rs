//! Pulse-level simulation of nuclear-spin quantum logic mediated by a
//! photo-excited triplet electron spin.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod powder;
pub mod sequences;
pub mod spincore;
pub mod tomography;

pub use error::{Error, Result};
