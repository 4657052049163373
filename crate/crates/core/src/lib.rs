//! Greedy approximation with respect to finite dictionaries in the complex
//! sequence spaces l_p^n, 1 < p < infinity.
//!
//! The crate provides the four greedy schemes (weak greedy with free
//! relaxation, greedy with weakness and relaxation, and the complex and
//! complex-convex incremental algorithms), the geometry they rely on
//! (norming functionals, smoothness bounds), and numerical checkers that turn
//! the convergence inequalities into pass/fail reports over recorded traces.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod analysis;
pub mod dictionary;
pub mod error;
pub mod harness;
pub mod par;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
pub use space::{CVec, LpSpace, C64};
