//! Fundamental sensing limits of multiband OFDM delay estimation — CRB,
//! statistical resolution limit, delay error bound, Ziv-Zakai bound, expected
//! CRB — together with an alternating-optimization / successive-convex-
//! approximation solver that picks carrier frequencies and subcarrier counts
//! minimizing the delay SRL under spectrum constraints.
//!
//! Internal units are GHz and ns so phase products are order-1; conversion
//! helpers accept Hz and seconds at the boundary. All computations are pure
//! functions of their inputs and explicit seeds.

// NaN-rejecting guards of the form `!(x > 0.0)` are used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fisher;
pub mod model;
pub mod optimizer;
pub mod resolution;
pub mod zzb;

pub use error::{Error, Result};
