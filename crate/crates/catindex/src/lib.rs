//! Indifference pricing and optimal premium loading for derivatives written
//! on an industry-wide claim index.
//!
//! The library models an insurer whose book is a thinned share of a compound
//! Poisson industry loss index: raising the premium loading theta sheds
//! clients through a demand curve q(theta), lowering exposure at the cost of
//! volume. Against exponential utility this yields a one-dimensional
//! backward ODE system on the index lattice whose solution gives
//! utility-indifference bid/ask prices, the optimal dynamic loading, seller
//! certainty-equivalence prices, and the risk-neutral limit. A Monte-Carlo
//! engine verifies the solved surfaces path by path.

// Validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod demand;
pub mod error;
pub mod model;
pub mod output;
pub mod pricing;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
