//! Exact arithmetic for classical and orthogonal-group Kloosterman sums.
//!
//! The crate evaluates local Kloosterman sums on `SO(3,3)` and `SO(4,2)` by
//! three independent routes and checks them against each other:
//!
//! * closed formulas (classical sums, a `GL(3)`-type double sum, and a
//!   four-parameter orthogonal sum),
//! * direct enumeration of the underlying double-coset sets through
//!   Pluecker coordinates and Bruhat factorization,
//! * a p-adic stationary-phase evaluator that collapses large moduli to a
//!   bounded set of critical points.
//!
//! All sum values are exact elements of the ring of integers of a
//! prime-power cyclotomic field ([`cyclo::CycloSum`]); floating point only
//! appears when comparing magnitudes against analytic bounds, and always
//! with an explicit error bound.

pub mod closedsums;
pub mod cyclo;
pub mod fasteval;
pub mod harness;
pub mod kloosterset;
pub mod matlin;
pub mod modarith;
pub mod plucker;
