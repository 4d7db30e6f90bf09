//! Toolkit for piecewise-linear approximation systems attached to lattice
//! minima of one-parameter families of convex bodies.
//!
//! The crate is organised around three layers:
//!
//! * exact scalar types: arbitrary-precision rationals ([`rat`]) and
//!   certified interval enclosures of `exp`/`ln` ([`arb`]);
//! * piecewise-linear functions and the combinatorial systems built from
//!   them ([`plfun`], [`systems`], [`reduce`], [`rigidify`]);
//! * integer lattice geometry: exact successive minima of the parametric
//!   bodies, trajectories, compound bodies, and the inverse construction
//!   that realises a rigid system by a unit vector ([`lattice`],
//!   [`realize`], [`exponents`]).

pub mod arb;
pub mod exponents;
pub mod lattice;
pub mod plfun;
pub mod rat;
pub mod realize;
pub mod reduce;
pub mod rigidify;
pub mod systems;

pub use plfun::PLFun;
pub use rat::Rat;
