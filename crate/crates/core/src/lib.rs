//! Energy-landscape toolkit for a conserved double-well functional on the
//! flat d-dimensional torus.
//!
//! The library covers four layers:
//! * a reduced one-variable droplet model and its closed-form constants
//!   ([`reduced`]),
//! * discretized order-parameter fields with energy, mean-constrained energy
//!   gap, partition-of-unity volume functional, truncation, and lower-bound
//!   certificates ([`field`]),
//! * explicit droplet constructions and barrier paths ([`construction`]),
//!   plus string-method saddle refinement ([`saddle`]),
//! * sharp-interface rescaling: gap functional, limit functional, recovery
//!   fields and convergence sweeps ([`gamma`]).
//!
//! All numerics are seedless and deterministic: reductions use fixed chunk
//! boundaries, so results are bit-identical across thread counts.

pub mod construction;
pub mod field;
pub mod gamma;
pub mod io;
pub mod numerics;
pub mod params;
pub mod reduced;
pub mod saddle;
