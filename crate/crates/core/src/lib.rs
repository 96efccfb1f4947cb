//! Discrete machinery for projecting maps onto volume-preserving
//! diffeomorphisms and for a projection-based Navier-Stokes time stepper.
//!
//! The crate is organized bottom-up:
//!
//! * [`smallmat`]: fixed-dimension matrix kernels (determinant, cofactor,
//!   smallest singular value) and the cofactor gap functions they feed.
//! * [`polyconvex`]: field-level convexity machinery: the Bregman divergence
//!   of the determinant, randomized inequality verification, and the
//!   uniqueness certificate arithmetic.
//! * [`grid`]: uniform-grid calculus on the unit box: MAC-staggered
//!   velocities, cell-centered scalars, node-collocated maps, difference
//!   operators, interpolation, map inversion and norms.
//! * [`stokes`]: Leray projection, Stokes resolvent, heat semigroup and
//!   componentwise Helmholtz solves.
//! * [`projection`]: the weighted-H1 projection onto discretely
//!   volume-preserving maps via an augmented Lagrangian, plus the residual,
//!   reference-point and smallness diagnostics.
//! * [`nse`]: the discrete-in-time Navier-Stokes scheme built from the
//!   projection, with energy/Duhamel/flow diagnostics and a Chorin-style
//!   reference solver.
//!
//! Runnable demonstrations of each capability live in `examples/`; the thin
//! `polyproj` binary exposes the same entry points as subcommands.

pub mod config;
pub mod error;
pub mod grid;
pub mod lbfgs;
pub mod nse;
pub mod polyconvex;
pub mod projection;
pub mod rng;
pub mod smallmat;
pub mod stokes;

pub use error::{Error, Result};
