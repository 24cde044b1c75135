//! Mean-reflected stochastic differential equations with two time-dependent
//! càdlàg barriers.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid_paths`]: time grids, step paths, barriers, total variation and
//!   η-oscillation counts.
//! - [`skorokhod_det`]: the deterministic two-barrier Skorokhod map (clamp
//!   recursion, explicit max/inf/sup formula, one-barrier forms, bounds).
//! - [`mean_map`]: the constraint function `h`, particle ensembles and the
//!   monotone map `H(t, z, Y) = E h(t, Y - EY + z)` with its inverse.
//! - [`mean_sp`]: the Skorokhod problem whose reflection acts on `E h(t, X_t)`.
//! - [`sde`]: drivers, the Euler-type particle scheme, the Picard solver and
//!   the investment example.
//! - [`cli`]: configuration, scenario registry and artifact emission.
//!
//! Particle loops run on rayon when the `parallel` feature is enabled (the
//! default). Every ensemble statistic goes through [`par`]'s fixed-shape
//! reductions, so results are bit-identical for any worker count and with the
//! feature disabled.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid_paths;
pub mod mean_map;
pub mod mean_sp;
pub mod par;
pub mod sde;
pub mod skorokhod_det;

pub use error::{Error, Result};
pub use grid_paths::{BarrierPair, GridPath, PathSource, PiecewiseSpec, TimeGrid};
pub use mean_map::{Ensemble, MeanConstraintFunction};
pub use mean_sp::{MeanSkorokhodProblem, MeanSkorokhodSolution};
pub use skorokhod_det::SkorokhodSolution;
