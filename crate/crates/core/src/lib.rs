//! Discontinuous Galerkin discretisation of the stationary linear Boltzmann
//! transport equation in space, angle and energy, solved as a multigroup
//! discrete-ordinates scheme with source iteration.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod angular;
pub mod assembly;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod physics;
pub mod quadrature;
pub mod solver;
pub mod spatial_mesh;
pub mod study;
pub mod verify;

pub use error::{Error, Result};
