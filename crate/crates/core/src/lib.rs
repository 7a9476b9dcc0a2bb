//! Weak Galerkin finite elements of arbitrary order on two-dimensional
//! polygonal meshes whose edges may be circular arcs or polynomial curves.
//!
//! The pipeline is: [`geometry`] (mesh + shape audit) → [`quadrature`]
//! (exact moments, edge and fan rules) → [`basis`] (scaled monomials and
//! edge trace spaces) → [`weakgrad`] (discrete weak gradient, L²
//! projections) → [`assembly`] → [`solver`] → [`analysis`] (error norms,
//! observed orders).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod error;
pub mod geometry;
pub mod mesh_io;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod weakgrad;

pub use error::{Result, WgError};
