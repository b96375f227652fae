//! Quasistatic crack growth along a prescribed path with a cohesive interface.
//!
//! The crate discretizes the body with P1 elements, duplicates nodes across the
//! crack path and advances a time-incremental energy minimization in which the
//! history variable `gamma` records the largest cohesive energy density reached
//! so far at every interface node.

pub mod artifacts;
pub mod config;
mod error;
pub mod euler;
pub mod evolution;
pub mod geometry;
pub mod harness;
pub mod loads;
pub mod materials;
mod problem;
pub mod solver;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{build_rect_mesh_with_crack, build_rod_mesh, jump, Mesh, Side};
pub use loads::{BoundaryShape, LoadProgram, PieceField, Profile, Term};
pub use materials::{BulkKind, BulkModel, CohesiveLaw, LawField};
pub use problem::Problem;
