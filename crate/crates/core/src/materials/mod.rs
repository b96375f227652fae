//! Bulk energy densities and cohesive surface densities.

pub mod bulk;
pub mod cohesive;

pub use bulk::{bulk_energy, bulk_gradient, BulkKind, BulkModel};
pub use cohesive::{
    increment_cost, phi, prox_increment, psi_tilde, smooth_gradient, CohesiveLaw, LawField,
};
