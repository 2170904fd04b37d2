//! Commuting-projector lattice Hamiltonians with topological order, their
//! local perturbations, and numerical checks of spectral stability.
//!
//! The crate is organised bottom-up: [`lattice`] geometry, [`operators`]
//! algebra, [`models`] for the unperturbed Hamiltonians, [`tqo`] for the
//! order conditions, [`perturb`] for interaction families, [`spectral`] for
//! eigenvalue work, [`filters`] and [`flow`] for quasi-adiabatic continuation.

pub mod error;
pub mod filters;
pub mod flow;
pub mod lattice;
pub mod models;
pub mod operators;
pub mod par;
pub mod perturb;
pub mod spectral;
pub mod tqo;

pub use error::{Error, Result};
pub use num_complex::Complex64;
