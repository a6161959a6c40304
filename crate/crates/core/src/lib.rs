//! Edge-element (second-family Nedelec) discretization of the time-harmonic
//! Maxwell equations with an impedance boundary condition on the unit cube,
//! with the tooling needed for convergence and pollution studies.
//!
//! Pipeline: [`mesh`] builds a Kuhn mesh, [`fe_basis`] the discrete space,
//! [`assembly`] the complex system for a [`manufactured`] problem,
//! [`linsolve`] solves it and [`analysis`] measures errors; [`study`] runs
//! whole experiments.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fe_basis;
pub mod linsolve;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod special_fn;
pub mod study;

pub use error::{Error, Result};
