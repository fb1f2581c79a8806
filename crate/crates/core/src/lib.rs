//! Plane-strain phase-field fracture with material strength.
//!
//! Each load step alternates a linear elastic solve for the displacement
//! (with stiffness degraded by `v² + η`) and a bound-constrained solve for
//! the phase field `v ∈ [0, v_previous]`, where the phase-field functional
//! carries a Drucker–Prager strength driving force in addition to the
//! elastic and regularized surface energies.

pub mod config;
pub mod driver;
pub mod fem;
pub mod io;
pub mod material;
pub mod mesh;
pub mod scenarios;
pub mod solver;
pub mod sparse;
pub mod tensor;
pub mod verify;
