//! Independent reference solutions used to validate the numerical machinery:
//! Mie series for spheres, analytic dipole fields, and reference meshes.
//!
//! Everything here is implemented from closed-form series, never from the
//! integral-equation code it validates.

mod bessel;
mod dipole;
mod icosphere;
mod mie;

pub use bessel::{riccati_chi, riccati_psi};
pub use dipole::HertzianDipole;
pub use icosphere::icosphere_mesh;
pub use mie::{mie_dielectric_bistatic_rcs, mie_pec_bistatic_rcs, CutPlane};
