//! Surface-integral-equation solver for planar arrays of dissimilar
//! electromagnetic scatterer cells.
//!
//! Each unit cell is enclosed by a fictitious box surface. The cell interior
//! is discretized with a PMCHWT surface formulation, reduced to a macromodel
//! operator on the box via a Schur complement, and the array of macromodels is
//! coupled through free-space integral operators whose block-Toeplitz
//! structure is exploited for FFT-accelerated matrix-vector products.
//!
//! The crate is organized as a library with runnable examples (see
//! `examples/`) plus a thin `emsurf` binary for config-driven runs.

pub mod array;
pub mod config;
pub mod fftaccel;
pub mod kernels;
pub mod macromodel;
pub mod mesh;
pub mod oracle;
pub mod post;
pub mod runner;
pub mod solver;

mod error;

pub use error::{Error, Result};

/// Double-precision complex scalar used throughout.
pub type Cplx = num_complex::Complex<f64>;
/// Complex 3-vector (field values, current moments).
pub type CVec3 = nalgebra::Vector3<Cplx>;

/// Free-space impedance, ohms (exact by definition of mu0/eps0).
pub const ETA0: f64 = 376.730313668;
/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_061_271_2e-6;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_818_8e-12;
