//! Integral-operator kernels: triangle quadrature, the free-space scalar
//! Green's function, analytic near-singular triangle integrals, and Galerkin
//! assembly of the mixed-potential (L) and magnetic-field (K) operators over
//! RWG basis sets.

mod analytic;
mod operators;
mod quadrature;

pub use analytic::{int_grad_inv_r, int_inv_r};
pub use operators::{
    assemble_k, assemble_k_sided, assemble_l, rotated_gram, rotated_gram_coincident,
    AssemblyOptions,
};
pub use quadrature::QuadratureRule;

use crate::{C0, EPS0};

/// Homogeneous, lossless, non-magnetic medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    /// Relative permittivity (>= 1 for ordinary dielectrics).
    pub eps_r: f64,
}

impl Medium {
    pub const FREE_SPACE: Medium = Medium { eps_r: 1.0 };

    /// Wavenumber at the given frequency, rad/m.
    pub fn wavenumber(&self, freq_hz: f64) -> f64 {
        2.0 * std::f64::consts::PI * freq_hz / C0 * self.eps_r.sqrt()
    }

    /// Absolute permittivity, F/m.
    pub fn permittivity(&self) -> f64 {
        EPS0 * self.eps_r
    }
}
