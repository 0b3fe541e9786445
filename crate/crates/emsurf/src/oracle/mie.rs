//! Mie-series bistatic radar cross sections for PEC and homogeneous
//! dielectric spheres, under the e^{+j omega t} time convention (outgoing
//! waves use the spherical Hankel function of the second kind).
//!
//! The incident field is an x-polarized plane wave travelling along +z;
//! theta = 0 is the forward direction, theta = pi backscatter.

use num_complex::Complex64;

use super::bessel::{riccati_chi, riccati_psi};

/// Observation cut relative to the incident linear polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutPlane {
    /// Scattering plane contains the incident E vector (xz plane).
    EPlane,
    /// Scattering plane is orthogonal to the incident E vector (yz plane).
    HPlane,
}

fn series_order(x: f64) -> usize {
    (x + 4.05 * x.cbrt() + 2.0).ceil() as usize
}

/// Riccati–Hankel of the second kind, zeta_n = psi_n + j chi_n, with derivative.
fn riccati_zeta(nmax: usize, x: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let (psi, dpsi) = riccati_psi(nmax, x);
    let (chi, dchi) = riccati_chi(nmax, x);
    let z = psi.iter().zip(&chi).map(|(&p, &c)| Complex64::new(p, c)).collect();
    let dz = dpsi.iter().zip(&dchi).map(|(&p, &c)| Complex64::new(p, c)).collect();
    (z, dz)
}

/// Sums the scattering amplitudes S1(theta), S2(theta) given per-order
/// coefficients a_n, b_n (n = 1..).
fn scattering_amplitudes(
    a: &[Complex64],
    b: &[Complex64],
    theta: f64,
) -> (Complex64, Complex64) {
    let mu = theta.cos();
    let mut s1 = Complex64::ZERO;
    let mut s2 = Complex64::ZERO;
    // pi_n, tau_n recurrences; pi_0 = 0, pi_1 = 1.
    let mut pi_prev = 0.0f64;
    let mut pi_cur = 1.0f64;
    for n in 1..=a.len() {
        let nf = n as f64;
        let tau = nf * mu * pi_cur - (nf + 1.0) * pi_prev;
        let w = (2.0 * nf + 1.0) / (nf * (nf + 1.0));
        s1 += w * (a[n - 1] * pi_cur + b[n - 1] * tau);
        s2 += w * (a[n - 1] * tau + b[n - 1] * pi_cur);
        let pi_next = ((2.0 * nf + 1.0) / nf) * mu * pi_cur - ((nf + 1.0) / nf) * pi_prev;
        pi_prev = pi_cur;
        pi_cur = pi_next;
    }
    (s1, s2)
}

fn bistatic_rcs_from_coeffs(
    k: f64,
    a: &[Complex64],
    b: &[Complex64],
    theta: f64,
    plane: CutPlane,
) -> f64 {
    let (s1, s2) = scattering_amplitudes(a, b, theta);
    let s = match plane {
        CutPlane::EPlane => s2,
        CutPlane::HPlane => s1,
    };
    4.0 * std::f64::consts::PI / (k * k) * s.norm_sqr()
}

/// Bistatic RCS (m^2) of a PEC sphere of the given radius at free-space
/// wavenumber `k`.
pub fn mie_pec_bistatic_rcs(k: f64, radius: f64, theta: f64, plane: CutPlane) -> f64 {
    let x = k * radius;
    let nmax = series_order(x);
    let (psi, dpsi) = riccati_psi(nmax, x);
    let (zeta, dzeta) = riccati_zeta(nmax, x);
    let mut a = Vec::with_capacity(nmax);
    let mut b = Vec::with_capacity(nmax);
    for n in 1..=nmax {
        // Electric (TM) coefficient uses the derivative ratio; magnetic (TE)
        // the function ratio. (The m -> infinity limit of the dielectric
        // coefficients below confirms the assignment.)
        a.push(Complex64::from(dpsi[n]) / dzeta[n]);
        b.push(Complex64::from(psi[n]) / zeta[n]);
    }
    bistatic_rcs_from_coeffs(k, &a, &b, theta, plane)
}

/// Bistatic RCS (m^2) of a lossless homogeneous dielectric sphere with
/// relative permittivity `eps_r` at free-space wavenumber `k0`.
pub fn mie_dielectric_bistatic_rcs(
    k0: f64,
    radius: f64,
    eps_r: f64,
    theta: f64,
    plane: CutPlane,
) -> f64 {
    assert!(eps_r > 0.0, "relative permittivity must be positive");
    let m = eps_r.sqrt();
    let x = k0 * radius;
    let mx = m * x;
    let nmax = series_order(x.max(mx));
    let (psi_x, dpsi_x) = riccati_psi(nmax, x);
    let (psi_m, dpsi_m) = riccati_psi(nmax, mx);
    let (zeta, dzeta) = riccati_zeta(nmax, x);
    let mut a = Vec::with_capacity(nmax);
    let mut b = Vec::with_capacity(nmax);
    for n in 1..=nmax {
        let an = (m * psi_m[n] * dpsi_x[n] - psi_x[n] * dpsi_m[n])
            / (Complex64::from(m * psi_m[n]) * dzeta[n] - zeta[n] * dpsi_m[n]);
        let bn = (psi_m[n] * dpsi_x[n] - m * psi_x[n] * dpsi_m[n])
            / (Complex64::from(psi_m[n]) * dzeta[n] - m * zeta[n] * dpsi_m[n]);
        a.push(an);
        b.push(bn);
    }
    bistatic_rcs_from_coeffs(k0, &a, &b, theta, plane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn pec_rayleigh_backscatter_limit() {
        // For ka << 1: sigma_back / (pi a^2) -> 9 (ka)^4.
        let a = 1.0;
        let ka = 0.05;
        let sigma = mie_pec_bistatic_rcs(ka / a, a, PI, CutPlane::EPlane);
        let limit = 9.0 * ka.powi(4) * PI * a * a;
        assert_relative_eq!(sigma, limit, max_relative = 0.02);
    }

    #[test]
    fn pec_geometric_optics_backscatter_limit() {
        // For ka >> 1 the backscatter RCS oscillates toward pi a^2.
        let a = 1.0;
        let ka = 60.0;
        let sigma = mie_pec_bistatic_rcs(ka / a, a, PI, CutPlane::EPlane);
        assert_relative_eq!(sigma, PI * a * a, max_relative = 0.15);
    }

    #[test]
    fn rayleigh_eplane_null_at_sixty_degrees() {
        // Small PEC sphere: E-plane pattern ~ |cos(theta) - 1/2|^2 with a
        // deep null at 60 degrees; the H-plane has no null there. This pins
        // the S1/S2-to-plane mapping.
        let k = 0.05;
        let null = mie_pec_bistatic_rcs(k, 1.0, 60f64.to_radians(), CutPlane::EPlane);
        let e90 = mie_pec_bistatic_rcs(k, 1.0, 90f64.to_radians(), CutPlane::EPlane);
        let h60 = mie_pec_bistatic_rcs(k, 1.0, 60f64.to_radians(), CutPlane::HPlane);
        assert!(null < 1e-4 * e90, "E-plane 60 deg: {null:e} vs 90 deg {e90:e}");
        assert!(h60 > 1e3 * null, "H-plane 60 deg should not be a null");
    }

    #[test]
    fn backscatter_planes_agree() {
        // At theta = pi the two cuts must give identical RCS by symmetry
        // (|S1(pi)| = |S2(pi)|).
        let s_e = mie_pec_bistatic_rcs(2.0, 1.0, PI, CutPlane::EPlane);
        let s_h = mie_pec_bistatic_rcs(2.0, 1.0, PI, CutPlane::HPlane);
        assert_relative_eq!(s_e, s_h, max_relative = 1e-10);
        let d_e = mie_dielectric_bistatic_rcs(2.0, 1.0, 2.5, PI, CutPlane::EPlane);
        let d_h = mie_dielectric_bistatic_rcs(2.0, 1.0, 2.5, PI, CutPlane::HPlane);
        assert_relative_eq!(d_e, d_h, max_relative = 1e-10);
    }

    #[test]
    fn dielectric_vanishes_as_contrast_vanishes() {
        let s = mie_dielectric_bistatic_rcs(2.0, 1.0, 1.0 + 1e-9, PI, CutPlane::EPlane);
        assert!(s < 1e-12, "sigma = {s}");
    }

    #[test]
    fn lossless_dielectric_energy_condition() {
        // Lossless spheres satisfy Re(c_n) = |c_n|^2 for every Mie coefficient.
        let m = 3.66f64.sqrt();
        let x = 1.7;
        let mx = m * x;
        let nmax = super::series_order(mx);
        let (psi_x, dpsi_x) = riccati_psi(nmax, x);
        let (psi_m, dpsi_m) = riccati_psi(nmax, mx);
        let (zeta, dzeta) = riccati_zeta(nmax, x);
        for n in 1..=nmax {
            let an = (m * psi_m[n] * dpsi_x[n] - psi_x[n] * dpsi_m[n])
                / (Complex64::from(m * psi_m[n]) * dzeta[n] - zeta[n] * dpsi_m[n]);
            assert_relative_eq!(an.re, an.norm_sqr(), epsilon = 1e-10);
        }
    }

    #[test]
    fn pec_forward_scatter_dominates_at_large_size() {
        let k = 30.0;
        let fwd = mie_pec_bistatic_rcs(k, 1.0, 0.0, CutPlane::EPlane);
        let back = mie_pec_bistatic_rcs(k, 1.0, PI, CutPlane::EPlane);
        assert!(fwd > 50.0 * back);
    }
}
