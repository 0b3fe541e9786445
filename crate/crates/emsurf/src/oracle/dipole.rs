//! Exact free-space fields of a Hertzian (infinitesimal electric) dipole
//! under the e^{+j omega t} convention, valid from the reactive near zone to
//! the far zone.

use num_complex::Complex64;

use crate::mesh::Vec3;
use crate::{CVec3, C0, EPS0};

/// Infinitesimal electric current element with moment I*l (ampere-meters).
#[derive(Debug, Clone)]
pub struct HertzianDipole {
    pub position: Vec3,
    /// Current moment vector I*l, A·m.
    pub moment: CVec3,
}

impl HertzianDipole {
    /// Electric and magnetic fields at `r` for free-space wavenumber `k`.
    pub fn fields(&self, k: f64, r: Vec3) -> (CVec3, CVec3) {
        let d = r - self.position;
        let dist = d.norm();
        assert!(dist > 0.0, "field point coincides with the dipole");
        let n = d / dist;
        let nc: CVec3 = n.map(Complex64::from);
        let j = Complex64::I;
        let omega = k * C0;
        let phase = (-j * k * dist).exp();

        // Electric dipole moment p = I l / (j omega).
        let p: CVec3 = self.moment / (j * omega);
        let n_dot_p: Complex64 = nc.x * p.x + nc.y * p.y + nc.z * p.z;
        let transverse = nc * n_dot_p - p; // -(n x p) x n = n (n.p) - p
        let radiative = -transverse * Complex64::from(k * k / dist);
        let quasistatic = (nc * (3.0 * n_dot_p) - p)
            * (Complex64::from(1.0 / dist.powi(3)) + j * k / (dist * dist));
        let e = (radiative + quasistatic) * (phase / (4.0 * std::f64::consts::PI * EPS0));

        let n_cross_il = CVec3::new(
            nc.y * self.moment.z - nc.z * self.moment.y,
            nc.z * self.moment.x - nc.x * self.moment.z,
            nc.x * self.moment.y - nc.y * self.moment.x,
        );
        let h = n_cross_il
            * (-j * k / (4.0 * std::f64::consts::PI * dist)
                * (Complex64::ONE + Complex64::ONE / (j * k * dist))
                * phase);
        (e, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::{ETA0, MU0};
    use std::f64::consts::PI;

    fn z_dipole(il: f64) -> HertzianDipole {
        HertzianDipole {
            position: Vec3::zeros(),
            moment: CVec3::new(Complex64::ZERO, Complex64::ZERO, Complex64::from(il)),
        }
    }

    #[test]
    fn matches_textbook_spherical_components() {
        // E_theta = j eta k Il sin(theta) / (4 pi r) [1 + 1/(jkr) - 1/(kr)^2] e^{-jkr}
        // E_r     = eta Il cos(theta) / (2 pi r^2) [1 + 1/(jkr)] e^{-jkr}
        // H_phi   = j k Il sin(theta) / (4 pi r) [1 + 1/(jkr)] e^{-jkr}
        let k = 7.0;
        let il = 1.3;
        let dip = z_dipole(il);
        for &(theta, r) in &[(0.7f64, 0.2f64), (1.9, 1.4), (2.5, 10.0)] {
            let pt = Vec3::new(r * theta.sin(), 0.0, r * theta.cos());
            let (e, h) = dip.fields(k, pt);
            let j = Complex64::I;
            let kr = k * r;
            let ph = (-j * kr).exp();
            let e_theta_ref = j * ETA0 * k * il * theta.sin() / (4.0 * PI * r)
                * (1.0 + 1.0 / (j * kr) - 1.0 / (kr * kr))
                * ph;
            let e_r_ref =
                ETA0 * il * theta.cos() / (2.0 * PI * r * r) * (1.0 + 1.0 / (j * kr)) * ph;
            let h_phi_ref =
                j * k * il * theta.sin() / (4.0 * PI * r) * (1.0 + 1.0 / (j * kr)) * ph;
            let rhat = Vec3::new(theta.sin(), 0.0, theta.cos());
            let that = Vec3::new(theta.cos(), 0.0, -theta.sin());
            let e_r = e.x * rhat.x + e.z * rhat.z;
            let e_theta = e.x * that.x + e.z * that.z;
            assert_relative_eq!(e_r.re, e_r_ref.re, max_relative = 1e-9, epsilon = 1e-9);
            assert_relative_eq!(e_r.im, e_r_ref.im, max_relative = 1e-9, epsilon = 1e-9);
            assert_relative_eq!(e_theta.re, e_theta_ref.re, max_relative = 1e-9, epsilon = 1e-9);
            assert_relative_eq!(e_theta.im, e_theta_ref.im, max_relative = 1e-9, epsilon = 1e-9);
            assert_relative_eq!(h.y.re, h_phi_ref.re, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(h.y.im, h_phi_ref.im, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn satisfies_maxwell_curl_equations() {
        // curl E = -j omega mu0 H, curl H = j omega eps0 E away from the source.
        let k = 5.0;
        let dip = HertzianDipole {
            position: Vec3::new(0.02, -0.01, 0.015),
            moment: CVec3::new(
                Complex64::new(0.4, 0.1),
                Complex64::new(-0.2, 0.7),
                Complex64::new(1.0, 0.0),
            ),
        };
        let r0 = Vec3::new(0.31, 0.22, -0.17);
        let h_step = 1e-6;
        let omega = k * C0;
        let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
        // curl F = sum_i e_i x dF/dx_i, evaluated by central differences.
        let mut ce = CVec3::zeros();
        let mut ch = CVec3::zeros();
        for i in 0..3 {
            let (ep, hp) = dip.fields(k, r0 + h_step * axes[i]);
            let (em, hm) = dip.fields(k, r0 - h_step * axes[i]);
            let de = (ep - em) / Complex64::from(2.0 * h_step);
            let dh = (hp - hm) / Complex64::from(2.0 * h_step);
            let ei: CVec3 = axes[i].map(Complex64::from);
            ce += CVec3::new(
                ei.y * de.z - ei.z * de.y,
                ei.z * de.x - ei.x * de.z,
                ei.x * de.y - ei.y * de.x,
            );
            ch += CVec3::new(
                ei.y * dh.z - ei.z * dh.y,
                ei.z * dh.x - ei.x * dh.z,
                ei.x * dh.y - ei.y * dh.x,
            );
        }
        let (e0, h0) = dip.fields(k, r0);
        let rhs_e = h0 * (-Complex64::I * omega * MU0);
        let rhs_h = e0 * (Complex64::I * omega * EPS0);
        for i in 0..3 {
            assert_relative_eq!(ce[i].re, rhs_e[i].re, max_relative = 1e-4, epsilon = 1e-6);
            assert_relative_eq!(ce[i].im, rhs_e[i].im, max_relative = 1e-4, epsilon = 1e-6);
            assert_relative_eq!(ch[i].re, rhs_h[i].re, max_relative = 1e-4, epsilon = 1e-6);
            assert_relative_eq!(ch[i].im, rhs_h[i].im, max_relative = 1e-4, epsilon = 1e-6);
        }
    }
}
