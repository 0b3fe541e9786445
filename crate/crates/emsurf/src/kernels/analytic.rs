//! Closed-form integrals of 1/R and its first moment over a flat triangle,
//! used to extract the Green's-function singularity for self and near
//! interactions.
//!
//! For an observation point r with in-plane projection rho, the edge-wise
//! formulas give
//!   I1   = int_T 1/|r - r'| dA'
//!   Irho = int_T (r' - rho)/|r - r'| dA'
//! exactly, for any observation point including points on the triangle.

use crate::mesh::Vec3;

/// All singular moments at once: (I1, Irho, rho).
pub fn inv_r_moments(v: &[Vec3; 3], r: Vec3) -> (f64, Vec3, Vec3) {
    let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let nhat = n / n.norm();
    let d = (r - v[0]).dot(&nhat);
    let rho = r - d * nhat;
    let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm()).max((v[2] - v[1]).norm());
    let tiny = 1e-12 * scale;

    let mut i1 = 0.0f64;
    let mut irho = Vec3::zeros();
    for e in 0..3 {
        let a = v[e];
        let b = v[(e + 1) % 3];
        let s_hat = (b - a) / (b - a).norm();
        let m_hat = s_hat.cross(&nhat); // outward in-plane edge normal
        let t0 = (a - rho).dot(&m_hat);
        let s_m = (a - rho).dot(&s_hat);
        let s_p = (b - rho).dot(&s_hat);
        let r0sq = t0 * t0 + d * d;
        let r_m = (r0sq + s_m * s_m).sqrt();
        let r_p = (r0sq + s_p * s_p).sqrt();

        if r0sq <= tiny * tiny {
            // Edge line passes through the observation point's projection:
            // the logarithmic terms vanish in the limit.
            irho += 0.5 * (s_p * r_p - s_m * r_m) * m_hat;
            continue;
        }
        // Numerically stable logarithm of (R+ + s+)/(R- + s-).
        let f = if s_m >= 0.0 {
            ((r_p + s_p) / (r_m + s_m)).ln()
        } else if s_p <= 0.0 {
            ((r_m - s_m) / (r_p - s_p)).ln()
        } else {
            ((r_p + s_p) * (r_m - s_m) / r0sq).ln()
        };
        let beta = (t0 * s_p).atan2(r0sq + d.abs() * r_p)
            - (t0 * s_m).atan2(r0sq + d.abs() * r_m);
        i1 += t0 * f - d.abs() * beta;
        irho += 0.5 * (r0sq * f + s_p * r_p - s_m * r_m) * m_hat;
    }
    (i1, irho, rho)
}

/// int_T 1/|r - r'| dA'.
pub fn int_inv_r(v: &[Vec3; 3], r: Vec3) -> f64 {
    inv_r_moments(v, r).0
}

/// int_T (r' - rho)/|r - r'| dA' where rho is the in-plane projection of r.
pub fn int_grad_inv_r(v: &[Vec3; 3], r: Vec3) -> Vec3 {
    inv_r_moments(v, r).1
}

/// int_T (r - r')/|r - r'|^3 dA' = -grad_r int_T 1/R dA', in closed form:
/// the in-plane part is the edge-log sum and the normal part the signed
/// subtended angle. Diverges logarithmically as r approaches the triangle
/// boundary in-plane; callers must keep r off the edges.
pub fn int_grad_r_inv_r(v: &[Vec3; 3], r: Vec3) -> Vec3 {
    let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let nhat = n / n.norm();
    let d = (r - v[0]).dot(&nhat);
    let rho = r - d * nhat;
    let scale = (v[1] - v[0]).norm().max((v[2] - v[0]).norm()).max((v[2] - v[1]).norm());
    let tiny = 1e-12 * scale;

    let mut w = Vec3::zeros();
    let mut beta = 0.0f64;
    for e in 0..3 {
        let a = v[e];
        let b = v[(e + 1) % 3];
        let s_hat = (b - a) / (b - a).norm();
        let m_hat = s_hat.cross(&nhat);
        let t0 = (a - rho).dot(&m_hat);
        let s_m = (a - rho).dot(&s_hat);
        let s_p = (b - rho).dot(&s_hat);
        let r0sq = t0 * t0 + d * d;
        let r_m = (r0sq + s_m * s_m).sqrt();
        let r_p = (r0sq + s_p * s_p).sqrt();
        if r0sq <= tiny * tiny {
            continue;
        }
        let f = if s_m >= 0.0 {
            ((r_p + s_p) / (r_m + s_m)).ln()
        } else if s_p <= 0.0 {
            ((r_m - s_m) / (r_p - s_p)).ln()
        } else {
            ((r_p + s_p) * (r_m - s_m) / r0sq).ln()
        };
        beta += (t0 * s_p).atan2(r0sq + d.abs() * r_p)
            - (t0 * s_m).atan2(r0sq + d.abs() * r_m);
        w += f * m_hat;
    }
    let sgn = if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    };
    w + sgn * beta * nhat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::QuadratureRule;
    use approx::assert_relative_eq;

    /// Brute-force reference by uniform triangle subdivision.
    fn numeric_moments(v: &[Vec3; 3], r: Vec3, levels: u32) -> (f64, Vec3) {
        let rule = QuadratureRule::new(25).unwrap();
        let n = 1usize << levels; // n^2 sub-triangles per edge split count n
        let mut i1 = 0.0;
        let mut irho = Vec3::zeros();
        let nvec = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let nhat = nvec / nvec.norm();
        let rho = r - (r - v[0]).dot(&nhat) * nhat;
        // Regular refinement in barycentric space.
        for i in 0..n {
            for j in 0..(n - i) {
                // Two sub-triangles per lattice cell (one if on the diagonal).
                let p = |a: usize, b: usize| {
                    let l1 = a as f64 / n as f64;
                    let l2 = b as f64 / n as f64;
                    v[0] + l1 * (v[1] - v[0]) + l2 * (v[2] - v[0])
                };
                let cells: Vec<[Vec3; 3]> = if j < n - i - 1 {
                    vec![
                        [p(i, j), p(i + 1, j), p(i, j + 1)],
                        [p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)],
                    ]
                } else {
                    vec![[p(i, j), p(i + 1, j), p(i, j + 1)]]
                };
                for c in cells {
                    let area = 0.5 * (c[1] - c[0]).cross(&(c[2] - c[0])).norm();
                    for (q, w) in rule.points_on(&c, area) {
                        let dist = (r - q).norm();
                        i1 += w / dist;
                        irho += w / dist * (q - rho);
                    }
                }
            }
        }
        (i1, irho)
    }

    fn test_triangle() -> [Vec3; 3] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.013, 0.001, 0.0),
            Vec3::new(0.004, 0.011, 0.0),
        ]
    }

    #[test]
    fn far_point_matches_numeric() {
        let v = test_triangle();
        let r = Vec3::new(0.02, -0.015, 0.01);
        let (i1a, irhoa, _) = inv_r_moments(&v, r);
        let (i1n, irhon) = numeric_moments(&v, r, 3);
        assert_relative_eq!(i1a, i1n, max_relative = 1e-10);
        assert_relative_eq!((irhoa - irhon).norm(), 0.0, epsilon = 1e-12 * irhoa.norm().max(1e-6));
    }

    #[test]
    fn near_offplane_point_matches_numeric() {
        let v = test_triangle();
        let r = Vec3::new(0.005, 0.004, 0.0008);
        let (i1a, irhoa, _) = inv_r_moments(&v, r);
        let (i1n, irhon) = numeric_moments(&v, r, 6);
        assert_relative_eq!(i1a, i1n, max_relative = 2e-6);
        assert_relative_eq!(irhoa.x, irhon.x, max_relative = 2e-5, epsilon = 1e-10);
        assert_relative_eq!(irhoa.y, irhon.y, max_relative = 2e-5, epsilon = 1e-10);
    }

    #[test]
    fn inplane_outside_point_matches_numeric() {
        let v = test_triangle();
        let r = Vec3::new(0.03, 0.02, 0.0);
        let (i1a, irhoa, _) = inv_r_moments(&v, r);
        let (i1n, irhon) = numeric_moments(&v, r, 4);
        assert_relative_eq!(i1a, i1n, max_relative = 1e-9);
        assert_relative_eq!((irhoa - irhon).norm(), 0.0, epsilon = 1e-10 * irhoa.norm());
    }

    #[test]
    fn on_triangle_point_is_continuous_limit() {
        // For a projection inside the triangle, I1(d) = I1(0) - 2 pi |d| + O(d^2);
        // the formula must follow that law down to tiny offsets.
        let v = test_triangle();
        let centroid = (v[0] + v[1] + v[2]) / 3.0;
        let on = int_inv_r(&v, centroid);
        assert!(on > 0.0);
        let two_pi = 2.0 * std::f64::consts::PI;
        for &d in &[1e-4, 1e-6, 1e-8] {
            let off = int_inv_r(&v, centroid + Vec3::new(0.0, 0.0, d));
            let slope_err = (on - off - two_pi * d).abs();
            assert!(
                slope_err < 1e-9 + 1e3 * d * d,
                "offset {d}: linear-law residual {slope_err}"
            );
        }
    }

    #[test]
    fn on_edge_and_vertex_points_are_finite() {
        let v = test_triangle();
        let mid01 = 0.5 * (v[0] + v[1]);
        let i_edge = int_inv_r(&v, mid01);
        assert!(i_edge.is_finite() && i_edge > 0.0);
        let i_vert = int_inv_r(&v, v[2]);
        assert!(i_vert.is_finite() && i_vert > 0.0);
        // Spot check the edge-midpoint value against refined numeric quadrature
        // (slowly convergent; loose tolerance).
        let (i1n, _) = numeric_moments(&v, mid01 + Vec3::new(0.0, 0.0, 1e-7), 7);
        assert_relative_eq!(i_edge, i1n, max_relative = 2e-3);
    }

    /// Brute-force reference for int (r - r')/R^3 dA'.
    fn numeric_grad_r(v: &[Vec3; 3], r: Vec3, levels: u32) -> Vec3 {
        let rule = QuadratureRule::new(25).unwrap();
        let n = 1usize << levels;
        let mut acc = Vec3::zeros();
        for i in 0..n {
            for j in 0..(n - i) {
                let p = |a: usize, b: usize| {
                    let l1 = a as f64 / n as f64;
                    let l2 = b as f64 / n as f64;
                    v[0] + l1 * (v[1] - v[0]) + l2 * (v[2] - v[0])
                };
                let cells: Vec<[Vec3; 3]> = if j < n - i - 1 {
                    vec![
                        [p(i, j), p(i + 1, j), p(i, j + 1)],
                        [p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)],
                    ]
                } else {
                    vec![[p(i, j), p(i + 1, j), p(i, j + 1)]]
                };
                for c in cells {
                    let area = 0.5 * (c[1] - c[0]).cross(&(c[2] - c[0])).norm();
                    for (q, w) in rule.points_on(&c, area) {
                        let rv = r - q;
                        acc += w / rv.norm().powi(3) * rv;
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn grad_r_matches_numeric_far_and_near() {
        let v = test_triangle();
        for (r, levels, tol) in [
            (Vec3::new(0.02, -0.015, 0.01), 3, 1e-9),
            (Vec3::new(0.005, 0.004, 0.002), 6, 1e-5),
            (Vec3::new(0.005, 0.004, -0.002), 6, 1e-5),
        ] {
            let wa = int_grad_r_inv_r(&v, r);
            let wn = numeric_grad_r(&v, r, levels);
            assert_relative_eq!((wa - wn).norm(), 0.0, epsilon = tol * wa.norm());
        }
    }

    #[test]
    fn grad_r_is_gradient_of_i1() {
        // Central finite differences of -I1 must reproduce the closed form.
        let v = test_triangle();
        let r = Vec3::new(0.006, 0.003, 0.004);
        let wa = int_grad_r_inv_r(&v, r);
        let h = 1e-7;
        for c in 0..3 {
            let mut dr = Vec3::zeros();
            dr[c] = h;
            let fd = -(int_inv_r(&v, r + dr) - int_inv_r(&v, r - dr)) / (2.0 * h);
            assert_relative_eq!(wa[c], fd, max_relative = 1e-5, epsilon = 1e-8 * wa.norm());
        }
    }

    #[test]
    fn grad_r_normal_part_tends_to_half_solid_angle() {
        // Directly above an interior point, the normal component approaches
        // 2 pi (half the full solid angle) as the offset shrinks.
        let v = test_triangle();
        let centroid = (v[0] + v[1] + v[2]) / 3.0;
        let w = int_grad_r_inv_r(&v, centroid + Vec3::new(0.0, 0.0, 1e-7));
        assert_relative_eq!(w.z, 2.0 * std::f64::consts::PI, max_relative = 1e-3);
    }

    #[test]
    fn scales_linearly_with_geometry() {
        let v = test_triangle();
        let s = 7.3;
        let vs = [v[0] * s, v[1] * s, v[2] * s];
        let r = Vec3::new(0.006, 0.002, 0.003);
        let (i1, irho, _) = inv_r_moments(&v, r);
        let (i1s, irhos, _) = inv_r_moments(&vs, r * s);
        // I1 has dimension length; Irho has dimension length^2.
        assert_relative_eq!(i1s, s * i1, max_relative = 1e-12);
        assert_relative_eq!((irhos - s * s * irho).norm(), 0.0, epsilon = 1e-12 * irhos.norm());
    }
}
