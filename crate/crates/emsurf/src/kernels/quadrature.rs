//! Symmetric Gaussian quadrature rules on the reference triangle.
//!
//! Weights are normalized to sum to one; multiply by the triangle area when
//! integrating. Available point counts: 1, 3, 6, 7, 12, 25 with polynomial
//! exactness degrees 1, 2, 4, 5, 6, 8.

use crate::error::{Error, Result};
use crate::mesh::Vec3;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// (barycentric coordinates, weight); weights sum to 1.
    points: Vec<([f64; 3], f64)>,
    degree: usize,
}

fn push_perm3(out: &mut Vec<([f64; 3], f64)>, a: f64, b: f64, w: f64) {
    // All distinct permutations of (a, b, b).
    out.push(([a, b, b], w));
    out.push(([b, a, b], w));
    out.push(([b, b, a], w));
}

fn push_perm6(out: &mut Vec<([f64; 3], f64)>, a: f64, b: f64, c: f64, w: f64) {
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        out.push((p, w));
    }
}

impl QuadratureRule {
    /// Rule with the given number of points (1, 3, 6, 7, 12, or 25).
    pub fn new(n_points: usize) -> Result<Self> {
        let third = 1.0 / 3.0;
        let mut pts = Vec::with_capacity(n_points);
        let degree = match n_points {
            1 => {
                pts.push(([third, third, third], 1.0));
                1
            }
            3 => {
                push_perm3(&mut pts, 2.0 / 3.0, 1.0 / 6.0, third);
                2
            }
            6 => {
                push_perm3(&mut pts, 0.108103018168070, 0.445948490915965, 0.223381589678011);
                push_perm3(&mut pts, 0.816847572980459, 0.091576213509771, 0.109951743655322);
                4
            }
            7 => {
                pts.push(([third, third, third], 0.225));
                push_perm3(&mut pts, 0.059715871789770, 0.470142064105115, 0.132394152788506);
                push_perm3(&mut pts, 0.797426985353087, 0.101286507323456, 0.125939180544827);
                5
            }
            12 => {
                push_perm3(&mut pts, 0.501426509658179, 0.249286745170910, 0.116786275726379);
                push_perm3(&mut pts, 0.873821971016996, 0.063089014491502, 0.050844906370207);
                push_perm6(
                    &mut pts,
                    0.053145049844816,
                    0.310352451033785,
                    0.636502499121399,
                    0.082851075618374,
                );
                6
            }
            25 => {
                // Collapsed 5x5 Gauss-Legendre product rule: exact to degree 8
                // on the triangle by construction.
                const X5: [f64; 5] = [
                    -0.906179845938664,
                    -0.5384693101056831,
                    0.0,
                    0.5384693101056831,
                    0.906179845938664,
                ];
                const W5: [f64; 5] = [
                    0.23692688505618908,
                    0.47862867049936647,
                    0.5688888888888889,
                    0.47862867049936647,
                    0.23692688505618908,
                ];
                for i in 0..5 {
                    let u = 0.5 * (X5[i] + 1.0);
                    let wu = 0.5 * W5[i];
                    for jx in 0..5 {
                        let v = 0.5 * (X5[jx] + 1.0);
                        let wv = 0.5 * W5[jx];
                        let l1 = u;
                        let l2 = v * (1.0 - u);
                        pts.push(([l1, l2, 1.0 - l1 - l2], 2.0 * wu * wv * (1.0 - u)));
                    }
                }
                8
            }
            n => {
                return Err(Error::Config(format!(
                    "no {n}-point triangle rule; choose 1, 3, 6, 7, 12, or 25"
                )))
            }
        };
        Ok(QuadratureRule { points: pts, degree })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn barycentric(&self) -> &[([f64; 3], f64)] {
        &self.points
    }

    /// Physical quadrature points and weights on a triangle; weights include
    /// the triangle area (they sum to the area).
    pub fn points_on(&self, v: &[Vec3; 3], area: f64) -> Vec<(Vec3, f64)> {
        self.points
            .iter()
            .map(|&(b, w)| (b[0] * v[0] + b[1] * v[1] + b[2] * v[2], w * area))
            .collect()
    }
}
