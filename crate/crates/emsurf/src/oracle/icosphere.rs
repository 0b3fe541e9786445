//! Icosphere generator: subdivided icosahedron projected onto a sphere,
//! tagged as a closed PEC surface enclosing interior region 0 with outward
//! winding normals.

use std::collections::HashMap;

use crate::mesh::{RegionRef, SurfaceTag, TriMesh, Triangle, Vec3};

/// Closed triangulated sphere of the given radius centered at the origin.
///
/// `subdivisions` = 0 yields the raw icosahedron (20 faces); each level
/// quadruples the face count. All triangles are tagged PEC with the winding
/// normal pointing into the exterior region.
pub fn icosphere_mesh(radius: f64, subdivisions: u32) -> TriMesh {
    assert!(radius > 0.0);
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        Vec3::new(-1.0, phi, 0.0),
        Vec3::new(1.0, phi, 0.0),
        Vec3::new(-1.0, -phi, 0.0),
        Vec3::new(1.0, -phi, 0.0),
        Vec3::new(0.0, -1.0, phi),
        Vec3::new(0.0, 1.0, phi),
        Vec3::new(0.0, -1.0, -phi),
        Vec3::new(0.0, 1.0, -phi),
        Vec3::new(phi, 0.0, -1.0),
        Vec3::new(phi, 0.0, 1.0),
        Vec3::new(-phi, 0.0, -1.0),
        Vec3::new(-phi, 0.0, 1.0),
    ];
    // Outward-wound icosahedron faces.
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    vertices.push(0.5 * (vertices[a] + vertices[b]));
                    vertices.len() - 1
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }

    for v in &mut vertices {
        *v = radius * v.normalize();
    }
    let triangles = faces
        .into_iter()
        .map(|v| Triangle {
            v,
            tag: SurfaceTag::Pec,
            front: RegionRef::Exterior,
            back: RegionRef::Interior(0),
        })
        .collect();
    TriMesh::new(vertices, triangles).expect("icosphere construction is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn counts_follow_subdivision() {
        for s in 0..3 {
            let m = icosphere_mesh(2.0, s);
            let f = m.triangles().len();
            assert_eq!(f, 20usize * 4usize.pow(s));
            // Euler: V - E + F = 2 with E = 3F/2 for a closed surface.
            let e = 3 * f / 2;
            assert_eq!(m.vertices().len() as i64 - e as i64 + f as i64, 2);
        }
    }

    #[test]
    fn vertices_lie_on_sphere_and_normals_point_outward() {
        let m = icosphere_mesh(0.75, 2);
        for v in m.vertices() {
            assert_relative_eq!(v.norm(), 0.75, max_relative = 1e-12);
        }
        for t in 0..m.triangles().len() {
            assert!(m.tri_normal(t).dot(&m.tri_centroid(t)) > 0.0);
        }
    }

    #[test]
    fn total_area_approaches_sphere_area() {
        let r = 1.3;
        let m = icosphere_mesh(r, 3);
        let area: f64 = (0..m.triangles().len()).map(|t| m.tri_area(t)).sum();
        let exact = 4.0 * std::f64::consts::PI * r * r;
        assert_relative_eq!(area, exact, max_relative = 0.01);
    }
}
