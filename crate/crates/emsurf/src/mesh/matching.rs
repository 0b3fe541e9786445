use std::collections::HashMap;

use super::rwg::RwgBasisSet;
use super::trimesh::TriMesh;
use super::Vec3;
use crate::error::{Error, Result};

/// One matched basis pair: indices into the two sets plus a relative sign.
///
/// Sign +1 means the translated function of set A coincides with the set B
/// function including its plus/minus triangle assignment; -1 means the
/// assignments are swapped, i.e. the functions are opposite.
#[derive(Debug, Clone, Copy)]
pub struct BasisMatch {
    pub index_a: usize,
    pub index_b: usize,
    pub sign: i32,
}

/// Match every basis of `set_a` (translated by `translation`) against a basis
/// of `set_b` on a congruent mesh.
///
/// Returns a bijection; any unmatched basis within `tolerance` is an error
/// naming the offending edges.
pub fn match_bases(
    mesh_a: &TriMesh,
    set_a: &RwgBasisSet,
    mesh_b: &TriMesh,
    set_b: &RwgBasisSet,
    translation: Vec3,
    tolerance: f64,
) -> Result<Vec<BasisMatch>> {
    // Spatial hash on edge midpoints, cell size well above tolerance but
    // below any realistic edge spacing.
    let cell = (tolerance * 1e3).max(1e-12);
    let key = |p: Vec3| -> (i64, i64, i64) {
        ((p.x / cell).round() as i64, (p.y / cell).round() as i64, (p.z / cell).round() as i64)
    };

    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (j, f) in set_b.functions().iter().enumerate() {
        grid.entry(key(f.edge_midpoint(mesh_b))).or_default().push(j);
    }

    if set_a.len() != set_b.len() {
        return Err(Error::Matching(format!(
            "basis counts differ: {} vs {}",
            set_a.len(),
            set_b.len()
        )));
    }

    let mut used = vec![false; set_b.len()];
    let mut matches = Vec::with_capacity(set_a.len());
    let mut failures: Vec<String> = Vec::new();

    for (i, fa) in set_a.functions().iter().enumerate() {
        let mid = fa.edge_midpoint(mesh_a) + translation;
        let k0 = key(mid);
        let mut found = None;
        'search: for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                for dz in -1..=1i64 {
                    if let Some(cands) = grid.get(&(k0.0 + dx, k0.1 + dy, k0.2 + dz)) {
                        for &j in cands {
                            if used[j] {
                                continue;
                            }
                            let fb = &set_b.functions()[j];
                            if edges_coincide(mesh_a, fa.edge, translation, mesh_b, fb.edge, tolerance) {
                                found = Some(j);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(j) => {
                used[j] = true;
                let fb = &set_b.functions()[j];
                let ca = mesh_a.tri_centroid(fa.tri_plus) + translation;
                let cb = mesh_b.tri_centroid(fb.tri_plus);
                let sign = if (ca - cb).norm() <= 10.0 * tolerance { 1 } else { -1 };
                // Verify the -1 case really pairs plus with minus.
                if sign == -1 {
                    let cbm = mesh_b.tri_centroid(fb.tri_minus);
                    if (ca - cbm).norm() > 10.0 * tolerance {
                        failures.push(format!(
                            "edge ({},{}) matched midpoint but triangles are not congruent",
                            fa.edge.0, fa.edge.1
                        ));
                        continue;
                    }
                }
                matches.push(BasisMatch { index_a: i, index_b: j, sign });
            }
            None => failures.push(format!("edge ({},{}) has no counterpart", fa.edge.0, fa.edge.1)),
        }
    }

    if !failures.is_empty() {
        let shown: Vec<&String> = failures.iter().take(8).collect();
        return Err(Error::Matching(format!(
            "{} unmatched bases, e.g. {:?}",
            failures.len(),
            shown
        )));
    }
    Ok(matches)
}

fn edges_coincide(
    mesh_a: &TriMesh,
    ea: (usize, usize),
    t: Vec3,
    mesh_b: &TriMesh,
    eb: (usize, usize),
    tol: f64,
) -> bool {
    let a0 = mesh_a.vertex(ea.0) + t;
    let a1 = mesh_a.vertex(ea.1) + t;
    let b0 = mesh_b.vertex(eb.0);
    let b1 = mesh_b.vertex(eb.1);
    ((a0 - b0).norm() <= tol && (a1 - b1).norm() <= tol)
        || ((a0 - b1).norm() <= tol && (a1 - b0).norm() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rwg, GEOM_TOL};
    use crate::oracle::icosphere_mesh;

    #[test]
    fn identity_matching_is_identity() {
        let m = icosphere_mesh(1.0, 1);
        let all: Vec<usize> = (0..m.triangles().len()).collect();
        let set = build_rwg(&m, &all).unwrap();
        let pairs = match_bases(&m, &set, &m, &set, Vec3::zeros(), GEOM_TOL).unwrap();
        for p in &pairs {
            assert_eq!(p.index_a, p.index_b);
            assert_eq!(p.sign, 1);
        }
    }

    #[test]
    fn roundtrip_composition_is_identity() {
        let m = icosphere_mesh(0.01, 1);
        let t = Vec3::new(0.05, -0.02, 0.003);
        let m2 = m.translated(t);
        let all: Vec<usize> = (0..m.triangles().len()).collect();
        let a = build_rwg(&m, &all).unwrap();
        let b = build_rwg(&m2, &all).unwrap();
        let fwd = match_bases(&m, &a, &m2, &b, t, GEOM_TOL).unwrap();
        let bwd = match_bases(&m2, &b, &m, &a, -t, GEOM_TOL).unwrap();
        let mut back = vec![(0usize, 0i32); b.len()];
        for p in &bwd {
            back[p.index_a] = (p.index_b, p.sign);
        }
        for p in &fwd {
            let (i, s) = back[p.index_b];
            assert_eq!(i, p.index_a);
            assert_eq!(s * p.sign, 1);
        }
    }

    #[test]
    fn perturbed_vertex_fails_with_named_edge() {
        let m = icosphere_mesh(0.01, 0);
        let all: Vec<usize> = (0..m.triangles().len()).collect();
        let a = build_rwg(&m, &all).unwrap();
        // perturb one vertex by 10x tolerance
        let mut verts = m.vertices().to_vec();
        verts[0].x += 10.0 * GEOM_TOL;
        let m2 = crate::mesh::TriMesh::new(verts, m.triangles().to_vec()).unwrap();
        let b = build_rwg(&m2, &all).unwrap();
        let err = match_bases(&m, &a, &m2, &b, Vec3::zeros(), GEOM_TOL).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("unmatched"), "{msg}");
    }
}
