use std::collections::HashMap;

use super::trimesh::{FaceId, RegionRef, SurfaceTag, TriMesh, Triangle};
use super::Vec3;
use crate::error::{Error, Result};

/// Parameters of a parametric grounded unit cell.
///
/// Layers are stacked bottom-up starting at z = 0; the topmost layer is
/// normally air so that the PEC patch (placed on the topmost internal
/// interface) lies strictly inside the box.
#[derive(Debug, Clone)]
pub struct UnitCellParams {
    /// Cell footprint, meters (box is width x width x total height).
    pub width: f64,
    /// Layer thicknesses bottom-up, meters.
    pub layer_heights: Vec<f64>,
    /// Relative permittivity per layer.
    pub permittivities: Vec<f64>,
    /// Side of the centered square PEC patch, meters (0 = no patch).
    pub patch_width: f64,
    /// Characteristic mesh length on and around the patch, meters.
    pub mesh_length_patch: f64,
    /// Characteristic mesh length elsewhere on the box, meters.
    pub mesh_length_box: f64,
    /// Whether the bottom face is a PEC ground plane.
    pub grounded: bool,
    /// Geometric refinement levels (ratio 3) toward the cell's outer edges
    /// and the bottom of the walls, resolving the singular currents at the
    /// ground rim. 0 disables grading.
    pub rim_grading: usize,
}

/// A generated unit cell: parameters plus the meshed geometry.
#[derive(Debug, Clone)]
pub struct UnitCellGeometry {
    pub params: UnitCellParams,
    pub mesh: TriMesh,
}

impl UnitCellGeometry {
    pub fn box_height(&self) -> f64 {
        self.params.layer_heights.iter().sum()
    }
}

/// Generate a grounded dielectric box with a centered square PEC patch.
///
/// All horizontal sheets share one coordinate list so that walls, interfaces
/// and the ground plane are conforming, and opposite side walls are produced
/// by translating a single meshed wall so they are congruent bit-for-bit.
pub fn generate_unit_cell(params: &UnitCellParams) -> Result<UnitCellGeometry> {
    let w = params.width;
    let pw = params.patch_width;
    if !(w > 0.0) {
        return Err(Error::Geometry("cell width must be positive".into()));
    }
    if params.layer_heights.is_empty() || params.layer_heights.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::Geometry("layer heights must be positive".into()));
    }
    if params.layer_heights.len() != params.permittivities.len() {
        return Err(Error::Geometry("one permittivity per layer required".into()));
    }
    if pw < 0.0 || (pw > 0.0 && pw >= w) {
        return Err(Error::Geometry(format!(
            "patch width {pw} must be strictly smaller than cell width {w}"
        )));
    }
    if pw > 0.0 && params.layer_heights.len() < 2 {
        return Err(Error::Geometry(
            "a patch requires at least two layers so it lies strictly inside the box".into(),
        ));
    }
    if !(params.mesh_length_box > 0.0) || !(params.mesh_length_patch > 0.0) {
        return Err(Error::Geometry("mesh lengths must be positive".into()));
    }
    if params.mesh_length_box > w {
        return Err(Error::Geometry("box mesh length exceeds the cell width".into()));
    }
    if pw > 0.0 && params.mesh_length_patch > pw {
        return Err(Error::Geometry("patch mesh length exceeds the patch width".into()));
    }

    // One horizontal coordinate list for x and y, refined over the patch band.
    let coords = horizontal_coords(w, pw, params.mesh_length_box, params.mesh_length_patch);
    // Vertical coordinate list split per layer, with exact interface heights.
    let mut z_bounds = vec![0.0f64];
    let mut acc = 0.0;
    for &h in &params.layer_heights {
        acc += h;
        z_bounds.push(acc);
    }
    let mut z_coords = vec![0.0f64];
    for i in 0..params.layer_heights.len() {
        let (z0, z1) = (z_bounds[i], z_bounds[i + 1]);
        let n = ((z1 - z0) / params.mesh_length_box).ceil().max(1.0) as usize;
        for k in 1..=n {
            let z = if k == n { z1 } else { z0 + (z1 - z0) * k as f64 / n as f64 };
            z_coords.push(z);
        }
    }
    let coords = graded(&coords, params.rim_grading, true);
    let z_coords = graded(&z_coords, params.rim_grading, false);

    let mut b = MeshBuilder::default();
    let nlayers = params.layer_heights.len();
    let top_layer = RegionRef::Interior(nlayers as u32 - 1);

    // Bottom sheet (normal +z; front = bottom layer, back = exterior).
    let bottom_tag = if params.grounded {
        SurfaceTag::Ground
    } else {
        SurfaceTag::Fictitious(FaceId::Bottom)
    };
    b.add_horizontal_sheet(&coords, 0.0, |_, _| (bottom_tag, RegionRef::Interior(0), RegionRef::Exterior));

    // Internal interfaces; the patch lives on the topmost internal interface.
    let patch_interface = nlayers - 1; // z index of topmost internal interface
    let half = pw / 2.0;
    let (lo, hi) = (w / 2.0 - half, w / 2.0 + half);
    for i in 1..nlayers {
        let z = z_bounds[i];
        let below = RegionRef::Interior(i as u32 - 1);
        let above = RegionRef::Interior(i as u32);
        let on_patch_plane = pw > 0.0 && i == patch_interface;
        b.add_horizontal_sheet(&coords, z, |cx, cy| {
            let in_patch = on_patch_plane
                && cx > lo - 1e-12
                && cx < hi + 1e-12
                && cy > lo - 1e-12
                && cy < hi + 1e-12;
            let tag = if in_patch { SurfaceTag::Pec } else { SurfaceTag::Dielectric };
            (tag, above, below)
        });
    }

    // Top sheet (normal +z; front = exterior).
    let h_box = z_bounds[nlayers];
    b.add_horizontal_sheet(&coords, h_box, |_, _| {
        (SurfaceTag::Fictitious(FaceId::Top), RegionRef::Exterior, top_layer)
    });

    // Walls: mesh the -x and -y walls, then translate to +x / +y.
    let layer_of_z = |z: f64| -> RegionRef {
        let i = z_bounds.iter().take(nlayers).rposition(|&zb| z > zb - 1e-15).unwrap_or(0);
        RegionRef::Interior(i as u32)
    };
    b.add_wall(&coords, &z_coords, Wall::XNeg, w, &layer_of_z);
    b.add_wall(&coords, &z_coords, Wall::YNeg, w, &layer_of_z);

    let mesh = b.finish()?;
    Ok(UnitCellGeometry { params: params.clone(), mesh })
}

fn horizontal_coords(w: f64, pw: f64, len_box: f64, len_patch: f64) -> Vec<f64> {
    let mut c = Vec::new();
    if pw > 0.0 {
        let a = (w - pw) / 2.0;
        let bnd = (w + pw) / 2.0;
        push_segment(&mut c, 0.0, a, len_box);
        push_segment(&mut c, a, bnd, len_patch);
        push_segment(&mut c, bnd, w, len_box);
    } else {
        push_segment(&mut c, 0.0, w, len_box);
    }
    c
}

/// Geometrically subdivide the first (and optionally last) interval toward the
/// outer end, with ratio 3 per level.
fn graded(c: &[f64], levels: usize, both_ends: bool) -> Vec<f64> {
    if levels == 0 || c.len() < 2 {
        return c.to_vec();
    }
    let mut out = c.to_vec();
    let first = c[1] - c[0];
    for k in 1..=levels {
        out.push(c[0] + first * 3f64.powi(-(k as i32)));
    }
    if both_ends {
        let last = c[c.len() - 1] - c[c.len() - 2];
        for k in 1..=levels {
            out.push(c[c.len() - 1] - last * 3f64.powi(-(k as i32)));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn push_segment(out: &mut Vec<f64>, a: f64, b: f64, len: f64) {
    let n = ((b - a) / len).ceil().max(1.0) as usize;
    if out.is_empty() {
        out.push(a);
    }
    for k in 1..=n {
        let x = if k == n { b } else { a + (b - a) * k as f64 / n as f64 };
        out.push(x);
    }
}

#[derive(Clone, Copy)]
enum Wall {
    XNeg,
    YNeg,
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Vec3>,
    vertex_ids: HashMap<(u64, u64, u64), usize>,
    triangles: Vec<Triangle>,
}

impl MeshBuilder {
    fn vertex(&mut self, p: Vec3) -> usize {
        let norm = |x: f64| if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() };
        let key = (norm(p.x), norm(p.y), norm(p.z));
        if let Some(&i) = self.vertex_ids.get(&key) {
            return i;
        }
        let i = self.vertices.len();
        self.vertices.push(p);
        self.vertex_ids.insert(key, i);
        i
    }

    fn quad(&mut self, p: [Vec3; 4], tag: SurfaceTag, front: RegionRef, back: RegionRef) {
        // Split along the (p0, p2) diagonal; winding gives the normal
        // (p1-p0) x (p2-p0), which callers arrange to be the front side.
        let v: Vec<usize> = p.iter().map(|&q| self.vertex(q)).collect();
        self.triangles.push(Triangle { v: [v[0], v[1], v[2]], tag, front, back });
        self.triangles.push(Triangle { v: [v[0], v[2], v[3]], tag, front, back });
    }

    /// Horizontal sheet at height z over the coords x coords grid, normal +z.
    fn add_horizontal_sheet<F>(&mut self, coords: &[f64], z: f64, classify: F)
    where
        F: Fn(f64, f64) -> (SurfaceTag, RegionRef, RegionRef),
    {
        for i in 0..coords.len() - 1 {
            for j in 0..coords.len() - 1 {
                let (x0, x1) = (coords[i], coords[i + 1]);
                let (y0, y1) = (coords[j], coords[j + 1]);
                let (tag, front, back) = classify((x0 + x1) / 2.0, (y0 + y1) / 2.0);
                self.quad(
                    [
                        Vec3::new(x0, y0, z),
                        Vec3::new(x1, y0, z),
                        Vec3::new(x1, y1, z),
                        Vec3::new(x0, y1, z),
                    ],
                    tag,
                    front,
                    back,
                );
            }
        }
    }

    /// Meshes the negative wall and its translated positive counterpart.
    fn add_wall<F>(&mut self, coords: &[f64], z_coords: &[f64], wall: Wall, w: f64, layer_of_z: F)
    where
        F: Fn(f64) -> RegionRef,
    {
        // Build quads of the negative wall in (s, z) with the outward normal
        // -x (or -y); the positive wall reuses the same quads translated by
        // +w, whose stored winding then has the normal pointing inward, which
        // is recorded through front/back.
        for i in 0..coords.len() - 1 {
            for j in 0..z_coords.len() - 1 {
                let (s0, s1) = (coords[i], coords[i + 1]);
                let (z0, z1) = (z_coords[j], z_coords[j + 1]);
                let inner = layer_of_z((z0 + z1) / 2.0);
                let (neg_face, pos_face, shift) = match wall {
                    Wall::XNeg => (FaceId::XNeg, FaceId::XPos, Vec3::new(w, 0.0, 0.0)),
                    Wall::YNeg => (FaceId::YNeg, FaceId::YPos, Vec3::new(0.0, w, 0.0)),
                };
                // Quad corners ordered so the winding normal points outward
                // on the negative wall.
                let p = match wall {
                    Wall::XNeg => [
                        Vec3::new(0.0, s0, z0),
                        Vec3::new(0.0, s0, z1),
                        Vec3::new(0.0, s1, z1),
                        Vec3::new(0.0, s1, z0),
                    ],
                    Wall::YNeg => [
                        Vec3::new(s0, 0.0, z0),
                        Vec3::new(s1, 0.0, z0),
                        Vec3::new(s1, 0.0, z1),
                        Vec3::new(s0, 0.0, z1),
                    ],
                };
                self.quad(p, SurfaceTag::Fictitious(neg_face), RegionRef::Exterior, inner);
                let pt = [p[0] + shift, p[1] + shift, p[2] + shift, p[3] + shift];
                // Same winding, so the normal now points into the cell.
                self.quad(pt, SurfaceTag::Fictitious(pos_face), inner, RegionRef::Exterior);
            }
        }
    }

    fn finish(self) -> Result<TriMesh> {
        TriMesh::new(self.vertices, self.triangles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rwg, load_mesh, match_bases, write_mesh, GEOM_TOL};

    fn sample_cell() -> UnitCellParams {
        UnitCellParams {
            width: 13.5e-3,
            layer_heights: vec![0.762e-3, 2.0e-3 - 0.762e-3],
            permittivities: vec![3.66, 1.0],
            patch_width: 5.4e-3,
            mesh_length_patch: 2.0e-3,
            mesh_length_box: 3.0e-3,
            grounded: true,
            rim_grading: 0,
        }
    }

    #[test]
    fn sample_cell_is_valid_and_roundtrips() {
        let cell = generate_unit_cell(&sample_cell()).unwrap();
        assert!((cell.box_height() - 2.0e-3).abs() < 1e-12);
        // survives the full validator via load/write round trip
        let text = write_mesh(&cell.mesh);
        let re = load_mesh(&text).unwrap();
        assert_eq!(re.triangles().len(), cell.mesh.triangles().len());
    }

    #[test]
    fn patch_equal_to_width_is_rejected() {
        let mut p = sample_cell();
        p.patch_width = p.width;
        assert!(generate_unit_cell(&p).is_err());
    }

    #[test]
    fn mesh_length_larger_than_cell_is_rejected() {
        let mut p = sample_cell();
        p.mesh_length_box = 20e-3;
        assert!(generate_unit_cell(&p).is_err());
    }

    #[test]
    fn opposite_faces_match_under_lattice_translation() {
        let cell = generate_unit_cell(&sample_cell()).unwrap();
        let m = &cell.mesh;
        let face = |f: FaceId| -> Vec<usize> {
            m.triangles()
                .iter()
                .enumerate()
                .filter(|(_, t)| t.tag == SurfaceTag::Fictitious(f))
                .map(|(i, _)| i)
                .collect()
        };
        let xneg = build_rwg(m, &face(FaceId::XNeg)).unwrap();
        let xpos = build_rwg(m, &face(FaceId::XPos)).unwrap();
        assert!(!xneg.is_empty());
        let pairs =
            match_bases(m, &xpos, m, &xneg, Vec3::new(-cell.params.width, 0.0, 0.0), GEOM_TOL)
                .unwrap();
        assert_eq!(pairs.len(), xpos.len());
    }

    #[test]
    fn regions_cover_all_layers() {
        let cell = generate_unit_cell(&sample_cell()).unwrap();
        assert_eq!(cell.mesh.interior_regions(), vec![0, 1]);
        // Patch triangles exist and are strictly inside the footprint.
        let pec: Vec<_> = cell
            .mesh
            .triangles()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.tag == SurfaceTag::Pec)
            .map(|(i, _)| i)
            .collect();
        assert!(!pec.is_empty());
        for &i in &pec {
            let c = cell.mesh.tri_centroid(i);
            assert!(c.x > 0.0 && c.x < cell.params.width);
            assert!((c.z - 0.762e-3).abs() < 1e-12);
        }
    }
}
