//! Finite-array layout, excitation, inter-cell coupling assembly, and the
//! overlap incidence matrix.
//!
//! Cells sit on a rectangular lattice whose periods equal the cell footprint,
//! so adjacent fictitious boxes share walls. Free-space coupling blocks
//! between box basis sets depend only on the lattice offset (the
//! block-Toeplitz property exploited by the FFT operator), and duplicated
//! unknowns on shared walls are merged by a sparse overlap map.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{
    assemble_k, assemble_l, rotated_gram_coincident, AssemblyOptions, QuadratureRule,
};
use crate::macromodel::CellDecomposition;
use crate::mesh::{RegionRef, RwgBasisSet, SurfaceTag, TriMesh, Vec3, GEOM_TOL};
use crate::oracle::HertzianDipole;
use crate::{CVec3, Cplx, C0, EPS0, ETA0, MU0};

/// An incident field: electric and magnetic field at a point.
pub trait Excitation: Sync {
    /// (E, H) at the observation point, V/m and A/m.
    fn fields(&self, r: Vec3) -> (CVec3, CVec3);
}

/// Uniform plane wave `E = e0 exp(-j k d . r)` travelling along `d`.
#[derive(Debug, Clone)]
pub struct PlaneWave {
    e0: CVec3,
    dir: Vec3,
    k: f64,
    h0: CVec3,
}

impl PlaneWave {
    /// `e0` must be orthogonal to the propagation direction `dir`.
    pub fn new(e0: CVec3, dir: Vec3, k: f64) -> Result<Self> {
        let n = dir.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::Excitation("plane-wave direction must be nonzero".into()));
        }
        let dir = dir / n;
        let along = (e0.x * Complex64::from(dir.x)
            + e0.y * Complex64::from(dir.y)
            + e0.z * Complex64::from(dir.z))
        .norm();
        let mag = (e0.x.norm_sqr() + e0.y.norm_sqr() + e0.z.norm_sqr()).sqrt();
        if mag <= 0.0 {
            return Err(Error::Excitation("plane-wave amplitude must be nonzero".into()));
        }
        if along > 1e-9 * mag {
            return Err(Error::Excitation(
                "plane-wave polarization must be transverse to the direction".into(),
            ));
        }
        // H = (d x E) / eta0.
        let h0 = CVec3::new(
            (Complex64::from(dir.y) * e0.z - Complex64::from(dir.z) * e0.y) / ETA0,
            (Complex64::from(dir.z) * e0.x - Complex64::from(dir.x) * e0.z) / ETA0,
            (Complex64::from(dir.x) * e0.y - Complex64::from(dir.y) * e0.x) / ETA0,
        );
        Ok(PlaneWave { e0, dir, k, h0 })
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }
}

impl Excitation for PlaneWave {
    fn fields(&self, r: Vec3) -> (CVec3, CVec3) {
        let phase = Complex64::new(0.0, -self.k * self.dir.dot(&r)).exp();
        (self.e0 * phase, self.h0 * phase)
    }
}

/// Hertzian dipole source radiating in free space.
#[derive(Debug, Clone)]
pub struct DipoleSource {
    pub dipole: HertzianDipole,
    pub k: f64,
}

impl Excitation for DipoleSource {
    fn fields(&self, r: Vec3) -> (CVec3, CVec3) {
        self.dipole.fields(self.k, r)
    }
}

/// Galerkin inner products `<f_m, F>` of a vector field with every function
/// of an RWG set, using a fixed 7-point rule per triangle.
pub fn project_field<F: Fn(Vec3) -> CVec3>(
    mesh: &TriMesh,
    set: &RwgBasisSet,
    field: F,
) -> DVector<Cplx> {
    let rule = QuadratureRule::new(7).expect("fixed rule");
    let mut v = DVector::zeros(set.len());
    for (m, f) in set.functions().iter().enumerate() {
        let mut acc = Complex64::ZERO;
        for &(tri, plus) in &[(f.tri_plus, true), (f.tri_minus, false)] {
            let verts = mesh.tri_vertices(tri);
            for (p, w) in rule.points_on(&verts, mesh.tri_area(tri)) {
                let fm = f.eval(mesh, plus, p);
                let fv = field(p);
                acc += (fv.x * fm.x + fv.y * fm.y + fv.z * fm.z) * w;
            }
        }
        v[m] = acc;
    }
    v
}

/// Rectangular lattice of unit cells; periods equal the cell footprint.
#[derive(Debug, Clone)]
pub struct ArrayLayout {
    period_x: f64,
    period_y: f64,
    mx: usize,
    my: usize,
    /// Template index per cell, row-major in (x, y) with x fastest.
    template_of: Vec<usize>,
}

impl ArrayLayout {
    pub fn new(
        period_x: f64,
        period_y: f64,
        mx: usize,
        my: usize,
        template_of: Vec<usize>,
        n_templates: usize,
    ) -> Result<Self> {
        if mx == 0 || my == 0 {
            return Err(Error::Layout("lattice counts must be positive".into()));
        }
        if !(period_x > 0.0) || !(period_y > 0.0) {
            return Err(Error::Layout("lattice periods must be positive".into()));
        }
        if template_of.len() != mx * my {
            return Err(Error::Layout(format!(
                "template map has {} entries for {} cells",
                template_of.len(),
                mx * my
            )));
        }
        if let Some(&t) = template_of.iter().find(|&&t| t >= n_templates) {
            return Err(Error::Layout(format!("cell references unknown template {t}")));
        }
        Ok(ArrayLayout { period_x, period_y, mx, my, template_of })
    }

    pub fn cells(&self) -> usize {
        self.mx * self.my
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.mx, self.my)
    }

    pub fn periods(&self) -> (f64, f64) {
        (self.period_x, self.period_y)
    }

    /// Row-major cell index with x fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.mx + ix
    }

    pub fn coords(&self, m: usize) -> (usize, usize) {
        (m % self.mx, m / self.mx)
    }

    /// Origin (minimum corner) of a cell's footprint.
    pub fn origin(&self, m: usize) -> Vec3 {
        let (ix, iy) = self.coords(m);
        Vec3::new(ix as f64 * self.period_x, iy as f64 * self.period_y, 0.0)
    }

    pub fn template(&self, m: usize) -> usize {
        self.template_of[m]
    }

    /// All lattice offsets (dx, dy) any cell pair can realize.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let mut v = Vec::new();
        for dy in -(self.my as i64 - 1)..=(self.my as i64 - 1) {
            for dx in -(self.mx as i64 - 1)..=(self.mx as i64 - 1) {
                v.push((dx, dy));
            }
        }
        v
    }

    pub fn offset_translation(&self, (dx, dy): (i64, i64)) -> Vec3 {
        Vec3::new(dx as f64 * self.period_x, dy as f64 * self.period_y, 0.0)
    }
}

/// Sign turning a box triangle's winding normal into the outward normal of
/// the fictitious surface (exterior side).
pub fn outward_orientation(mesh: &TriMesh, tri: usize) -> f64 {
    if mesh.triangles()[tri].front == RegionRef::Exterior {
        1.0
    } else {
        -1.0
    }
}

/// Free-space coupling block between the box bases of two (translated) cell
/// meshes: the exterior-side field equations tested on the first cell's box,
/// sourced by the second cell's equivalent currents. Coincident triangles
/// (shared walls, or the whole box at zero offset) contribute the one-sided
/// jump residues with the test cell's outward normal.
pub fn coupling_block(
    mesh_t: &TriMesh,
    mesh_s: &TriMesh,
    decomp: &CellDecomposition,
    freq_hz: f64,
    opts: &AssemblyOptions,
) -> DMatrix<Cplx> {
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let k0 = omega / C0;
    let e = &decomp.box_electric;
    let m = &decomp.box_magnetic;
    let (ne, nm) = (e.len(), m.len());
    // Interior-side rim unknowns radiate only in their region problems; their
    // exterior rows and columns stay zero.
    let n = decomp.eq_len();
    let l_ee = assemble_l(mesh_t, e, mesh_s, e, k0, opts);
    let l_mm = assemble_l(mesh_t, m, mesh_s, m, k0, opts);
    let k_em = assemble_k(mesh_t, e, mesh_s, m, k0, opts);
    let k_me = assemble_k(mesh_t, m, mesh_s, e, k0, opts);
    let orient = |t: usize| outward_orientation(mesh_t, t);
    let r_em = rotated_gram_coincident(mesh_t, e, mesh_s, m, orient);
    let r_me = rotated_gram_coincident(mesh_t, m, mesh_s, e, orient);
    let jwmu = Complex64::new(0.0, omega * MU0);
    let jweps = Complex64::new(0.0, omega * EPS0);
    let mut z = DMatrix::zeros(n, n);
    for i in 0..ne {
        for j in 0..ne {
            z[(i, j)] = -jwmu * l_ee[(i, j)];
        }
    }
    for i in 0..ne {
        for j in 0..nm {
            z[(i, ne + j)] = -(k_em[(i, j)] + Cplx::from(0.5 * r_em[(i, j)]));
        }
    }
    for i in 0..nm {
        for j in 0..ne {
            z[(ne + i, j)] = k_me[(i, j)] + Cplx::from(0.5 * r_me[(i, j)]);
        }
    }
    for i in 0..nm {
        for j in 0..nm {
            z[(ne + i, ne + j)] = -jweps * l_mm[(i, j)];
        }
    }
    z
}

/// One coupling generator block per distinct lattice offset. Blocks depend
/// only on the offset (translation invariance of the free-space kernel), so
/// any template's box mesh may serve as the reference.
pub fn assemble_coupling_generators(
    layout: &ArrayLayout,
    template_mesh: &TriMesh,
    decomp: &CellDecomposition,
    freq_hz: f64,
    opts: &AssemblyOptions,
) -> BTreeMap<(i64, i64), DMatrix<Cplx>> {
    let offsets = layout.offsets();
    let blocks: Vec<((i64, i64), DMatrix<Cplx>)> = offsets
        .par_iter()
        .map(|&off| {
            // The source cell sits at +offset relative to the test cell.
            let mesh_s = template_mesh.translated(layout.offset_translation(off));
            (off, coupling_block(template_mesh, &mesh_s, decomp, freq_hz, opts))
        })
        .collect();
    blocks.into_iter().collect()
}

fn quantize(p: Vec3) -> (i64, i64, i64) {
    let q = 1.0 / GEOM_TOL;
    ((p.x * q).round() as i64, (p.y * q).round() as i64, (p.z * q).round() as i64)
}

type EdgeKey = ((i64, i64, i64), (i64, i64, i64));

fn edge_key(mesh: &TriMesh, edge: (usize, usize), shift: Vec3) -> EdgeKey {
    let a = quantize(mesh.vertex(edge.0) + shift);
    let b = quantize(mesh.vertex(edge.1) + shift);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Matched unknown pairs across one shared wall: `(local_a, local_b, s)`
/// means cell (m)'s unknown `local_a` and its +axis neighbor's `local_b`
/// satisfy `raw_b = s * raw_a`.
#[derive(Debug, Clone)]
struct FacePairs {
    pairs: Vec<(usize, usize, f64)>,
}

fn face_pairs(
    mesh: &TriMesh,
    decomp: &CellDecomposition,
    pos_face: crate::mesh::FaceId,
    neg_face: crate::mesh::FaceId,
    shift: Vec3,
) -> Result<FacePairs> {
    // Per eq local unknown touching the face: (kind, edge key) plus the
    // keys/signs of its triangles on the face, all in the NEG face's frame.
    type Claims = HashMap<(usize, EdgeKey), (usize, Vec<((i64, i64, i64), f64)>)>;
    let collect = |face: crate::mesh::FaceId, shift: Vec3| -> Result<Claims> {
        let mut map: Claims = HashMap::new();
        let n_be = decomp.box_electric.len();
        for (kind, base, set) in
            [(0usize, 0usize, &decomp.box_electric), (1, n_be, &decomp.box_magnetic)]
        {
            for (i, f) in set.functions().iter().enumerate() {
                let mut on_face = Vec::new();
                for &(tri, plus) in &[(f.tri_plus, true), (f.tri_minus, false)] {
                    if mesh.triangles()[tri].tag == SurfaceTag::Fictitious(face) {
                        let sigma = if plus { 1.0 } else { -1.0 };
                        on_face.push((quantize(mesh.tri_centroid(tri) + shift), sigma));
                    }
                }
                if on_face.is_empty() {
                    continue;
                }
                let key = (kind, edge_key(mesh, f.edge, shift));
                if map.insert(key, (base + i, on_face)).is_some() {
                    return Err(Error::Layout(
                        "two unknowns of one kind claim the same wall edge".into(),
                    ));
                }
            }
        }
        // Interior-side rim unknowns whose wall triangle lies on this face.
        let rim_base = n_be + decomp.box_magnetic.len();
        for (i, r) in decomp.rim.iter().enumerate() {
            if mesh.triangles()[r.wall_tri].tag != SurfaceTag::Fictitious(face) {
                continue;
            }
            let on_face =
                vec![(quantize(mesh.tri_centroid(r.wall_tri) + shift), r.region_sign)];
            let key = (2usize, edge_key(mesh, r.edge, shift));
            if map.insert(key, (rim_base + i, on_face)).is_some() {
                return Err(Error::Layout(
                    "two rim unknowns claim the same wall edge".into(),
                ));
            }
        }
        Ok(map)
    };
    let pos = collect(pos_face, shift)?;
    let neg = collect(neg_face, Vec3::zeros())?;
    if pos.len() != neg.len() {
        return Err(Error::Layout(format!(
            "wall unknown mismatch: {} on {:?} vs {} on {:?}",
            pos.len(),
            pos_face,
            neg.len(),
            neg_face
        )));
    }
    let mut pairs = Vec::with_capacity(pos.len());
    for (key, (a, tris_a)) in &pos {
        let (b, tris_b) = neg.get(key).ok_or_else(|| {
            Error::Layout(format!("no matching wall unknown across faces {pos_face:?}/{neg_face:?}"))
        })?;
        // Shared wall triangle: same quantized centroid on both sides.
        let mut sign = None;
        for (ka, sa) in tris_a {
            if let Some((_, sb)) = tris_b.iter().find(|(kb, _)| kb == ka) {
                sign = Some(-sa * sb);
                break;
            }
        }
        let s = sign.ok_or_else(|| {
            Error::Layout("matched wall unknowns share no coincident triangle".into())
        })?;
        pairs.push((*a, *b, s));
    }
    pairs.sort_by_key(|&(a, _, _)| a);
    Ok(FacePairs { pairs })
}

/// Union-find over raw unknowns carrying a relative sign to the root.
struct SignedUf {
    parent: Vec<usize>,
    sign: Vec<f64>,
}

impl SignedUf {
    fn new(n: usize) -> Self {
        SignedUf { parent: (0..n).collect(), sign: vec![1.0; n] }
    }

    /// Returns (root, s) with value_i = s * value_root; compresses paths.
    fn find(&mut self, i: usize) -> (usize, f64) {
        if self.parent[i] == i {
            return (i, 1.0);
        }
        let (root, sp) = self.find(self.parent[i]);
        let s = self.sign[i] * sp;
        self.parent[i] = root;
        self.sign[i] = s;
        (root, s)
    }

    /// Enforce value_b = s * value_a.
    fn union(&mut self, a: usize, b: usize, s: f64) -> Result<()> {
        let (ra, sa) = self.find(a);
        let (rb, sb) = self.find(b);
        if ra == rb {
            if (sb - s * sa).abs() > 0.5 {
                return Err(Error::Layout(
                    "inconsistent orientation cycle while merging shared-wall unknowns".into(),
                ));
            }
            return Ok(());
        }
        // value_a = sa * root_a, value_b = sb * root_b, want value_b = s value_a
        // => root_b = (s * sa / sb) * root_a.
        self.parent[rb] = ra;
        self.sign[rb] = s * sa / sb;
        Ok(())
    }
}

/// Sparse overlap incidence matrix U_o: one signed entry per raw per-cell eq
/// unknown, mapping it to a merged unique unknown.
#[derive(Debug, Clone)]
pub struct OverlapMap {
    entries: Vec<(usize, f64)>,
    n_merged: usize,
}

impl OverlapMap {
    pub fn n_raw(&self) -> usize {
        self.entries.len()
    }

    pub fn n_merged(&self) -> usize {
        self.n_merged
    }

    pub fn row(&self, raw: usize) -> (usize, f64) {
        self.entries[raw]
    }

    /// Y = U_o * x (expand merged unknowns to per-cell stacks).
    pub fn expand(&self, x: &DVector<Cplx>) -> DVector<Cplx> {
        DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|&(c, s)| x[c] * Complex64::from(s)),
        )
    }

    /// v~ = U_o^T * v (sum duplicated rows into merged rows).
    pub fn reduce(&self, v: &DVector<Cplx>) -> DVector<Cplx> {
        let mut out = DVector::zeros(self.n_merged);
        for (raw, &(c, s)) in self.entries.iter().enumerate() {
            out[c] += v[raw] * Complex64::from(s);
        }
        out
    }

    /// Diagonal of U_o^T U_o: multiplicity of each merged unknown.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0usize; self.n_merged];
        for &(c, _) in &self.entries {
            m[c] += 1;
        }
        m
    }
}

/// Build the overlap map merging duplicated box unknowns on shared walls.
///
/// Every box unknown of a cell with a triangle on a face shared with a
/// neighbor merges with the neighbor's unknown at the same physical edge,
/// with the sign that makes the two expansions represent continuous
/// tangential fields (wall components of rim pairs cancel). Chains across
/// corners where four boxes meet are resolved by sign-carrying union-find;
/// an inconsistent cycle is a layout error.
pub fn build_overlap(
    layout: &ArrayLayout,
    template_mesh: &TriMesh,
    decomp: &CellDecomposition,
) -> Result<OverlapMap> {
    use crate::mesh::FaceId;
    let n = decomp.eq_len();
    let (mx, my) = layout.dims();
    let (px, py) = layout.periods();
    let pairs_x = if mx > 1 {
        Some(face_pairs(template_mesh, decomp, FaceId::XPos, FaceId::XNeg, Vec3::new(-px, 0.0, 0.0))?)
    } else {
        None
    };
    let pairs_y = if my > 1 {
        Some(face_pairs(template_mesh, decomp, FaceId::YPos, FaceId::YNeg, Vec3::new(0.0, -py, 0.0))?)
    } else {
        None
    };
    // Outer-rim wrap: where a wall borders no neighbor, the ground current
    // wraps around the rim edge, tying the interior-side rim unknown to the
    // box (wall/ground-underside) unknown at the same edge. On shared walls
    // the ground is continuous instead, and the rim unknowns of the two cells
    // merge through `face_pairs` while the underside flow stays independent.
    let rim_base = decomp.box_electric.len() + decomp.box_magnetic.len();
    let rim_wrap: HashMap<FaceId, Vec<(usize, usize, f64)>> = {
        let mut m: HashMap<FaceId, Vec<(usize, usize, f64)>> = HashMap::new();
        for (i, r) in decomp.rim.iter().enumerate() {
            let SurfaceTag::Fictitious(face) = template_mesh.triangles()[r.wall_tri].tag
            else {
                return Err(Error::Layout("rim wall triangle is not fictitious".into()));
            };
            m.entry(face).or_default().push((
                rim_base + i,
                r.box_col,
                -r.region_sign * r.box_sign,
            ));
        }
        m
    };
    let mut uf = SignedUf::new(layout.cells() * n);
    for iy in 0..my {
        for ix in 0..mx {
            let m = layout.index(ix, iy);
            if ix + 1 < mx {
                let mr = layout.index(ix + 1, iy);
                for &(a, b, s) in &pairs_x.as_ref().expect("mx > 1").pairs {
                    uf.union(m * n + a, mr * n + b, s)?;
                }
            }
            if iy + 1 < my {
                let mu = layout.index(ix, iy + 1);
                for &(a, b, s) in &pairs_y.as_ref().expect("my > 1").pairs {
                    uf.union(m * n + a, mu * n + b, s)?;
                }
            }
            let outer = [
                (ix == 0, FaceId::XNeg),
                (ix + 1 == mx, FaceId::XPos),
                (iy == 0, FaceId::YNeg),
                (iy + 1 == my, FaceId::YPos),
            ];
            for (is_outer, face) in outer {
                if !is_outer {
                    continue;
                }
                for &(rim_col, box_col, s) in
                    rim_wrap.get(&face).map_or(&[][..], |v| v.as_slice())
                {
                    uf.union(m * n + rim_col, m * n + box_col, s)?;
                }
            }
        }
    }
    let total = layout.cells() * n;
    let mut col_of_root: HashMap<usize, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(total);
    for r in 0..total {
        let (root, s) = uf.find(r);
        let next = col_of_root.len();
        let col = *col_of_root.entry(root).or_insert(next);
        entries.push((col, s));
    }
    Ok(OverlapMap { n_merged: col_of_root.len(), entries })
}

/// Check that every template's box basis is congruent with the reference
/// (same unknown count, same edges at the same positions in the same order),
/// the prerequisite for sharing coupling generators and the overlap map.
pub fn verify_congruent_boxes(
    reference: (&TriMesh, &CellDecomposition),
    other: (&TriMesh, &CellDecomposition),
) -> Result<()> {
    let (mesh_a, da) = reference;
    let (mesh_b, db) = other;
    for (kind, sa, sb) in [
        ("electric", &da.box_electric, &db.box_electric),
        ("magnetic", &da.box_magnetic, &db.box_magnetic),
    ] {
        if sa.len() != sb.len() {
            return Err(Error::Layout(format!(
                "box {kind} unknown count differs between templates: {} vs {}",
                sa.len(),
                sb.len()
            )));
        }
        for (fa, fb) in sa.functions().iter().zip(sb.functions()) {
            let ka = edge_key(mesh_a, fa.edge, Vec3::zeros());
            let kb = edge_key(mesh_b, fb.edge, Vec3::zeros());
            if ka != kb {
                return Err(Error::Layout(
                    "box meshes are not congruent across templates (edge mismatch)".into(),
                ));
            }
        }
    }
    if da.rim.len() != db.rim.len() {
        return Err(Error::Layout(format!(
            "rim unknown count differs between templates: {} vs {}",
            da.rim.len(),
            db.rim.len()
        )));
    }
    for (ra, rb) in da.rim.iter().zip(&db.rim) {
        if edge_key(mesh_a, ra.edge, Vec3::zeros()) != edge_key(mesh_b, rb.edge, Vec3::zeros()) {
            return Err(Error::Layout(
                "rim unknowns are not congruent across templates (edge mismatch)".into(),
            ));
        }
    }
    Ok(())
}

/// Per-cell excitation stack: [-<f, E_inc> over box electric; -<f, H_inc>
/// over box magnetic] for every cell, cell-major.
pub fn assemble_excitation<X: Excitation>(
    exc: &X,
    layout: &ArrayLayout,
    template_mesh: &TriMesh,
    decomp: &CellDecomposition,
) -> DVector<Cplx> {
    let n = decomp.eq_len();
    let n_be = decomp.box_electric.len();
    let cells: Vec<DVector<Cplx>> = (0..layout.cells())
        .into_par_iter()
        .map(|m| {
            let mesh = template_mesh.translated(layout.origin(m));
            let ve = project_field(&mesh, &decomp.box_electric, |r| exc.fields(r).0);
            let vh = project_field(&mesh, &decomp.box_magnetic, |r| exc.fields(r).1);
            let mut v = DVector::zeros(n);
            for i in 0..n_be {
                v[i] = -ve[i];
            }
            for i in 0..decomp.box_magnetic.len() {
                v[n_be + i] = -vh[i];
            }
            v
        })
        .collect();
    let mut out = DVector::zeros(layout.cells() * n);
    for (m, v) in cells.iter().enumerate() {
        out.rows_mut(m * n, n).copy_from(v);
    }
    out
}

/// Reject dipole sources placed inside any cell's fictitious box.
pub fn validate_dipole_position(
    layout: &ArrayLayout,
    template_mesh: &TriMesh,
    pos: Vec3,
) -> Result<()> {
    let mut zmin = f64::INFINITY;
    let mut zmax = f64::NEG_INFINITY;
    for v in template_mesh.vertices() {
        zmin = zmin.min(v.z);
        zmax = zmax.max(v.z);
    }
    let (px, py) = layout.periods();
    for m in 0..layout.cells() {
        let o = layout.origin(m);
        if pos.x > o.x && pos.x < o.x + px
            && pos.y > o.y && pos.y < o.y + py
            && pos.z > zmin && pos.z < zmax
        {
            return Err(Error::Excitation(format!(
                "dipole source at ({}, {}, {}) lies inside cell {m}'s equivalent surface",
                pos.x, pos.y, pos.z
            )));
        }
    }
    Ok(())
}

/// Split an expanded (cell-major) coefficient vector into per-cell electric
/// and magnetic coefficient lists for post-processing.
pub fn per_cell_coefficients(
    layout: &ArrayLayout,
    decomp: &CellDecomposition,
    y: &DVector<Cplx>,
) -> Vec<(Vec<Cplx>, Vec<Cplx>)> {
    let n = decomp.eq_len();
    let n_be = decomp.box_electric.len();
    (0..layout.cells())
        .map(|m| {
            let cell = y.rows(m * n, n);
            (cell.as_slice()[..n_be].to_vec(), cell.as_slice()[n_be..].to_vec())
        })
        .collect()
}
