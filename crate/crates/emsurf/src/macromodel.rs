//! Per-cell multi-region system assembly and Schur-complement reduction.
//!
//! A unit cell is decomposed into its homogeneous interior regions. Each
//! region contributes a coupled pair of boundary integral equations (electric
//! field tested with electric bases, magnetic field with magnetic bases) over
//! region-oriented equivalent currents on its closed boundary. A sparse
//! incidence matrix U maps the duplicated per-region coefficients onto unique
//! unknowns: equivalent-surface unknowns on the enclosing box (kept for the
//! array stage) followed by interior unknowns (interfaces, patches, ground).
//! Eliminating the interior unknowns with a Schur complement yields the
//! cell's macromodel: a dense operator over box unknowns only.

use std::collections::HashMap;
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{assemble_k, assemble_l, rotated_gram, AssemblyOptions};
use crate::mesh::{build_rwg, RegionRef, RwgBasisSet, SurfaceTag, TriMesh};
use crate::{Cplx, C0, EPS0, MU0};

/// Basis sets of one homogeneous region's closed boundary.
#[derive(Debug, Clone)]
pub struct RegionBasis {
    pub region: RegionRef,
    /// Relative permittivity of the region's medium.
    pub eps_r: f64,
    /// RWG set over the full boundary (electric currents).
    pub electric: RwgBasisSet,
    /// RWG set over the non-PEC boundary part (magnetic currents).
    pub magnetic: RwgBasisSet,
}

impl RegionBasis {
    pub fn raw_len(&self) -> usize {
        self.electric.len() + self.magnetic.len()
    }

    /// Sign turning a triangle's winding normal into the region normal
    /// (pointing into this region).
    pub fn orientation(&self, mesh: &TriMesh, tri: usize) -> f64 {
        if mesh.triangles()[tri].front == self.region {
            1.0
        } else {
            -1.0
        }
    }
}

/// An interior-side RWG straddling a wall/ground rim edge (wall triangle plus
/// ground-top triangle). Its flow couples the interior wall current to the
/// ground's top-face current; whether it also ties to the box unknown at the
/// same edge (the wall/ground-underside pair) depends on the cell's position
/// in the array, so it is kept as its own equivalent-surface unknown and
/// constrained by the overlap map: at an outer rim the current wraps around
/// the ground edge (merge with the box unknown); at a wall shared with a
/// neighbor the ground is continuous and top/underside flows are independent
/// (merge with the neighbor's rim unknown instead).
#[derive(Debug, Clone)]
pub struct RimFunction {
    /// Vertex-index edge shared by the wall and ground triangles.
    pub edge: (usize, usize),
    /// The wall (fictitious) triangle of the straddling RWG.
    pub wall_tri: usize,
    /// +1 if the wall triangle is the plus half of the region function.
    pub region_sign: f64,
    /// Box electric unknown at the same edge (wall/ground-underside pair).
    pub box_col: usize,
    /// +1 if the wall triangle is the plus half of the box function.
    pub box_sign: f64,
}

/// A unit cell split into regions plus the box (equivalent-surface) sets.
#[derive(Debug, Clone)]
pub struct CellDecomposition {
    pub regions: Vec<RegionBasis>,
    /// Electric unknowns on the enclosing box (walls, top, bottom sheet —
    /// fictitious faces plus the ground sheet when present).
    pub box_electric: RwgBasisSet,
    /// Magnetic unknowns on the box; excludes PEC (ground) triangles.
    pub box_magnetic: RwgBasisSet,
    /// Interior-side wall/ground rim unknowns, ordered by edge.
    pub rim: Vec<RimFunction>,
}

impl CellDecomposition {
    /// Unknowns kept for the array stage: all box J, all box M, then the
    /// interior-side rim unknowns.
    pub fn eq_len(&self) -> usize {
        self.box_electric.len() + self.box_magnetic.len() + self.rim.len()
    }

    pub fn raw_len(&self) -> usize {
        self.regions.iter().map(|r| r.raw_len()).sum()
    }
}

fn is_fictitious(tag: SurfaceTag) -> bool {
    matches!(tag, SurfaceTag::Fictitious(_))
}

fn is_pec(tag: SurfaceTag) -> bool {
    matches!(tag, SurfaceTag::Pec | SurfaceTag::Ground)
}

/// Split a cell mesh into per-region basis sets and the box sets.
///
/// `eps_r[v]` is the relative permittivity of interior region v.
pub fn decompose(mesh: &TriMesh, eps_r: &[f64]) -> Result<CellDecomposition> {
    let region_ids = mesh.interior_regions();
    if region_ids.len() != eps_r.len() {
        return Err(Error::Config(format!(
            "{} permittivities supplied for {} interior regions",
            eps_r.len(),
            region_ids.len()
        )));
    }
    let mut regions = Vec::with_capacity(region_ids.len());
    for (&v, &er) in region_ids.iter().zip(eps_r) {
        if !(er >= 1.0) {
            return Err(Error::Config(format!("region {v}: eps_r {er} must be >= 1")));
        }
        let tris = mesh.region_triangles(RegionRef::Interior(v));
        let nonpec: Vec<usize> =
            tris.iter().copied().filter(|&t| !is_pec(mesh.triangles()[t].tag)).collect();
        let electric = build_rwg(mesh, &tris)?;
        let magnetic = build_rwg(mesh, &nonpec)?;
        if electric.is_empty() {
            return Err(Error::Geometry(format!("region {v} has no electric unknowns")));
        }
        regions.push(RegionBasis { region: RegionRef::Interior(v), eps_r: er, electric, magnetic });
    }
    let box_tris: Vec<usize> = mesh
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, t)| is_fictitious(t.tag) || t.tag == SurfaceTag::Ground)
        .map(|(i, _)| i)
        .collect();
    let box_nonpec: Vec<usize> =
        box_tris.iter().copied().filter(|&t| !is_pec(mesh.triangles()[t].tag)).collect();
    if box_tris.is_empty() {
        return Err(Error::Geometry("cell has no equivalent-surface triangles".into()));
    }
    let box_electric = build_rwg(mesh, &box_tris)?;
    let box_magnetic = build_rwg(mesh, &box_nonpec)?;

    // Interior-side rim functions: region electric RWGs straddling a wall
    // (fictitious) triangle and a ground triangle.
    let mut box_at_edge: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (i, f) in box_electric.functions().iter().enumerate() {
        box_at_edge.insert(f.edge, (i, f.tri_plus));
    }
    let mut rim = Vec::new();
    for rb in &regions {
        for f in rb.electric.functions() {
            let tags = [mesh.triangles()[f.tri_plus].tag, mesh.triangles()[f.tri_minus].tag];
            let wall_is_plus = match tags {
                [SurfaceTag::Fictitious(_), SurfaceTag::Ground] => true,
                [SurfaceTag::Ground, SurfaceTag::Fictitious(_)] => false,
                _ => continue,
            };
            let wall_tri = if wall_is_plus { f.tri_plus } else { f.tri_minus };
            let &(box_col, box_plus) = box_at_edge.get(&f.edge).ok_or_else(|| {
                Error::BoundaryCondition(format!(
                    "no box unknown at wall/ground rim edge {:?}",
                    f.edge
                ))
            })?;
            rim.push(RimFunction {
                edge: f.edge,
                wall_tri,
                region_sign: if wall_is_plus { 1.0 } else { -1.0 },
                box_col,
                box_sign: if wall_tri == box_plus { 1.0 } else { -1.0 },
            });
        }
    }
    rim.sort_by_key(|r| r.edge);
    for w in rim.windows(2) {
        if w[0].edge == w[1].edge {
            return Err(Error::BoundaryCondition(format!(
                "two interior rim unknowns claim edge {:?}",
                w[0].edge
            )));
        }
    }

    Ok(CellDecomposition { regions, box_electric, box_magnetic, rim })
}

/// Sparse incidence matrix: one signed entry per raw unknown, mapping it to a
/// unique unknown. Columns are ordered [equivalent-surface; interior].
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    /// Per raw row: (unique column, sign in {-1, +1}).
    entries: Vec<(usize, f64)>,
    n_eq: usize,
    n_int: usize,
}

impl IncidenceMatrix {
    pub fn n_raw(&self) -> usize {
        self.entries.len()
    }

    pub fn n_eq(&self) -> usize {
        self.n_eq
    }

    pub fn n_int(&self) -> usize {
        self.n_int
    }

    pub fn n_unique(&self) -> usize {
        self.n_eq + self.n_int
    }

    /// The (column, sign) of a raw unknown.
    pub fn row(&self, raw: usize) -> (usize, f64) {
        self.entries[raw]
    }

    /// x_raw = U x_unique.
    pub fn expand(&self, unique: &DVector<Cplx>) -> DVector<Cplx> {
        DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|&(c, s)| unique[c] * Complex64::from(s)),
        )
    }
}

/// Key identifying a raw unknown's kind when merging across regions.
#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct EdgeKey {
    electric: bool,
    edge: (usize, usize),
}

/// Build the incidence matrix for a cell decomposition.
///
/// Rules (each raw RWG is claimed by exactly one):
/// - an RWG with a fictitious triangle maps to the box RWG at the same edge
///   with sign −σ_region·σ_box, where σ = ±1 picks whether the shared
///   fictitious triangle is the plus half (continuity of the tangential
///   fields across the box, region normal = −box normal);
/// - remaining RWGs merge across regions at the same edge iff they share a
///   non-PEC triangle (dielectric interfaces, patch-edge junctions), again
///   with the −σσ sign; RWGs sharing only PEC triangles stay independent
///   (patch top/bottom, ground top).
pub fn build_u(mesh: &TriMesh, decomp: &CellDecomposition) -> Result<IncidenceMatrix> {
    let n_be = decomp.box_electric.len();
    let n_eq = decomp.eq_len();
    // Box lookup: edge -> (eq column, plus triangle).
    let mut box_cols: HashMap<EdgeKey, (usize, usize)> = HashMap::new();
    for (i, f) in decomp.box_electric.functions().iter().enumerate() {
        box_cols.insert(EdgeKey { electric: true, edge: f.edge }, (i, f.tri_plus));
    }
    for (i, f) in decomp.box_magnetic.functions().iter().enumerate() {
        box_cols.insert(EdgeKey { electric: false, edge: f.edge }, (n_be + i, f.tri_plus));
    }
    let rim_base = n_be + decomp.box_magnetic.len();
    let rim_cols: HashMap<(usize, usize), usize> =
        decomp.rim.iter().enumerate().map(|(i, r)| (r.edge, rim_base + i)).collect();

    let n_raw = decomp.raw_len();
    let mut entries: Vec<Option<(usize, f64)>> = vec![None; n_raw];
    // Pending interior claims per (kind, edge): (raw index, tri+, tri-).
    let mut pending: HashMap<EdgeKey, Vec<(usize, usize, usize)>> = HashMap::new();

    let mut raw = 0usize;
    for rb in &decomp.regions {
        for (electric, set) in [(true, &rb.electric), (false, &rb.magnetic)] {
            for f in set.functions() {
                let tags =
                    [mesh.triangles()[f.tri_plus].tag, mesh.triangles()[f.tri_minus].tag];
                if electric && tags.iter().any(|&t| t == SurfaceTag::Ground)
                    && tags.iter().any(|&t| is_fictitious(t))
                {
                    // Wall/ground rim straddler: its own equivalent-surface
                    // unknown, oriented like the region function itself. The
                    // overlap map decides how it ties to other unknowns.
                    let col = *rim_cols.get(&f.edge).ok_or_else(|| {
                        Error::BoundaryCondition(format!(
                            "rim edge {:?} missing from the decomposition",
                            f.edge
                        ))
                    })?;
                    entries[raw] = Some((col, 1.0));
                } else if tags.iter().any(|&t| is_fictitious(t)) {
                    let key = EdgeKey { electric, edge: f.edge };
                    let &(col, box_plus) = box_cols.get(&key).ok_or_else(|| {
                        Error::BoundaryCondition(format!(
                            "no box unknown for edge {:?} touching a fictitious face",
                            f.edge
                        ))
                    })?;
                    // Shared fictitious triangle (always in the box pair).
                    let t = if is_fictitious(tags[0]) { f.tri_plus } else { f.tri_minus };
                    let sigma_r = if t == f.tri_plus { 1.0 } else { -1.0 };
                    let sigma_b = if t == box_plus { 1.0 } else { -1.0 };
                    entries[raw] = Some((col, -sigma_r * sigma_b));
                } else {
                    pending
                        .entry(EdgeKey { electric, edge: f.edge })
                        .or_default()
                        .push((raw, f.tri_plus, f.tri_minus));
                }
                raw += 1;
            }
        }
    }

    // Interior merges: deterministic order over edges.
    let mut keys: Vec<EdgeKey> = pending.keys().copied().collect();
    keys.sort_by_key(|k| (!k.electric, k.edge));
    let mut n_int = 0usize;
    for key in keys {
        let claims = &pending[&key];
        // Greedy classes: a claim joins the first class whose representative
        // shares a non-PEC triangle with it.
        let mut classes: Vec<(usize, usize, usize)> = Vec::new(); // representatives
        for &(r, tp, tm) in claims {
            let mut placed = false;
            for &(rr, rtp, rtm) in &classes {
                let shared = [tp, tm]
                    .iter()
                    .copied()
                    .find(|t| (*t == rtp || *t == rtm) && !is_pec(mesh.triangles()[*t].tag));
                if let Some(t) = shared {
                    let (col, rep_sign) = entries[rr].expect("representative already placed");
                    let sigma = if t == tp { 1.0 } else { -1.0 };
                    let sigma_rep = if t == rtp { 1.0 } else { -1.0 };
                    if entries[r].is_some() {
                        return Err(Error::BoundaryCondition(
                            "raw unknown claimed by two merge rules".into(),
                        ));
                    }
                    entries[r] = Some((col, -sigma * sigma_rep * rep_sign));
                    placed = true;
                    break;
                }
            }
            if !placed {
                entries[r] = Some((n_eq + n_int, 1.0));
                n_int += 1;
                classes.push((r, tp, tm));
            }
        }
    }

    let entries: Vec<(usize, f64)> = entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| Error::BoundaryCondition(format!("raw unknown {i} unclassified"))))
        .collect::<Result<_>>()?;
    Ok(IncidenceMatrix { entries, n_eq, n_int })
}

/// Coupled boundary-equation block of one region, over region-oriented
/// currents, with zero right-hand side:
///
/// ```text
/// [ -j omega mu0 L_e      -(K_em + R_em/2) ] [J]   [0]
/// [ (K_em - R_em/2)^T     -j omega eps L_m ] [M] = [0]
/// ```
///
/// where R_em[m,n] = <f_m, n x f_n> with the normal pointing into the region
/// and K_me = K_em^T is used for exact Galerkin reciprocity.
pub fn assemble_region_block(
    mesh: &TriMesh,
    rb: &RegionBasis,
    freq_hz: f64,
    opts: &AssemblyOptions,
) -> Result<DMatrix<Cplx>> {
    if !(freq_hz > 0.0) {
        return Err(Error::Config("frequency must be positive".into()));
    }
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let k = omega / C0 * rb.eps_r.sqrt();
    let eps = EPS0 * rb.eps_r;
    let (ne, nm) = (rb.electric.len(), rb.magnetic.len());
    let n = ne + nm;
    let mut z = DMatrix::zeros(n, n);

    let l_e = assemble_l(mesh, &rb.electric, mesh, &rb.electric, k, opts);
    let jwmu = Complex64::new(0.0, omega * MU0);
    for i in 0..ne {
        for j in 0..ne {
            z[(i, j)] = -jwmu * l_e[(i, j)];
        }
    }
    if nm > 0 {
        let l_m = assemble_l(mesh, &rb.magnetic, mesh, &rb.magnetic, k, opts);
        let k_em = assemble_k(mesh, &rb.electric, mesh, &rb.magnetic, k, opts);
        let r_em = rotated_gram(mesh, &rb.electric, &rb.magnetic, |t| rb.orientation(mesh, t));
        let jweps = Complex64::new(0.0, omega * eps);
        for i in 0..ne {
            for j in 0..nm {
                let kv = k_em[(i, j)];
                let rv = 0.5 * r_em[(i, j)];
                z[(i, ne + j)] = -(kv + rv);
                z[(ne + j, i)] = kv - rv;
            }
        }
        for i in 0..nm {
            for j in 0..nm {
                z[(ne + i, ne + j)] = -jweps * l_m[(i, j)];
            }
        }
    }
    Ok(z)
}

/// All region blocks of a cell (block-diagonal system, zero right-hand side).
pub fn assemble_interior_system(
    mesh: &TriMesh,
    decomp: &CellDecomposition,
    freq_hz: f64,
    opts: &AssemblyOptions,
) -> Result<Vec<DMatrix<Cplx>>> {
    decomp.regions.iter().map(|rb| assemble_region_block(mesh, rb, freq_hz, opts)).collect()
}

/// The Schur-reduced per-cell operator over box unknowns, with the factors
/// needed to recover interior unknowns afterwards.
#[derive(Debug, Clone)]
pub struct Macromodel {
    /// Dense reduced matrix over [box J; box M] unknowns.
    pub z_eq: DMatrix<Cplx>,
    pub freq_hz: f64,
    pub mesh_hash: u64,
    /// x_int = recovery * x_eq (None if dropped, e.g. loaded from cache).
    pub recovery: Option<DMatrix<Cplx>>,
}

/// Condition threshold on the interior block before reduction fails.
const COND_LIMIT: f64 = 1e13;

/// Fold the block-diagonal raw system through the incidence matrix:
/// Z̃ = Uᵀ blkdiag(blocks) U over the unique [eq; int] unknowns.
pub fn fold_blocks(blocks: &[DMatrix<Cplx>], u: &IncidenceMatrix) -> Result<DMatrix<Cplx>> {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    if total != u.n_raw() {
        return Err(Error::Reduction(format!(
            "system has {total} raw unknowns but U has {} rows",
            u.n_raw()
        )));
    }
    let n = u.n_unique();
    let mut zt = DMatrix::<Cplx>::zeros(n, n);
    let mut off = 0usize;
    for b in blocks {
        let nb = b.nrows();
        for i in 0..nb {
            let (ci, si) = u.row(off + i);
            for j in 0..nb {
                let (cj, sj) = u.row(off + j);
                zt[(ci, cj)] += b[(i, j)] * Complex64::from(si * sj);
            }
        }
        off += nb;
    }
    Ok(zt)
}

/// Reduce the block-diagonal cell system onto the box unknowns:
/// Z̃ = UᵀZU partitioned by [eq; int], then Z_eq − Z_ei Z_ii⁻¹ Z_ie.
pub fn schur_reduce(
    blocks: &[DMatrix<Cplx>],
    u: &IncidenceMatrix,
    freq_hz: f64,
    mesh_hash: u64,
) -> Result<Macromodel> {
    let (n_eq, n_int) = (u.n_eq(), u.n_int());
    let zt = fold_blocks(blocks, u)?;
    let z_ee = zt.view((0, 0), (n_eq, n_eq)).into_owned();
    if n_int == 0 {
        return Ok(Macromodel {
            z_eq: z_ee,
            freq_hz,
            mesh_hash,
            recovery: Some(DMatrix::zeros(0, n_eq)),
        });
    }
    let z_ei = zt.view((0, n_eq), (n_eq, n_int)).into_owned();
    let z_ie = zt.view((n_eq, 0), (n_int, n_eq)).into_owned();
    let z_ii = zt.view((n_eq, n_eq), (n_int, n_int)).into_owned();
    let lu = z_ii.lu();
    // Cheap condition estimate from the LU diagonal.
    let diag = lu.u();
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for i in 0..n_int {
        let d = diag[(i, i)].norm();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    if !(dmin > 0.0) || dmax / dmin > COND_LIMIT {
        return Err(Error::Reduction(format!(
            "interior block ill-conditioned (pivot ratio {:.3e})",
            dmax / dmin
        )));
    }
    let y = lu
        .solve(&z_ie)
        .ok_or_else(|| Error::Reduction("interior block is singular".into()))?;
    let z_eq = z_ee - &z_ei * &y;
    Ok(Macromodel { z_eq, freq_hz, mesh_hash, recovery: Some(-y) })
}

impl Macromodel {
    /// Interior coefficients implied by a box solution.
    pub fn recover_interior(&self, x_eq: &DVector<Cplx>) -> Result<DVector<Cplx>> {
        let rec = self
            .recovery
            .as_ref()
            .ok_or_else(|| Error::Reduction("interior-recovery factors not retained".into()))?;
        if x_eq.len() != rec.ncols() {
            return Err(Error::Reduction(format!(
                "x_eq has {} entries, expected {}",
                x_eq.len(),
                rec.ncols()
            )));
        }
        Ok(rec * x_eq)
    }
}

const CACHE_MAGIC: &[u8; 4] = b"EMMC";
const CACHE_VERSION: u32 = 2;

/// Serialize a macromodel: header (magic, version, mesh hash, frequency,
/// dimensions) followed by row-major little-endian complex doubles for the
/// reduced matrix and, if retained, the recovery matrix.
pub fn write_macromodel<W: IoWrite>(mut w: W, m: &Macromodel) -> Result<()> {
    let io = |e: std::io::Error| Error::Cache(e.to_string());
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&m.mesh_hash.to_le_bytes()).map_err(io)?;
    w.write_all(&m.freq_hz.to_le_bytes()).map_err(io)?;
    let n = m.z_eq.nrows() as u64;
    let nrec = m.recovery.as_ref().map_or(0, |r| r.nrows()) as u64;
    w.write_all(&n.to_le_bytes()).map_err(io)?;
    w.write_all(&nrec.to_le_bytes()).map_err(io)?;
    let mut dump = |mat: &DMatrix<Cplx>| -> Result<()> {
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                w.write_all(&mat[(i, j)].re.to_le_bytes()).map_err(io)?;
                w.write_all(&mat[(i, j)].im.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    };
    dump(&m.z_eq)?;
    if let Some(rec) = &m.recovery {
        dump(rec)?;
    }
    Ok(())
}

/// Read a macromodel written by [`write_macromodel`].
pub fn read_macromodel<R: IoRead>(mut r: R) -> Result<Macromodel> {
    let io = |e: std::io::Error| Error::Cache(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Cache("not a macromodel cache file".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    if u32::from_le_bytes(b4) != CACHE_VERSION {
        return Err(Error::Cache("unsupported macromodel cache version".into()));
    }
    r.read_exact(&mut b8).map_err(io)?;
    let mesh_hash = u64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(io)?;
    let freq_hz = f64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let nrec = u64::from_le_bytes(b8) as usize;
    let mut load = |rows: usize, cols: usize| -> Result<DMatrix<Cplx>> {
        let mut mat = DMatrix::zeros(rows, cols);
        let mut buf = [0u8; 16];
        for i in 0..rows {
            for j in 0..cols {
                r.read_exact(&mut buf).map_err(io)?;
                let re = f64::from_le_bytes(buf[0..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(buf[8..16].try_into().expect("8 bytes"));
                mat[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(mat)
    };
    let z_eq = load(n, n)?;
    let recovery = if nrec > 0 { Some(load(nrec, n)?) } else { None };
    Ok(Macromodel { z_eq, freq_hz, mesh_hash, recovery })
}

/// Cache file name for a template at a frequency.
pub fn cache_file_name(template_id: &str, freq_hz: f64, mesh_hash: u64) -> String {
    format!("{template_id}-{freq_hz:.6e}-{mesh_hash:016x}.emmc")
}

/// Load a cached macromodel if present and consistent, else build and store.
pub fn cached_macromodel<F>(
    cache_dir: Option<&Path>,
    template_id: &str,
    freq_hz: f64,
    mesh_hash: u64,
    build: F,
) -> Result<(Macromodel, bool)>
where
    F: FnOnce() -> Result<Macromodel>,
{
    if let Some(dir) = cache_dir {
        let path = dir.join(cache_file_name(template_id, freq_hz, mesh_hash));
        if path.is_file() {
            let file = std::fs::File::open(&path).map_err(|e| Error::Cache(e.to_string()))?;
            let m = read_macromodel(std::io::BufReader::new(file))?;
            if m.mesh_hash == mesh_hash && m.freq_hz == freq_hz {
                return Ok((m, true));
            }
        }
        let m = build()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::Cache(e.to_string()))?;
        let file = std::fs::File::create(&path).map_err(|e| Error::Cache(e.to_string()))?;
        write_macromodel(std::io::BufWriter::new(file), &m)?;
        Ok((m, false))
    } else {
        Ok((build()?, false))
    }
}

/// Coarse grounded-patch cell fixture shared by in-crate tests.
#[cfg(test)]
pub(crate) fn coarse_cell() -> crate::mesh::UnitCellParams {
    crate::mesh::UnitCellParams {
        width: 13.5e-3,
        layer_heights: vec![0.762e-3, 2.0e-3 - 0.762e-3],
        permittivities: vec![3.66, 1.0],
        patch_width: 5.4e-3,
        mesh_length_patch: 2.7e-3,
        mesh_length_box: 4.5e-3,
        grounded: true,
        rim_grading: 0,
    }
}
