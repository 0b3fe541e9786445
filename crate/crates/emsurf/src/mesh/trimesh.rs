use std::collections::HashMap;
use std::fmt::Write as _;

use super::Vec3;
use crate::error::{Error, Result};

/// Which homogeneous region a triangle side faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionRef {
    Interior(u32),
    Exterior,
}

impl RegionRef {
    fn parse(tok: &str, line: usize) -> Result<Self> {
        if tok == "E" {
            Ok(RegionRef::Exterior)
        } else {
            tok.parse::<u32>().map(RegionRef::Interior).map_err(|_| Error::MeshParse {
                line,
                msg: format!("invalid region token '{tok}' (expected integer or 'E')"),
            })
        }
    }
}

impl std::fmt::Display for RegionRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegionRef::Interior(v) => write!(f, "{v}"),
            RegionRef::Exterior => write!(f, "E"),
        }
    }
}

/// Identifier of a fictitious box face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceId {
    XNeg,
    XPos,
    YNeg,
    YPos,
    Bottom,
    Top,
}

impl FaceId {
    pub const ALL: [FaceId; 6] =
        [FaceId::XNeg, FaceId::XPos, FaceId::YNeg, FaceId::YPos, FaceId::Bottom, FaceId::Top];

    pub fn index(self) -> usize {
        match self {
            FaceId::XNeg => 0,
            FaceId::XPos => 1,
            FaceId::YNeg => 2,
            FaceId::YPos => 3,
            FaceId::Bottom => 4,
            FaceId::Top => 5,
        }
    }

    fn from_index(i: usize, line: usize) -> Result<Self> {
        FaceId::ALL.get(i).copied().ok_or_else(|| Error::MeshParse {
            line,
            msg: format!("invalid face id {i} (expected 0..5)"),
        })
    }
}

/// Surface classification of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceTag {
    /// PEC sheet strictly inside the cell (e.g. a patch).
    Pec,
    /// Interface between two dielectric regions.
    Dielectric,
    /// Part of the fictitious enclosing surface.
    Fictitious(FaceId),
    /// PEC ground plane coincident with the bottom of the fictitious surface.
    Ground,
}

/// A triangle with tags and the regions its two sides face.
///
/// `front` is the region the right-hand-winding normal points into.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v: [usize; 3],
    pub tag: SurfaceTag,
    pub front: RegionRef,
    pub back: RegionRef,
}

/// Immutable triangulated surface mesh with tagged subsurfaces.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<Triangle>,
}

impl TriMesh {
    /// Build a mesh and run all invariant checks.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<Triangle>) -> Result<Self> {
        let mesh = TriMesh { vertices, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn vertex(&self, i: usize) -> Vec3 {
        self.vertices[i]
    }

    pub fn tri_vertices(&self, t: usize) -> [Vec3; 3] {
        let tri = &self.triangles[t];
        [self.vertices[tri.v[0]], self.vertices[tri.v[1]], self.vertices[tri.v[2]]]
    }

    pub fn tri_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.tri_vertices(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_vertices(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn tri_centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.tri_vertices(t);
        (a + b + c) / 3.0
    }

    /// Translate the whole mesh rigidly.
    pub fn translated(&self, t: Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Indices of triangles bounding the given region (either side).
    pub fn region_triangles(&self, region: RegionRef) -> Vec<usize> {
        self.triangles
            .iter()
            .enumerate()
            .filter(|(_, t)| t.front == region || t.back == region)
            .map(|(i, _)| i)
            .collect()
    }

    /// Interior region ids present in the mesh, sorted.
    pub fn interior_regions(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .triangles
            .iter()
            .flat_map(|t| [t.front, t.back])
            .filter_map(|r| match r {
                RegionRef::Interior(v) => Some(v),
                RegionRef::Exterior => None,
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Stable content hash of the mesh (coordinates, connectivity, tags).
    pub fn content_hash(&self) -> u64 {
        // FNV-1a over the raw bytes; good enough for cache keys.
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for v in &self.vertices {
            for c in [v.x, v.y, v.z] {
                eat(&c.to_bits().to_le_bytes());
            }
        }
        for t in &self.triangles {
            for i in t.v {
                eat(&(i as u64).to_le_bytes());
            }
            eat(format!("{:?}{:?}{:?}", t.tag, t.front, t.back).as_bytes());
        }
        h
    }

    fn validate(&self) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::MeshInvalid(format!("vertex {i} has non-finite coordinates")));
            }
        }
        for (i, t) in self.triangles.iter().enumerate() {
            for &vi in &t.v {
                if vi >= self.vertices.len() {
                    return Err(Error::MeshInvalid(format!(
                        "triangle {i} references vertex {vi} but mesh has {} vertices",
                        self.vertices.len()
                    )));
                }
            }
            if t.v[0] == t.v[1] || t.v[1] == t.v[2] || t.v[0] == t.v[2] {
                return Err(Error::MeshInvalid(format!("triangle {i} has repeated vertices")));
            }
            if self.tri_area(i) <= 0.0 {
                return Err(Error::MeshInvalid(format!("triangle {i} has non-positive area")));
            }
        }
        // Each sheet (same tag kind and region pair) must be edge-manifold:
        // no edge shared by three or more triangles of the same sheet.
        let mut edge_count: HashMap<(SheetKey, (usize, usize)), usize> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            let key = SheetKey::of(t);
            for e in 0..3 {
                let (a, b) = (t.v[e], t.v[(e + 1) % 3]);
                let edge = (a.min(b), a.max(b));
                let c = edge_count.entry((key, edge)).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(Error::MeshInvalid(format!(
                        "edge ({},{}) of triangle {i} is shared by more than two triangles of the same tagged surface",
                        edge.0, edge.1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sheets are identified by tag kind plus the unordered region pair, so a PEC
/// patch embedded in a dielectric interface counts as the same sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct SheetKey {
    fict_face: Option<FaceId>,
    regions: (RegionRef, RegionRef),
}

impl SheetKey {
    fn of(t: &Triangle) -> Self {
        let (a, b) = order_regions(t.front, t.back);
        let fict_face = match t.tag {
            SurfaceTag::Fictitious(f) => Some(f),
            _ => None,
        };
        SheetKey { fict_face, regions: (a, b) }
    }
}

fn order_regions(a: RegionRef, b: RegionRef) -> (RegionRef, RegionRef) {
    let rank = |r: RegionRef| match r {
        RegionRef::Exterior => u64::MAX,
        RegionRef::Interior(v) => v as u64,
    };
    if rank(a) <= rank(b) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Parse the plain-text mesh format.
///
/// Header `emesh 1`, then `v x y z` per vertex (meters) and
/// `t i j k TAG args` per triangle with 0-based vertex indices. Tags:
/// `PEC front back`, `DIEL front back`, `FICT face front back`,
/// `GND front back`, where regions are integers or `E` for the exterior.
pub fn load_mesh(text: &str) -> Result<TriMesh> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .by_ref()
        .map(|(n, l)| (n, l.trim()))
        .find(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match header {
        Some((_, "emesh 1")) => {}
        Some((n, other)) => {
            return Err(Error::MeshParse {
                line: n + 1,
                msg: format!("expected header 'emesh 1', found '{other}'"),
            })
        }
        None => return Err(Error::MeshParse { line: 1, msg: "empty mesh file".into() }),
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in lines {
        let line = n + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "v" => {
                if toks.len() != 4 {
                    return Err(Error::MeshParse { line, msg: "vertex line needs 3 coordinates".into() });
                }
                let mut c = [0.0f64; 3];
                for (k, t) in toks[1..].iter().enumerate() {
                    c[k] = t.parse().map_err(|_| Error::MeshParse {
                        line,
                        msg: format!("invalid coordinate '{t}'"),
                    })?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            "t" => {
                if toks.len() < 5 {
                    return Err(Error::MeshParse { line, msg: "triangle line too short".into() });
                }
                let mut v = [0usize; 3];
                for (k, t) in toks[1..4].iter().enumerate() {
                    v[k] = t.parse().map_err(|_| Error::MeshParse {
                        line,
                        msg: format!("invalid vertex index '{t}'"),
                    })?;
                }
                let (tag, front, back) = match toks[4] {
                    "PEC" | "DIEL" | "GND" => {
                        if toks.len() != 7 {
                            return Err(Error::MeshParse {
                                line,
                                msg: format!("tag {} needs front and back regions", toks[4]),
                            });
                        }
                        let tag = match toks[4] {
                            "PEC" => SurfaceTag::Pec,
                            "DIEL" => SurfaceTag::Dielectric,
                            _ => SurfaceTag::Ground,
                        };
                        (tag, RegionRef::parse(toks[5], line)?, RegionRef::parse(toks[6], line)?)
                    }
                    "FICT" => {
                        if toks.len() != 8 {
                            return Err(Error::MeshParse {
                                line,
                                msg: "tag FICT needs face id, front and back regions".into(),
                            });
                        }
                        let fi: usize = toks[5].parse().map_err(|_| Error::MeshParse {
                            line,
                            msg: format!("invalid face id '{}'", toks[5]),
                        })?;
                        (
                            SurfaceTag::Fictitious(FaceId::from_index(fi, line)?),
                            RegionRef::parse(toks[6], line)?,
                            RegionRef::parse(toks[7], line)?,
                        )
                    }
                    other => {
                        return Err(Error::MeshParse { line, msg: format!("unknown tag '{other}'") })
                    }
                };
                triangles.push(Triangle { v, tag, front, back });
            }
            other => {
                return Err(Error::MeshParse { line, msg: format!("unknown record '{other}'") })
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Serialize a mesh in the plain-text format accepted by [`load_mesh`].
pub fn write_mesh(mesh: &TriMesh) -> String {
    let mut s = String::from("emesh 1\n");
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = match t.tag {
            SurfaceTag::Pec => {
                writeln!(s, "t {} {} {} PEC {} {}", t.v[0], t.v[1], t.v[2], t.front, t.back)
            }
            SurfaceTag::Dielectric => {
                writeln!(s, "t {} {} {} DIEL {} {}", t.v[0], t.v[1], t.v[2], t.front, t.back)
            }
            SurfaceTag::Ground => {
                writeln!(s, "t {} {} {} GND {} {}", t.v[0], t.v[1], t.v[2], t.front, t.back)
            }
            SurfaceTag::Fictitious(f) => writeln!(
                s,
                "t {} {} {} FICT {} {} {}",
                t.v[0],
                t.v[1],
                t.v[2],
                f.index(),
                t.front,
                t.back
            ),
        };
    }
    s
}

/// Mapping from MSH physical tags to surface tags.
///
/// Values reuse the triangle-tag syntax of the plain-text format, e.g.
/// `"PEC 0 1"` or `"FICT 5 E 0"`.
pub type MshTagTable = HashMap<i32, String>;

/// Import an ASCII MSH v2.2 surface mesh.
///
/// Only 3-node triangle elements (type 2) are read; the first element tag
/// (the physical tag) selects the surface tag through `table`.
pub fn load_msh(text: &str, table: &MshTagTable) -> Result<TriMesh> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0usize;
    let mut node_ids: HashMap<u64, usize> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<Triangle> = Vec::new();

    while i < lines.len() {
        let l = lines[i].trim();
        match l {
            "$MeshFormat" => {
                let ver = lines.get(i + 1).map(|s| s.trim()).unwrap_or("");
                if !ver.starts_with("2.2") {
                    return Err(Error::MeshParse {
                        line: i + 2,
                        msg: format!("unsupported MSH version '{ver}' (need 2.2 ASCII)"),
                    });
                }
                i += 1;
            }
            "$Nodes" => {
                let n: usize = lines[i + 1].trim().parse().map_err(|_| Error::MeshParse {
                    line: i + 2,
                    msg: "invalid node count".into(),
                })?;
                for k in 0..n {
                    let ln = i + 2 + k;
                    let toks: Vec<&str> = lines[ln].split_whitespace().collect();
                    if toks.len() < 4 {
                        return Err(Error::MeshParse { line: ln + 1, msg: "short node line".into() });
                    }
                    let id: u64 = toks[0].parse().map_err(|_| Error::MeshParse {
                        line: ln + 1,
                        msg: "invalid node id".into(),
                    })?;
                    let xyz: Vec<f64> = toks[1..4]
                        .iter()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::MeshParse {
                            line: ln + 1,
                            msg: "invalid node coordinate".into(),
                        })?;
                    node_ids.insert(id, vertices.len());
                    vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                i += 1 + n;
            }
            "$Elements" => {
                let n: usize = lines[i + 1].trim().parse().map_err(|_| Error::MeshParse {
                    line: i + 2,
                    msg: "invalid element count".into(),
                })?;
                for k in 0..n {
                    let ln = i + 2 + k;
                    let toks: Vec<&str> = lines[ln].split_whitespace().collect();
                    if toks.len() < 3 {
                        continue;
                    }
                    let etype: u32 = toks[1].parse().unwrap_or(0);
                    if etype != 2 {
                        continue; // surface triangles only
                    }
                    let ntags: usize = toks[2].parse().unwrap_or(0);
                    let phys: i32 = if ntags > 0 { toks[3].parse().unwrap_or(0) } else { 0 };
                    let spec = table.get(&phys).ok_or_else(|| Error::MeshParse {
                        line: ln + 1,
                        msg: format!("physical tag {phys} missing from tag table"),
                    })?;
                    let vidx: Vec<usize> = toks[3 + ntags..3 + ntags + 3]
                        .iter()
                        .map(|t| {
                            let id: u64 = t.parse().map_err(|_| Error::MeshParse {
                                line: ln + 1,
                                msg: "invalid element node id".into(),
                            })?;
                            node_ids.get(&id).copied().ok_or(Error::MeshParse {
                                line: ln + 1,
                                msg: format!("unknown node id {id}"),
                            })
                        })
                        .collect::<Result<_>>()?;
                    let (tag, front, back) = parse_tag_spec(spec, ln + 1)?;
                    triangles.push(Triangle { v: [vidx[0], vidx[1], vidx[2]], tag, front, back });
                }
                i += 1 + n;
            }
            _ => {}
        }
        i += 1;
    }
    TriMesh::new(vertices, triangles)
}

fn parse_tag_spec(spec: &str, line: usize) -> Result<(SurfaceTag, RegionRef, RegionRef)> {
    let toks: Vec<&str> = spec.split_whitespace().collect();
    match toks.first().copied() {
        Some("PEC") | Some("DIEL") | Some("GND") if toks.len() == 3 => {
            let tag = match toks[0] {
                "PEC" => SurfaceTag::Pec,
                "DIEL" => SurfaceTag::Dielectric,
                _ => SurfaceTag::Ground,
            };
            Ok((tag, RegionRef::parse(toks[1], line)?, RegionRef::parse(toks[2], line)?))
        }
        Some("FICT") if toks.len() == 4 => {
            let fi: usize = toks[1]
                .parse()
                .map_err(|_| Error::MeshParse { line, msg: format!("invalid face id '{}'", toks[1]) })?;
            Ok((
                SurfaceTag::Fictitious(FaceId::from_index(fi, line)?),
                RegionRef::parse(toks[2], line)?,
                RegionRef::parse(toks[3], line)?,
            ))
        }
        _ => Err(Error::MeshParse { line, msg: format!("invalid tag table entry '{spec}'") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle_text() -> &'static str {
        "emesh 1\nv 0 0 0\nv 1e-3 0 0\nv 0 2e-3 0\nt 0 1 2 PEC 0 E\n"
    }

    #[test]
    fn parses_single_triangle() {
        let m = load_mesh(single_triangle_text()).unwrap();
        assert_eq!(m.triangles().len(), 1);
        // area = |cross|/2 = (1e-3 * 2e-3)/2
        let area = m.tri_area(0);
        assert!((area - 1e-6).abs() < 1e-18);
        assert_eq!(m.triangles()[0].tag, SurfaceTag::Pec);
    }

    #[test]
    fn rejects_dangling_vertex_index() {
        let text = "emesh 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nt 0 1 5 PEC 0 E\n";
        let err = load_mesh(text).unwrap_err();
        assert!(matches!(err, Error::MeshInvalid(_)), "{err}");
    }

    #[test]
    fn roundtrip_preserves_mesh() {
        let m = load_mesh(single_triangle_text()).unwrap();
        let m2 = load_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(m.vertices().len(), m2.vertices().len());
        assert_eq!(m.triangles().len(), m2.triangles().len());
        for (a, b) in m.vertices().iter().zip(m2.vertices()) {
            assert!((a - b).norm() < 1e-15);
        }
        for (a, b) in m.triangles().iter().zip(m2.triangles()) {
            assert_eq!(a.v, b.v);
            assert_eq!(a.tag, b.tag);
            assert_eq!(a.front, b.front);
            assert_eq!(a.back, b.back);
        }
        assert_eq!(m.content_hash(), m2.content_hash());
    }

    #[test]
    fn rejects_nonmanifold_sheet() {
        // three triangles of the same sheet sharing one edge
        let text = "emesh 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\n\
                    t 0 1 2 PEC 0 E\nt 0 1 3 PEC 0 E\nt 0 1 4 PEC 0 E\n";
        assert!(load_mesh(text).is_err());
    }

    #[test]
    fn msh_import_maps_tags() {
        let msh = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n$Elements\n1\n1 2 2 7 1 1 2 3\n$EndElements\n";
        let mut table = MshTagTable::new();
        table.insert(7, "PEC 0 E".to_string());
        let m = load_msh(msh, &table).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert_eq!(m.triangles()[0].tag, SurfaceTag::Pec);
        assert_eq!(m.triangles()[0].back, RegionRef::Exterior);
    }
}
