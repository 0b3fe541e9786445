//! Galerkin assembly of the surface integral operators over RWG basis sets.
//!
//! `assemble_l` builds the mixed-potential operator
//!   L[m,n] = Iint G f_m . f_n - (1/k^2) Iint G (div f_m)(div' f_n)
//! and `assemble_k` the principal value of
//!   K[m,n] = Iint f_m(r) . (grad_r G x f_n(r')),
//! both with G = exp(-jkR)/(4 pi R). Self and near pairs of L use analytic
//! extraction of the 1/R singularity; near pairs of K use recursive source
//! subdivision, and coplanar pairs of K vanish identically in principal value.
//!
//! Test and source sides may live on different meshes (e.g. translated unit
//! cells). Assembly is parallel over test triangles and deterministic.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::analytic::{int_grad_r_inv_r, inv_r_moments};
use super::quadrature::QuadratureRule;
use crate::mesh::{RwgBasisSet, TriMesh, Vec3};
use crate::Cplx;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    /// Triangle quadrature points per triangle (1, 3, 6, 7, 12, or 25).
    pub quad_points: usize,
    /// Pairs closer than `near_factor` times the larger max edge (centroid
    /// distance) take the singularity-aware path.
    pub near_factor: f64,
    /// Maximum recursive source-subdivision depth for near K pairs.
    pub max_subdivision: u32,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { quad_points: 6, near_factor: 2.0, max_subdivision: 3 }
    }
}

/// One RWG basis restricted to a single triangle.
struct Attachment {
    basis: usize,
    /// Signed coefficient l/(2A) (+ for the plus half, - for the minus half).
    coeff: f64,
    /// Free vertex opposite the shared edge.
    free: Vec3,
    /// Signed surface divergence +-(l/A).
    div: f64,
}

struct TriData {
    verts: [Vec3; 3],
    centroid: Vec3,
    normal: Vec3,
    max_edge: f64,
    /// Quadrature points with area-scaled weights.
    qpts: Vec<(Vec3, f64)>,
    atts: Vec<Attachment>,
    /// Basis values at each quadrature point, per attachment: f_q[a][p].
    f_q: Vec<Vec<Vec3>>,
}

fn precompute(mesh: &TriMesh, set: &RwgBasisSet, rule: &QuadratureRule) -> Vec<TriData> {
    let mut atts_per_tri: Vec<Vec<Attachment>> =
        (0..mesh.triangles().len()).map(|_| Vec::new()).collect();
    for (b, f) in set.functions().iter().enumerate() {
        for &(tri, plus) in &[(f.tri_plus, true), (f.tri_minus, false)] {
            let area = mesh.tri_area(tri);
            let sign = if plus { 1.0 } else { -1.0 };
            atts_per_tri[tri].push(Attachment {
                basis: b,
                coeff: sign * f.edge_length / (2.0 * area),
                free: mesh.vertex(f.free_vertex(mesh, tri)),
                div: sign * f.edge_length / area,
            });
        }
    }
    atts_per_tri
        .into_iter()
        .enumerate()
        .filter(|(_, a)| !a.is_empty())
        .map(|(t, atts)| {
            let verts = mesh.tri_vertices(t);
            let qpts = rule.points_on(&verts, mesh.tri_area(t));
            let f_q: Vec<Vec<Vec3>> = atts
                .iter()
                .map(|a| qpts.iter().map(|&(p, _)| a.coeff * (p - a.free)).collect())
                .collect();
            let e = [
                (verts[1] - verts[0]).norm(),
                (verts[2] - verts[1]).norm(),
                (verts[0] - verts[2]).norm(),
            ];
            TriData {
                verts,
                centroid: mesh.tri_centroid(t),
                normal: mesh.tri_normal(t),
                max_edge: e[0].max(e[1]).max(e[2]),
                qpts,
                atts,
                f_q,
            }
        })
        .collect()
}

fn green(k: f64, r: f64) -> Cplx {
    let kr = k * r;
    Complex64::new(0.0, -kr).exp() / (FOUR_PI * r)
}

/// (exp(-jkR) - 1)/(4 pi R): the smooth remainder after 1/R extraction.
fn green_smooth(k: f64, r: f64) -> Cplx {
    let kr = k * r;
    if kr < 1e-4 {
        Complex64::new(-k * kr / 2.0, -k + k * kr * kr / 6.0) / FOUR_PI
    } else {
        (Complex64::new(0.0, -kr).exp() - 1.0) / (FOUR_PI * r)
    }
}

fn is_near(a: &TriData, b: &TriData, opts: &AssemblyOptions) -> bool {
    (a.centroid - b.centroid).norm() < opts.near_factor * a.max_edge.max(b.max_edge)
}

/// Euclidean distance from a point to a (filled) triangle.
fn dist_point_tri(p: Vec3, v: &[Vec3; 3]) -> f64 {
    let n = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let nn = n.norm();
    if nn > 0.0 {
        let nhat = n / nn;
        let d = (p - v[0]).dot(&nhat);
        let proj = p - d * nhat;
        // Inside test via edge half-planes.
        let mut inside = true;
        for e in 0..3 {
            let a = v[e];
            let b = v[(e + 1) % 3];
            if (b - a).cross(&(proj - a)).dot(&nhat) < 0.0 {
                inside = false;
                break;
            }
        }
        if inside {
            return d.abs();
        }
    }
    let mut best = f64::INFINITY;
    for e in 0..3 {
        let a = v[e];
        let b = v[(e + 1) % 3];
        let ab = b - a;
        let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        best = best.min((p - (a + t * ab)).norm());
    }
    best
}

/// Splits the test triangle until each leaf is at least its own size away
/// from the source triangle (or the depth cap is hit); returns leaves.
fn subdivide_outer(verts: [Vec3; 3], src: &[Vec3; 3], depth: u32, max_depth: u32, out: &mut Vec<[Vec3; 3]>) {
    let centroid = (verts[0] + verts[1] + verts[2]) / 3.0;
    let e = [
        (verts[1] - verts[0]).norm(),
        (verts[2] - verts[1]).norm(),
        (verts[0] - verts[2]).norm(),
    ];
    let max_edge = e[0].max(e[1]).max(e[2]);
    if depth >= max_depth || dist_point_tri(centroid, src) > max_edge {
        out.push(verts);
        return;
    }
    let m01 = 0.5 * (verts[0] + verts[1]);
    let m12 = 0.5 * (verts[1] + verts[2]);
    let m20 = 0.5 * (verts[2] + verts[0]);
    for child in [
        [verts[0], m01, m20],
        [m01, verts[1], m12],
        [m20, m12, verts[2]],
        [m01, m12, m20],
    ] {
        subdivide_outer(child, src, depth + 1, max_depth, out);
    }
}

fn scatter(n_t: usize, n_s: usize, blocks: Vec<Vec<(usize, Vec<Cplx>)>>) -> DMatrix<Cplx> {
    let mut m = DMatrix::zeros(n_t, n_s);
    for rows in blocks {
        for (mi, row) in rows {
            for (n, v) in row.iter().enumerate() {
                m[(mi, n)] += v;
            }
        }
    }
    m
}

/// Mixed-potential operator L between two RWG sets.
pub fn assemble_l(
    mesh_t: &TriMesh,
    set_t: &RwgBasisSet,
    mesh_s: &TriMesh,
    set_s: &RwgBasisSet,
    k: f64,
    opts: &AssemblyOptions,
) -> DMatrix<Cplx> {
    let rule = QuadratureRule::new(opts.quad_points).expect("validated quad rule");
    let tds_t = precompute(mesh_t, set_t, &rule);
    let tds_s = precompute(mesh_s, set_s, &rule);
    let n_s = set_s.len();
    let inv_k2 = 1.0 / (k * k);

    let blocks: Vec<Vec<(usize, Vec<Cplx>)>> = tds_t
        .par_iter()
        .map(|tt| {
            let mut rows: Vec<(usize, Vec<Cplx>)> =
                tt.atts.iter().map(|a| (a.basis, vec![Cplx::new(0.0, 0.0); n_s])).collect();
            for ts in &tds_s {
                if is_near(tt, ts, opts) {
                    l_near_pair(tt, ts, k, inv_k2, opts, &rule, &mut rows);
                } else {
                    l_far_pair(tt, ts, k, inv_k2, &mut rows);
                }
            }
            rows
        })
        .collect();
    scatter(set_t.len(), n_s, blocks)
}

fn l_far_pair(
    tt: &TriData,
    ts: &TriData,
    k: f64,
    inv_k2: f64,
    rows: &mut [(usize, Vec<Cplx>)],
) {
    for (pi, &(p, wp)) in tt.qpts.iter().enumerate() {
        for (qi, &(q, wq)) in ts.qpts.iter().enumerate() {
            let g = green(k, (p - q).norm()) * (wp * wq);
            for (ai, at) in tt.atts.iter().enumerate() {
                let fm = tt.f_q[ai][pi];
                let row = &mut rows[ai].1;
                for (aj, asrc) in ts.atts.iter().enumerate() {
                    let fn_ = ts.f_q[aj][qi];
                    row[asrc.basis] += g * (fm.dot(&fn_) - inv_k2 * at.div * asrc.div);
                }
            }
        }
    }
}

fn l_near_pair(
    tt: &TriData,
    ts: &TriData,
    k: f64,
    inv_k2: f64,
    opts: &AssemblyOptions,
    rule: &QuadratureRule,
    rows: &mut [(usize, Vec<Cplx>)],
) {
    // The inner integral is analytic, but it varies steeply where the test
    // triangle approaches the source triangle, so the outer integral is
    // refined adaptively toward the contact region.
    let mut leaves = Vec::new();
    subdivide_outer(tt.verts, &ts.verts, 0, opts.max_subdivision, &mut leaves);
    for leaf in &leaves {
        let area = 0.5 * (leaf[1] - leaf[0]).cross(&(leaf[2] - leaf[0])).norm();
        for (p, wp) in rule.points_on(leaf, area) {
            let (i1, irho, rho) = inv_r_moments(&ts.verts, p);
            // Numeric moments of the smooth remainder over the source triangle.
            let mut a0 = Cplx::new(0.0, 0.0);
            let mut a1 = [Cplx::new(0.0, 0.0); 3];
            for &(q, wq) in &ts.qpts {
                let gs = green_smooth(k, (p - q).norm()) * wq;
                a0 += gs;
                for c in 0..3 {
                    a1[c] += gs * q[c];
                }
            }
            for asrc in &ts.atts {
                // V_n = int G f_n dA' with the 1/R part analytic.
                let analytic_vec = irho + (rho - asrc.free) * i1;
                let mut v_n = [Cplx::new(0.0, 0.0); 3];
                for c in 0..3 {
                    v_n[c] =
                        (a1[c] - a0 * asrc.free[c] + analytic_vec[c] / FOUR_PI) * asrc.coeff;
                }
                // S_n = int G div' f_n dA'.
                let s_n = (a0 + i1 / FOUR_PI) * asrc.div;
                for (ai, at) in tt.atts.iter().enumerate() {
                    let fm = at.coeff * (p - at.free);
                    let dot = fm.x * v_n[0] + fm.y * v_n[1] + fm.z * v_n[2];
                    rows[ai].1[asrc.basis] += wp * (dot - s_n * (inv_k2 * at.div));
                }
            }
        }
    }
}

/// Principal value of the magnetic-field operator K between two RWG sets.
pub fn assemble_k(
    mesh_t: &TriMesh,
    set_t: &RwgBasisSet,
    mesh_s: &TriMesh,
    set_s: &RwgBasisSet,
    k: f64,
    opts: &AssemblyOptions,
) -> DMatrix<Cplx> {
    let rule = QuadratureRule::new(opts.quad_points).expect("validated quad rule");
    let tds_t = precompute(mesh_t, set_t, &rule);
    let tds_s = precompute(mesh_s, set_s, &rule);
    let n_s = set_s.len();

    let blocks: Vec<Vec<(usize, Vec<Cplx>)>> = tds_t
        .par_iter()
        .map(|tt| {
            let mut rows: Vec<(usize, Vec<Cplx>)> =
                tt.atts.iter().map(|a| (a.basis, vec![Cplx::new(0.0, 0.0); n_s])).collect();
            for ts in &tds_s {
                if is_near(tt, ts, opts) {
                    if coplanar(tt, ts) {
                        continue; // exact zero in principal value
                    }
                    k_near_pair(tt, ts, k, opts, &rule, &mut rows);
                } else {
                    k_far_pair(tt, ts, k, &mut rows);
                }
            }
            rows
        })
        .collect();
    scatter(set_t.len(), n_s, blocks)
}

fn coplanar(a: &TriData, b: &TriData) -> bool {
    let scale = a.max_edge.max(b.max_edge);
    a.normal.cross(&b.normal).norm() < 1e-9
        && (b.centroid - a.centroid).dot(&a.normal).abs() < 1e-9 * scale
}

/// grad_r G = c(R) * (r - r') with c = -(1 + jkR) e^{-jkR} / (4 pi R^3).
fn grad_green_coeff(k: f64, r: f64) -> Cplx {
    let kr = k * r;
    -(Complex64::new(1.0, kr)) * Complex64::new(0.0, -kr).exp() / (FOUR_PI * r * r * r)
}

fn k_far_pair(tt: &TriData, ts: &TriData, k: f64, rows: &mut [(usize, Vec<Cplx>)]) {
    for (pi, &(p, wp)) in tt.qpts.iter().enumerate() {
        for (qi, &(q, wq)) in ts.qpts.iter().enumerate() {
            let rv = p - q;
            let c = grad_green_coeff(k, rv.norm()) * (wp * wq);
            for (aj, asrc) in ts.atts.iter().enumerate() {
                let cross = rv.cross(&ts.f_q[aj][qi]);
                for (ai, _) in tt.atts.iter().enumerate() {
                    let fm = tt.f_q[ai][pi];
                    rows[ai].1[asrc.basis] += c * fm.dot(&cross);
                }
            }
        }
    }
}

/// [grad_r G + (r - r')/(4 pi R^3)] / (r - r'): the smooth remainder after
/// extracting the static 1/R^3 part, i.e. [1 - (1 + jkR) e^{-jkR}] / (4 pi R^3).
fn grad_green_smooth_coeff(k: f64, r: f64) -> Cplx {
    let kr = k * r;
    if kr < 1e-2 {
        // 1 - (1 + jx)e^{-jx} = -x^2/2 + j x^3/3 + x^4/8 + O(x^5).
        Complex64::new(-k * k / (2.0 * r) + k * k * k * k * r / 8.0, k * k * k / 3.0) / FOUR_PI
    } else {
        (1.0 - Complex64::new(1.0, kr) * Complex64::new(0.0, -kr).exp()) / (FOUR_PI * r * r * r)
    }
}

fn k_near_pair(
    tt: &TriData,
    ts: &TriData,
    k: f64,
    opts: &AssemblyOptions,
    rule: &QuadratureRule,
    rows: &mut [(usize, Vec<Cplx>)],
) {
    // Inner integral: the static 1/R^3 part in closed form, the smooth
    // remainder by fixed quadrature. The static part varies steeply (and its
    // in-plane part log-divergently) where the test triangle approaches the
    // source, so the outer integral is refined adaptively toward contact.
    let mut leaves = Vec::new();
    subdivide_outer(tt.verts, &ts.verts, 0, opts.max_subdivision, &mut leaves);
    for leaf in &leaves {
        let area = 0.5 * (leaf[1] - leaf[0]).cross(&(leaf[2] - leaf[0])).norm();
        for (p, wp) in rule.points_on(leaf, area) {
            // w_static = int (p - r')/R^3 dA'.
            let w_static = int_grad_r_inv_r(&ts.verts, p);
            // Smooth remainder moments: b0 = int c_sm (p - r') dA',
            // b1 = int c_sm (p - r') x r' dA' (accumulated per source basis
            // below via (p - q) x f_n).
            for asrc in &ts.atts {
                // Static: grad G_s x f_n integrates to
                // -coeff/(4 pi) * w_static x (p - free), because
                // (p - r') x (r' - free) = (p - r') x (p - free).
                let stat = -asrc.coeff / FOUR_PI * w_static.cross(&(p - asrc.free));
                let mut v = [
                    Cplx::new(stat.x, 0.0),
                    Cplx::new(stat.y, 0.0),
                    Cplx::new(stat.z, 0.0),
                ];
                for &(q, wq) in &ts.qpts {
                    let rv = p - q;
                    let c = grad_green_smooth_coeff(k, rv.norm()) * wq;
                    let cr = rv.cross(&(asrc.coeff * (q - asrc.free)));
                    for i in 0..3 {
                        v[i] += c * cr[i];
                    }
                }
                for (ai, at) in tt.atts.iter().enumerate() {
                    let fm = at.coeff * (p - at.free);
                    let dot = v[0] * fm.x + v[1] * fm.y + v[2] * fm.z;
                    rows[ai].1[asrc.basis] += dot * wp;
                }
            }
        }
    }
}

/// Oriented rotated Gram matrix R[m,n] = <f_m, nhat x f_n> over shared
/// triangles, with `orient(tri)` supplying the sign that turns the winding
/// normal into the desired region normal.
pub fn rotated_gram<F: Fn(usize) -> f64>(
    mesh: &TriMesh,
    set_t: &RwgBasisSet,
    set_s: &RwgBasisSet,
    orient: F,
) -> DMatrix<f64> {
    let rule = QuadratureRule::new(6).expect("fixed rule");
    let mut att_t: Vec<Vec<(usize, f64, Vec3)>> = vec![Vec::new(); mesh.triangles().len()];
    let mut att_s: Vec<Vec<(usize, f64, Vec3)>> = vec![Vec::new(); mesh.triangles().len()];
    for (dst, set) in [(&mut att_t, set_t), (&mut att_s, set_s)] {
        for (b, f) in set.functions().iter().enumerate() {
            for &(tri, plus) in &[(f.tri_plus, true), (f.tri_minus, false)] {
                let sign = if plus { 1.0 } else { -1.0 };
                let coeff = sign * f.edge_length / (2.0 * mesh.tri_area(tri));
                dst[tri].push((b, coeff, mesh.vertex(f.free_vertex(mesh, tri))));
            }
        }
    }
    let mut m = DMatrix::zeros(set_t.len(), set_s.len());
    for t in 0..mesh.triangles().len() {
        if att_t[t].is_empty() || att_s[t].is_empty() {
            continue;
        }
        let verts = mesh.tri_vertices(t);
        let nhat = mesh.tri_normal(t) * orient(t);
        for (p, w) in rule.points_on(&verts, mesh.tri_area(t)) {
            for &(bm, cm, pm) in &att_t[t] {
                let fm = cm * (p - pm);
                for &(bn, cn, pn) in &att_s[t] {
                    let fn_ = cn * (p - pn);
                    m[(bm, bn)] += w * fm.dot(&nhat.cross(&fn_));
                }
            }
        }
    }
    m
}

fn quantize(p: Vec3) -> (i64, i64, i64) {
    let q = 1.0 / crate::mesh::GEOM_TOL;
    ((p.x * q).round() as i64, (p.y * q).round() as i64, (p.z * q).round() as i64)
}

/// Rotated Gram matrix R[m,n] = <f_m, nhat x f_n> between two meshes over
/// coincident triangle pairs (same vertex positions within the geometric
/// tolerance). `orient_t` supplies, per TEST-mesh triangle, the sign turning
/// its winding normal into the desired limit-side normal. Non-coincident
/// triangles contribute nothing; with both arguments on the same mesh this
/// reduces to [`rotated_gram`].
pub fn rotated_gram_coincident<F: Fn(usize) -> f64>(
    mesh_t: &TriMesh,
    set_t: &RwgBasisSet,
    mesh_s: &TriMesh,
    set_s: &RwgBasisSet,
    orient_t: F,
) -> DMatrix<f64> {
    let rule = QuadratureRule::new(6).expect("fixed rule");
    // Source attachments keyed by quantized triangle centroid.
    let mut src: std::collections::HashMap<(i64, i64, i64), Vec<(usize, f64, Vec3)>> =
        std::collections::HashMap::new();
    for (b, f) in set_s.functions().iter().enumerate() {
        for &(tri, plus) in &[(f.tri_plus, true), (f.tri_minus, false)] {
            let sign = if plus { 1.0 } else { -1.0 };
            let coeff = sign * f.edge_length / (2.0 * mesh_s.tri_area(tri));
            src.entry(quantize(mesh_s.tri_centroid(tri))).or_default().push((
                b,
                coeff,
                mesh_s.vertex(f.free_vertex(mesh_s, tri)),
            ));
        }
    }
    let mut att_t: Vec<Vec<(usize, f64, Vec3)>> = vec![Vec::new(); mesh_t.triangles().len()];
    for (b, f) in set_t.functions().iter().enumerate() {
        for &(tri, plus) in &[(f.tri_plus, true), (f.tri_minus, false)] {
            let sign = if plus { 1.0 } else { -1.0 };
            let coeff = sign * f.edge_length / (2.0 * mesh_t.tri_area(tri));
            att_t[tri].push((b, coeff, mesh_t.vertex(f.free_vertex(mesh_t, tri))));
        }
    }
    let mut m = DMatrix::zeros(set_t.len(), set_s.len());
    for t in 0..mesh_t.triangles().len() {
        if att_t[t].is_empty() {
            continue;
        }
        let Some(satts) = src.get(&quantize(mesh_t.tri_centroid(t))) else { continue };
        let verts = mesh_t.tri_vertices(t);
        let nhat = mesh_t.tri_normal(t) * orient_t(t);
        for (p, w) in rule.points_on(&verts, mesh_t.tri_area(t)) {
            for &(bm, cm, pm) in &att_t[t] {
                let fm = cm * (p - pm);
                for &(bn, cn, pn) in satts {
                    let fn_ = cn * (p - pn);
                    m[(bm, bn)] += w * fm.dot(&nhat.cross(&fn_));
                }
            }
        }
    }
    m
}

/// One-sided magnetic-field operator for coincident test/source surfaces:
/// principal value plus the jump residue `side_sign * (1/2) <f_m, nhat x f_n>`
/// picked up when the observation limit approaches from the `side_sign` side
/// of the normal supplied by `orient` (+1: from the side `nhat` points into).
pub fn assemble_k_sided<F: Fn(usize) -> f64>(
    mesh: &TriMesh,
    set_t: &RwgBasisSet,
    set_s: &RwgBasisSet,
    k: f64,
    side_sign: f64,
    orient: F,
    opts: &AssemblyOptions,
) -> DMatrix<Cplx> {
    assert!(
        side_sign == 1.0 || side_sign == -1.0,
        "side_sign must declare the observation side (+1 or -1)"
    );
    let mut m = assemble_k(mesh, set_t, mesh, set_s, k, opts);
    let r = rotated_gram(mesh, set_t, set_s, orient);
    for i in 0..set_t.len() {
        for j in 0..set_s.len() {
            m[(i, j)] += Cplx::from(side_sign * 0.5 * r[(i, j)]);
        }
    }
    m
}
