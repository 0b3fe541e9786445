//! Iterative solution of the reduced array system: restarted GMRES with a
//! right preconditioner built from the sparse-LU-factored near-field part of
//! the system matrix.

use std::collections::BTreeMap;
use std::time::Instant;

use faer::complex_native::c64;
use faer::prelude::SpSolver;
use faer::sparse::SparseColMat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{ArrayLayout, OverlapMap};
use crate::error::{Error, Result};
use crate::fftaccel::BlockToeplitzOperator;
use crate::macromodel::{CellDecomposition, Macromodel};
use crate::mesh::{TriMesh, Vec3};
use crate::{Cplx, C0};

/// Near-field cutoff for the preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct PreconditionerSpec {
    /// Radius below which matrix entries are kept, meters.
    pub delta_nf: f64,
}

impl PreconditionerSpec {
    pub fn new(delta_nf: f64) -> Result<Self> {
        if delta_nf > 0.0 && delta_nf.is_finite() {
            Ok(PreconditionerSpec { delta_nf })
        } else {
            Err(Error::Config("near-field radius must be positive".into()))
        }
    }

    /// Default radius lambda0 / 8 at the given frequency.
    pub fn default_for(freq_hz: f64) -> Self {
        PreconditionerSpec { delta_nf: C0 / freq_hz / 8.0 }
    }
}

/// GMRES control parameters.
#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    /// Relative residual tolerance.
    pub tolerance: f64,
    /// Restart length (Krylov subspace dimension per cycle).
    pub restart: usize,
    /// Total iteration budget across restarts.
    pub max_iterations: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { tolerance: 1e-4, restart: 100, max_iterations: 1000 }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config("GMRES tolerance must lie in (0, 1)".into()));
        }
        if self.restart == 0 {
            return Err(Error::Config("GMRES restart length must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("GMRES iteration budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// True (unpreconditioned) relative residual of the returned solution.
    pub residual: f64,
    /// Number of applications of the system operator.
    pub matvecs: usize,
    /// Estimated relative residual after each iteration.
    pub residual_history: Vec<f64>,
    /// Wall time spent in the iteration loop, seconds.
    pub iterate_seconds: f64,
}

/// The reduced array operator A = U_o^T (Z_eq + Z_o) U_o.
///
/// `z_eq` holds one macromodel matrix per cell (entries may repeat for cells
/// sharing a template); `toeplitz` applies the inter-cell coupling.
pub struct ReducedSystem<'a> {
    z_eq: Vec<&'a DMatrix<Cplx>>,
    toeplitz: &'a BlockToeplitzOperator,
    overlap: &'a OverlapMap,
}

impl<'a> ReducedSystem<'a> {
    pub fn new(
        layout: &ArrayLayout,
        macromodels: &'a [Macromodel],
        toeplitz: &'a BlockToeplitzOperator,
        overlap: &'a OverlapMap,
    ) -> Result<Self> {
        let n = toeplitz.local_size();
        let mut z_eq = Vec::with_capacity(layout.cells());
        for m in 0..layout.cells() {
            let t = layout.template(m);
            let z = &macromodels
                .get(t)
                .ok_or_else(|| Error::Layout(format!("cell {m} references missing template {t}")))?
                .z_eq;
            if z.nrows() != n || z.ncols() != n {
                return Err(Error::Layout(format!(
                    "template {t} macromodel is {}x{}, expected {n}x{n}",
                    z.nrows(),
                    z.ncols()
                )));
            }
            z_eq.push(z);
        }
        if overlap.n_raw() != layout.cells() * n {
            return Err(Error::Layout(format!(
                "overlap map covers {} raw unknowns, expected {}",
                overlap.n_raw(),
                layout.cells() * n
            )));
        }
        Ok(ReducedSystem { z_eq, toeplitz, overlap })
    }

    pub fn n_merged(&self) -> usize {
        self.overlap.n_merged()
    }

    pub fn n_raw(&self) -> usize {
        self.overlap.n_raw()
    }

    /// A y = U_o^T (Z_eq + Z_o) U_o y.
    pub fn apply(&self, y: &DVector<Cplx>) -> Result<DVector<Cplx>> {
        let n = self.toeplitz.local_size();
        let x = self.overlap.expand(y);
        let mut v = self.toeplitz.apply(&x)?;
        let blocks: Vec<DVector<Cplx>> = self
            .z_eq
            .par_iter()
            .enumerate()
            .map(|(m, z)| *z * x.rows(m * n, n))
            .collect();
        for (m, b) in blocks.iter().enumerate() {
            v.rows_mut(m * n, n).add_assign(b);
        }
        Ok(self.overlap.reduce(&v))
    }
}

use std::ops::AddAssign;

/// Midpoints of the box unknowns' defining edges, ordered [electric; magnetic]
/// to match the macromodel unknown ordering (cell-local coordinates).
pub fn eq_midpoints(mesh: &TriMesh, decomp: &CellDecomposition) -> Vec<Vec3> {
    let verts = mesh.vertices();
    decomp
        .box_electric
        .functions()
        .iter()
        .chain(decomp.box_magnetic.functions())
        .map(|f| f.edge)
        .chain(decomp.rim.iter().map(|r| r.edge))
        .map(|e| (verts[e.0] + verts[e.1]) * 0.5)
        .collect()
}

/// Sparse-LU-factored near-field preconditioner P = U_o^T (Z_eq^NF + Z_o^NF) U_o.
pub struct NearFieldPreconditioner {
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
    n_merged: usize,
    /// Nonzeros of P before factorization.
    pub nnz: usize,
    /// Wall time spent assembling and factorizing, seconds.
    pub factor_seconds: f64,
}

impl NearFieldPreconditioner {
    /// v -> P^-1 v.
    pub fn apply(&self, v: &DVector<Cplx>) -> DVector<Cplx> {
        let rhs = faer::Mat::from_fn(v.len(), 1, |i, _| c64::new(v[i].re, v[i].im));
        let sol = self.lu.solve(&rhs);
        DVector::from_fn(v.len(), |i, _| Complex64::new(sol.read(i, 0).re, sol.read(i, 0).im))
    }

    pub fn n(&self) -> usize {
        self.n_merged
    }
}

/// Assemble and factorize the near-field preconditioner.
///
/// An entry of the raw (pre-merge) matrix survives iff the distance between
/// the two unknowns' edge midpoints (in array coordinates) is below
/// `spec.delta_nf`; the surviving entries are folded through the overlap map
/// and LU-factorized with a fill-reducing ordering.
pub fn build_preconditioner(
    layout: &ArrayLayout,
    template_mesh: &TriMesh,
    decomp: &CellDecomposition,
    macromodels: &[Macromodel],
    generators: &BTreeMap<(i64, i64), DMatrix<Cplx>>,
    overlap: &OverlapMap,
    spec: &PreconditionerSpec,
) -> Result<NearFieldPreconditioner> {
    let start = Instant::now();
    let n = decomp.eq_len();
    let mids = eq_midpoints(template_mesh, decomp);
    let diameter = {
        let mut d: f64 = 0.0;
        for a in &mids {
            for b in &mids {
                d = d.max((a - b).norm());
            }
        }
        d
    };
    let mut accum: std::collections::HashMap<(usize, usize), Cplx> =
        std::collections::HashMap::new();
    for t in 0..layout.cells() {
        let (tx, ty) = layout.coords(t);
        let ot = layout.origin(t);
        for s in 0..layout.cells() {
            let (sx, sy) = layout.coords(s);
            let os = layout.origin(s);
            // Cells whose boxes cannot contain any near pair are skipped.
            if (os - ot).norm() > spec.delta_nf + diameter {
                continue;
            }
            let gen = &generators[&(sx as i64 - tx as i64, sy as i64 - ty as i64)];
            let z_self = if t == s {
                Some(&macromodels[layout.template(t)].z_eq)
            } else {
                None
            };
            for i in 0..n {
                let pi = mids[i] + ot;
                let (ri, si_) = overlap.row(t * n + i);
                for j in 0..n {
                    if (pi - (mids[j] + os)).norm() >= spec.delta_nf {
                        continue;
                    }
                    let mut val = gen[(i, j)];
                    if let Some(z) = z_self {
                        val += z[(i, j)];
                    }
                    if val != Complex64::ZERO {
                        let (rj, sj) = overlap.row(s * n + j);
                        *accum.entry((ri, rj)).or_insert(Complex64::ZERO) +=
                            val * Complex64::from(si_ * sj);
                    }
                }
            }
        }
    }
    let n_merged = overlap.n_merged();
    let mut triplets: Vec<(usize, usize, c64)> = accum
        .into_iter()
        .map(|((r, c), v)| (r, c, c64::new(v.re, v.im)))
        .collect();
    triplets.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let nnz = triplets.len();
    let mat = SparseColMat::<usize, c64>::try_new_from_triplets(n_merged, n_merged, &triplets)
        .map_err(|e| Error::Factorization(format!("near-field matrix assembly failed: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| {
        Error::Factorization(format!(
            "near-field matrix is singular or ill-conditioned ({e:?}); try a larger near-field radius"
        ))
    })?;
    Ok(NearFieldPreconditioner { lu, n_merged, nnz, factor_seconds: start.elapsed().as_secs_f64() })
}

/// Restarted, right-preconditioned GMRES.
///
/// Solves A x = b where `apply_a` is the (unpreconditioned) operator and
/// `apply_m_inv` applies the preconditioner inverse. Pass the identity closure
/// for an unpreconditioned solve. Convergence is accepted only when the true
/// residual ||b - A x|| / ||b|| meets the tolerance.
pub fn gmres_solve<A, M>(
    apply_a: A,
    apply_m_inv: M,
    b: &DVector<Cplx>,
    cfg: &GmresConfig,
) -> Result<(DVector<Cplx>, SolveReport)>
where
    A: Fn(&DVector<Cplx>) -> Result<DVector<Cplx>>,
    M: Fn(&DVector<Cplx>) -> DVector<Cplx>,
{
    cfg.validate()?;
    let start = Instant::now();
    let dim = b.len();
    let bnorm = b.norm();
    let mut report = SolveReport::default();
    if bnorm == 0.0 {
        report.iterate_seconds = start.elapsed().as_secs_f64();
        return Ok((DVector::zeros(dim), report));
    }
    let mut x: DVector<Cplx> = DVector::zeros(dim);
    loop {
        let r = b - apply_a(&x)?;
        report.matvecs += 1;
        let beta = r.norm();
        let rel = beta / bnorm;
        if rel <= cfg.tolerance {
            report.residual = rel;
            report.iterate_seconds = start.elapsed().as_secs_f64();
            return Ok((x, report));
        }
        if report.iterations >= cfg.max_iterations {
            return Err(Error::NonConvergence { residual: rel, iterations: report.iterations });
        }
        // Arnoldi with modified Gram-Schmidt and Givens rotations.
        let m = cfg.restart.min(cfg.max_iterations - report.iterations);
        let mut v: Vec<DVector<Cplx>> = vec![&r / Complex64::from(beta)];
        let mut h = DMatrix::<Cplx>::zeros(m + 1, m);
        let mut cs: Vec<Cplx> = Vec::with_capacity(m);
        let mut sn: Vec<Cplx> = Vec::with_capacity(m);
        let mut g = DVector::<Cplx>::zeros(m + 1);
        g[0] = Complex64::from(beta);
        let mut k = 0;
        while k < m {
            let mut w = apply_a(&apply_m_inv(&v[k]))?;
            report.matvecs += 1;
            for i in 0..=k {
                let hik = v[i].dotc(&w);
                h[(i, k)] = hik;
                w.axpy(-hik, &v[i], Complex64::from(1.0));
            }
            let hnext = Complex64::from(w.norm());
            h[(k + 1, k)] = hnext;
            // Apply accumulated rotations to the new column.
            for i in 0..k {
                let t = cs[i].conj() * h[(i, k)] + sn[i].conj() * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            cs.push(c);
            sn.push(s);
            h[(k, k)] = c.conj() * h[(k, k)] + s.conj() * h[(k + 1, k)];
            h[(k + 1, k)] = Complex64::ZERO;
            g[k + 1] = -s * g[k];
            g[k] = c.conj() * g[k];
            report.iterations += 1;
            let est = g[k + 1].norm() / bnorm;
            report.residual_history.push(est);
            k += 1;
            if est <= cfg.tolerance || report.iterations >= cfg.max_iterations {
                break;
            }
            if hnext.norm() < f64::EPSILON * bnorm {
                break; // happy breakdown: exact solution in the current space
            }
            v.push(&w / hnext);
        }
        // Back-substitute and update x += M^-1 (V y).
        let mut y = DVector::<Cplx>::zeros(k);
        for i in (0..k).rev() {
            let mut t = g[i];
            for j in i + 1..k {
                t -= h[(i, j)] * y[j];
            }
            y[i] = t / h[(i, i)];
        }
        let mut u = DVector::<Cplx>::zeros(dim);
        for i in 0..k {
            u.axpy(y[i], &v[i], Complex64::from(1.0));
        }
        x += apply_m_inv(&u);
        // The restart loop recomputes the true residual, so the convergence
        // decision never relies on the rotation estimate alone.
    }
}

/// Givens rotation zeroing b against a: returns (c, s) with
/// c.conj()*a + s.conj()*b = r, -s*a + c*b = 0.
fn givens(a: Cplx, b: Cplx) -> (Cplx, Cplx) {
    if b == Complex64::ZERO {
        return (Complex64::from(1.0), Complex64::ZERO);
    }
    if a == Complex64::ZERO {
        return (Complex64::ZERO, Complex64::from(1.0));
    }
    let denom = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = Complex64::from(a.norm() / denom);
    let s = (a / Complex64::from(a.norm())).conj() * b.conj() / Complex64::from(denom);
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vector(len: usize, seed: u64) -> DVector<Cplx> {
        let mut rng = seed;
        let mut rand = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng as f64 / u64::MAX as f64) - 0.5
        };
        DVector::from_fn(len, |_, _| Complex64::new(rand(), rand()))
    }

    fn identity_precond(v: &DVector<Cplx>) -> DVector<Cplx> {
        v.clone()
    }

    #[test]
    fn identity_operator_converges_in_one_iteration() {
        let b = random_vector(20, 3);
        let (x, rep) =
            gmres_solve(|v| Ok(v.clone()), identity_precond, &b, &GmresConfig::default()).unwrap();
        assert!((x - &b).norm() < 1e-12 * b.norm());
        assert_eq!(rep.iterations, 1);
        assert!(rep.residual <= 1e-4);
    }

    #[test]
    fn diagonal_operator_matches_closed_form() {
        let n = 30;
        let d: Vec<Cplx> =
            (0..n).map(|i| Complex64::new(1.0 + i as f64, 0.3 * (i as f64).sin())).collect();
        let b = random_vector(n, 17);
        let cfg = GmresConfig { tolerance: 1e-10, ..Default::default() };
        let (x, rep) = gmres_solve(
            |v| Ok(DVector::from_fn(n, |i, _| d[i] * v[i])),
            identity_precond,
            &b,
            &cfg,
        )
        .unwrap();
        let exact = DVector::from_fn(n, |i, _| b[i] / d[i]);
        assert!((x - &exact).norm() < 1e-8 * exact.norm());
        assert!(rep.residual <= 1e-10);
    }

    #[test]
    fn dense_random_system_with_restarts() {
        let n = 40;
        let mut a = DMatrix::<Cplx>::identity(n, n) * Complex64::from(4.0);
        let r = random_vector(n * n, 23);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += r[i * n + j] * Complex64::from(0.5);
            }
        }
        let b = random_vector(n, 5);
        let cfg = GmresConfig { tolerance: 1e-8, restart: 10, max_iterations: 400 };
        let (x, rep) = gmres_solve(|v| Ok(&a * v), identity_precond, &b, &cfg).unwrap();
        let true_res = (&b - &a * &x).norm() / b.norm();
        assert!(true_res <= 1e-8, "true residual {true_res}");
        assert!(rep.iterations > 10, "restart cycles expected");
    }

    #[test]
    fn exact_right_preconditioner_gives_one_iteration() {
        let n = 25;
        let mut a = DMatrix::<Cplx>::zeros(n, n);
        let r = random_vector(n * n, 41);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = r[i * n + j] + if i == j { Complex64::from(5.0) } else { Complex64::ZERO };
            }
        }
        let ainv = a.clone().lu().try_inverse().unwrap();
        let b = random_vector(n, 77);
        let (x, rep) =
            gmres_solve(|v| Ok(&a * v), |v| &ainv * v, &b, &GmresConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        let true_res = (&b - &a * &x).norm() / b.norm();
        assert!(true_res <= 1e-4);
    }

    #[test]
    fn solves_are_deterministic() {
        let n = 35;
        let mut a = DMatrix::<Cplx>::identity(n, n) * Complex64::from(3.0);
        let r = random_vector(n * n, 9);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += r[i * n + j];
            }
        }
        let b = random_vector(n, 2);
        let cfg = GmresConfig { tolerance: 1e-9, restart: 12, max_iterations: 500 };
        let (x1, rep1) = gmres_solve(|v| Ok(&a * v), identity_precond, &b, &cfg).unwrap();
        let (x2, rep2) = gmres_solve(|v| Ok(&a * v), identity_precond, &b, &cfg).unwrap();
        assert_eq!(rep1.iterations, rep2.iterations);
        assert_eq!(rep1.residual_history, rep2.residual_history);
        assert_eq!(x1.as_slice(), x2.as_slice());
    }

    #[test]
    fn nonconvergence_is_reported() {
        // A rotation-like indefinite operator that GMRES cannot resolve in
        // the allotted two iterations.
        let n = 50;
        let a = DMatrix::<Cplx>::from_fn(n, n, |i, j| {
            if (i + 1) % n == j {
                Complex64::from(1.0)
            } else {
                Complex64::ZERO
            }
        });
        let b = random_vector(n, 11);
        let cfg = GmresConfig { tolerance: 1e-12, restart: 2, max_iterations: 2 };
        match gmres_solve(|v| Ok(&a * v), identity_precond, &b, &cfg) {
            Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        assert!(GmresConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(GmresConfig { tolerance: 1.5, ..Default::default() }.validate().is_err());
        assert!(GmresConfig { restart: 0, ..Default::default() }.validate().is_err());
        assert!(PreconditionerSpec::new(-1.0).is_err());
        let spec = PreconditionerSpec::default_for(10e9);
        assert!((spec.delta_nf - C0 / 10e9 / 8.0).abs() < 1e-15);
    }
}
