//! End-to-end orchestration: build template geometry, generate (or load
//! cached) macromodels, assemble the array coupling, solve, and export the
//! report and far-field cuts. Also provides the dense monolithic reference
//! solve used by the validation suites.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::array::{
    assemble_coupling_generators, assemble_excitation, build_overlap, coupling_block,
    per_cell_coefficients, validate_dipole_position, verify_congruent_boxes, ArrayLayout,
    DipoleSource, Excitation, PlaneWave,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fftaccel::BlockToeplitzOperator;
use crate::kernels::AssemblyOptions;
use crate::macromodel::{
    assemble_interior_system, build_u, cached_macromodel, decompose, fold_blocks, schur_reduce,
    CellDecomposition, IncidenceMatrix,
};
use crate::mesh::{generate_unit_cell, load_mesh, TriMesh, Vec3};
use crate::oracle::HertzianDipole;
use crate::post::{principal_cut, write_cut_csv, CurrentSheet, FarFieldSample};
use crate::solver::{
    build_preconditioner, gmres_solve, GmresConfig, PreconditionerSpec, ReducedSystem,
};
use crate::{CVec3, Cplx, C0};

/// A template's geometry and bookkeeping, ready for assembly.
pub struct BuiltTemplate {
    pub id: String,
    pub mesh: TriMesh,
    pub decomp: CellDecomposition,
    pub u: IncidenceMatrix,
    pub mesh_hash: u64,
}

/// Build every template's mesh, decomposition, and incidence matrix, and
/// check that all boxes are congruent with template 0.
pub fn build_templates(cfg: &RunConfig) -> Result<Vec<BuiltTemplate>> {
    let mut out = Vec::with_capacity(cfg.templates.len());
    for t in &cfg.templates {
        let mesh = if let Some(path) = &t.mesh_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            load_mesh(&text)?
        } else {
            generate_unit_cell(&t.parametric()?)?.mesh
        };
        let decomp = decompose(&mesh, &t.permittivities)?;
        let u = build_u(&mesh, &decomp)?;
        let mesh_hash = mesh.content_hash();
        out.push(BuiltTemplate { id: t.id.clone(), mesh, decomp, u, mesh_hash });
    }
    for t in &out[1..] {
        verify_congruent_boxes((&out[0].mesh, &out[0].decomp), (&t.mesh, &t.decomp))?;
    }
    Ok(out)
}

/// Concrete excitation built from a config.
pub enum RunExcitation {
    Plane(PlaneWave),
    Dipole(DipoleSource),
}

impl Excitation for RunExcitation {
    fn fields(&self, r: Vec3) -> (CVec3, CVec3) {
        match self {
            RunExcitation::Plane(p) => p.fields(r),
            RunExcitation::Dipole(d) => d.fields(r),
        }
    }
}

/// Build the excitation (dipole placement is validated against the layout).
pub fn build_excitation(
    cfg: &RunConfig,
    layout: &ArrayLayout,
    template_mesh: &TriMesh,
) -> Result<RunExcitation> {
    let k = 2.0 * std::f64::consts::PI * cfg.frequency_hz / C0;
    let e = &cfg.excitation;
    match e.kind.as_str() {
        "plane_wave" => {
            let e0a = e.e0.expect("validated");
            let d = e.direction.expect("validated");
            let e0 = CVec3::new(e0a[0].into(), e0a[1].into(), e0a[2].into());
            Ok(RunExcitation::Plane(PlaneWave::new(e0, Vec3::new(d[0], d[1], d[2]), k)?))
        }
        "dipole" => {
            let m = e.moment.expect("validated");
            let p = e.position.expect("validated");
            let pos = Vec3::new(p[0], p[1], p[2]);
            validate_dipole_position(layout, template_mesh, pos)?;
            Ok(RunExcitation::Dipole(DipoleSource {
                dipole: HertzianDipole {
                    position: pos,
                    moment: CVec3::new(m[0].into(), m[1].into(), m[2].into()),
                },
                k,
            }))
        }
        other => Err(Error::Config(format!("unknown excitation kind '{other}'"))),
    }
}

/// A solved array in raw (cell-major, pre-merge) equivalent-current form.
pub struct Solution {
    pub k0: f64,
    pub layout: ArrayLayout,
    pub template_mesh: TriMesh,
    pub decomp: CellDecomposition,
    /// Merged unknown vector.
    pub y_merged: DVector<Cplx>,
    /// U_o * y_merged: per-cell stacked [box J; box M] coefficients.
    pub y_raw: DVector<Cplx>,
}

impl Solution {
    /// Far-field cut of the scattered field from all equivalent currents.
    pub fn scattered_cut(&self, phi_rad: f64, n_samples: usize) -> Vec<FarFieldSample> {
        let (j_owned, m_owned) = self.owned_sheets();
        let j = borrow_sheets(&j_owned, &self.decomp);
        let m = borrow_sheets(&m_owned, &self.decomp);
        principal_cut(&j, &m, self.k0, phi_rad, n_samples)
    }

    /// Per-cell current sheets over translated copies of the template mesh.
    pub fn owned_sheets(&self) -> (Vec<OwnedSheet>, Vec<OwnedSheet>) {
        let coeffs = per_cell_coefficients(&self.layout, &self.decomp, &self.y_raw);
        let mut j = Vec::new();
        let mut m = Vec::new();
        for (cell, (je, me)) in coeffs.into_iter().enumerate() {
            let mesh = self.template_mesh.translated(self.layout.origin(cell));
            j.push(OwnedSheet { mesh: mesh.clone(), coeffs: je, electric: true });
            m.push(OwnedSheet { mesh, coeffs: me, electric: false });
        }
        (j, m)
    }
}

/// A current sheet owning its translated mesh (helper for post-processing).
pub struct OwnedSheet {
    pub mesh: TriMesh,
    pub coeffs: Vec<Cplx>,
    pub electric: bool,
}

/// Borrow a set of owned sheets as `CurrentSheet`s over the given sets.
pub fn borrow_sheets<'a>(
    owned: &'a [OwnedSheet],
    decomp: &'a CellDecomposition,
) -> Vec<CurrentSheet<'a>> {
    owned
        .iter()
        .map(|s| CurrentSheet {
            mesh: &s.mesh,
            set: if s.electric { &decomp.box_electric } else { &decomp.box_magnetic },
            coeffs: &s.coeffs,
        })
        .collect()
}

/// Phase timings and bookkeeping of a run.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub solved_unknowns: usize,
    pub monolithic_unknowns: usize,
    pub raw_eq_unknowns: usize,
    pub iterations: usize,
    pub residual: f64,
    pub matvecs: usize,
    pub cache_hits: usize,
    pub templates: usize,
    pub macromodel_seconds: f64,
    pub fill_seconds: f64,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
    pub report_text: String,
    pub report_path: Option<PathBuf>,
    pub cut_paths: Vec<PathBuf>,
}

fn assembly_options() -> AssemblyOptions {
    AssemblyOptions::default()
}

/// Solve the configured array with the macromodel + FFT pipeline.
pub fn solve_pipeline(
    cfg: &RunConfig,
    cache_dir: Option<&Path>,
) -> Result<(Solution, RunOutcome)> {
    let opts = assembly_options();
    let templates = build_templates(cfg)?;
    let layout = ArrayLayout::new(
        cfg.layout.period_x,
        cfg.layout.period_y,
        cfg.layout.count_x,
        cfg.layout.count_y,
        cfg.template_map(),
        templates.len(),
    )?;
    let t0 = &templates[0];

    // Macromodel generation (cached per template).
    let t_macro = Instant::now();
    let mut macromodels = Vec::with_capacity(templates.len());
    let mut cache_hits = 0usize;
    for t in &templates {
        let (m, hit) = cached_macromodel(cache_dir, &t.id, cfg.frequency_hz, t.mesh_hash, || {
            let blocks = assemble_interior_system(&t.mesh, &t.decomp, cfg.frequency_hz, &opts)?;
            schur_reduce(&blocks, &t.u, cfg.frequency_hz, t.mesh_hash)
        })?;
        if hit {
            cache_hits += 1;
        }
        macromodels.push(m);
    }
    let macromodel_seconds = t_macro.elapsed().as_secs_f64();

    // Inter-cell coupling generators and the FFT operator.
    let t_fill = Instant::now();
    let generators =
        assemble_coupling_generators(&layout, &t0.mesh, &t0.decomp, cfg.frequency_hz, &opts);
    let (mx, my) = layout.dims();
    let toeplitz = BlockToeplitzOperator::new(generators.clone(), mx, my)?;
    let overlap = build_overlap(&layout, &t0.mesh, &t0.decomp)?;
    let excitation = build_excitation(cfg, &layout, &t0.mesh)?;
    let v_raw = assemble_excitation(&excitation, &layout, &t0.mesh, &t0.decomp);
    let rhs = overlap.reduce(&v_raw);
    let fill_seconds = t_fill.elapsed().as_secs_f64();

    // Near-field preconditioner.
    let spec = match cfg.solver.delta_nf {
        Some(d) => PreconditionerSpec::new(d)?,
        None => PreconditionerSpec::default_for(cfg.frequency_hz),
    };
    let precond = build_preconditioner(
        &layout, &t0.mesh, &t0.decomp, &macromodels, &generators, &overlap, &spec,
    )?;

    // Iterative solve.
    let system = ReducedSystem::new(&layout, &macromodels, &toeplitz, &overlap)?;
    let gcfg = GmresConfig {
        tolerance: cfg.solver.tolerance,
        restart: cfg.solver.restart,
        max_iterations: cfg.solver.max_iterations,
    };
    let (y, rep) = gmres_solve(|v| system.apply(v), |v| precond.apply(v), &rhs, &gcfg)?;

    let k0 = 2.0 * std::f64::consts::PI * cfg.frequency_hz / C0;
    let interior: usize = (0..layout.cells()).map(|m| templates[layout.template(m)].u.n_int()).sum();
    let outcome = RunOutcome {
        solved_unknowns: overlap.n_merged(),
        monolithic_unknowns: overlap.n_merged() + interior,
        raw_eq_unknowns: overlap.n_raw(),
        iterations: rep.iterations,
        residual: rep.residual,
        matvecs: rep.matvecs,
        cache_hits,
        templates: templates.len(),
        macromodel_seconds,
        fill_seconds,
        factor_seconds: precond.factor_seconds,
        solve_seconds: rep.iterate_seconds,
        ..Default::default()
    };
    let y_raw = overlap.expand(&y);
    let solution = Solution {
        k0,
        layout,
        template_mesh: t0.mesh.clone(),
        decomp: t0.decomp.clone(),
        y_merged: y,
        y_raw,
    };
    Ok((solution, outcome))
}

/// Dense monolithic PMCHWT reference: all per-cell unknowns kept (no Schur
/// complement), all coupling blocks assembled directly pair by pair, merged
/// duplicated wall unknowns, one dense LU solve. Validation oracle only.
pub fn monolithic_reference(cfg: &RunConfig) -> Result<Solution> {
    let opts = assembly_options();
    let templates = build_templates(cfg)?;
    let layout = ArrayLayout::new(
        cfg.layout.period_x,
        cfg.layout.period_y,
        cfg.layout.count_x,
        cfg.layout.count_y,
        cfg.template_map(),
        templates.len(),
    )?;
    let t0 = &templates[0];
    let n_eq = t0.decomp.eq_len();
    let overlap = build_overlap(&layout, &t0.mesh, &t0.decomp)?;
    let cells = layout.cells();

    // Per-cell folded interior systems (unique [eq; int] unknowns).
    let mut folded: Vec<DMatrix<Cplx>> = Vec::with_capacity(templates.len());
    for t in &templates {
        let blocks = assemble_interior_system(&t.mesh, &t.decomp, cfg.frequency_hz, &opts)?;
        folded.push(fold_blocks(&blocks, &t.u)?);
    }

    // Global merged index map: merged eq unknowns first, then each cell's
    // interior unknowns in cell order.
    let mut int_offset = vec![0usize; cells];
    let mut next = overlap.n_merged();
    for m in 0..cells {
        int_offset[m] = next;
        next += templates[layout.template(m)].u.n_int();
    }
    let total = next;
    let map = |cell: usize, local: usize| -> (usize, f64) {
        if local < n_eq {
            let (c, s) = overlap.row(cell * n_eq + local);
            (c, s)
        } else {
            (int_offset[cell] + (local - n_eq), 1.0)
        }
    };

    let mut a = DMatrix::<Cplx>::zeros(total, total);
    // Cell-diagonal interior systems.
    for m in 0..cells {
        let f = &folded[layout.template(m)];
        let nu = f.nrows();
        for i in 0..nu {
            let (ri, si) = map(m, i);
            for j in 0..nu {
                let (rj, sj) = map(m, j);
                a[(ri, rj)] += f[(i, j)] * Complex64::from(si * sj);
            }
        }
    }
    // Exterior coupling, every ordered cell pair assembled directly.
    let meshes: Vec<TriMesh> =
        (0..cells).map(|m| t0.mesh.translated(layout.origin(m))).collect();
    for t in 0..cells {
        for s in 0..cells {
            let cb = coupling_block(&meshes[t], &meshes[s], &t0.decomp, cfg.frequency_hz, &opts);
            for i in 0..n_eq {
                let (ri, si) = map(t, i);
                for j in 0..n_eq {
                    let (rj, sj) = map(s, j);
                    a[(ri, rj)] += cb[(i, j)] * Complex64::from(si * sj);
                }
            }
        }
    }
    // Right-hand side: exterior excitation on the eq rows, zero interior.
    let excitation = build_excitation(cfg, &layout, &t0.mesh)?;
    let v_raw = assemble_excitation(&excitation, &layout, &t0.mesh, &t0.decomp);
    let mut b = DVector::<Cplx>::zeros(total);
    for m in 0..cells {
        for i in 0..n_eq {
            let (r, s) = map(m, i);
            b[r] += v_raw[m * n_eq + i] * Complex64::from(s);
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Factorization("monolithic reference system is singular".into()))?;

    // Extract the merged eq part and expand to raw per-cell coefficients.
    let y_merged = x.rows(0, overlap.n_merged()).into_owned();
    let y_raw = overlap.expand(&y_merged);
    Ok(Solution {
        k0: 2.0 * std::f64::consts::PI * cfg.frequency_hz / C0,
        layout,
        template_mesh: t0.mesh.clone(),
        decomp: t0.decomp.clone(),
        y_merged,
        y_raw,
    })
}

fn format_report(cfg: &RunConfig, o: &RunOutcome) -> String {
    let mut s = String::new();
    s.push_str("emsurf run report\n");
    s.push_str("=================\n");
    s.push_str(&format!("Frequency                    : {:.6e} Hz\n", cfg.frequency_hz));
    s.push_str(&format!(
        "Array                        : {} x {} cells, periods {:.4e} x {:.4e} m\n",
        cfg.layout.count_x, cfg.layout.count_y, cfg.layout.period_x, cfg.layout.period_y
    ));
    s.push_str(&format!(
        "Templates                    : {} (macromodel cache hits {}/{})\n",
        o.templates, o.cache_hits, o.templates
    ));
    s.push_str(&format!(
        "Total number of unknowns     : {} solved (monolithic reference {}, raw box unknowns before merging {})\n",
        o.solved_unknowns, o.monolithic_unknowns, o.raw_eq_unknowns
    ));
    s.push_str(&format!(
        "Macromodel generation        : {:.2} s\n",
        o.macromodel_seconds
    ));
    s.push_str(&format!("Matrix fill time             : {:.2} s\n", o.fill_seconds));
    s.push_str(&format!("Preconditioner factorization : {:.2} s\n", o.factor_seconds));
    s.push_str(&format!(
        "Iterative solver             : {:.2} s ({} iterations, {} matvecs, residual {:.3e})\n",
        o.solve_seconds, o.iterations, o.matvecs, o.residual
    ));
    s
}

/// Solve and write all artifacts (report + CSV cuts). Partial artifacts are
/// removed if any step fails.
pub fn run_solve(cfg: &RunConfig, cache_dir: Option<&Path>) -> Result<RunOutcome> {
    let (solution, mut outcome) = solve_pipeline(cfg, cache_dir)?;
    outcome.report_text = format_report(cfg, &outcome);
    let mut written: Vec<PathBuf> = Vec::new();
    let result = write_artifacts(cfg, &solution, &mut outcome, &mut written);
    if result.is_err() {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    result.map(|()| outcome)
}

fn write_artifacts(
    cfg: &RunConfig,
    solution: &Solution,
    outcome: &mut RunOutcome,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(e))
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    for &phi_deg in &cfg.output.cuts_phi_deg {
        let cut = solution.scattered_cut(phi_deg.to_radians(), cfg.output.theta_samples);
        let path = dir.join(format!("cut_phi_{phi_deg:.1}.csv"));
        let file = std::fs::File::create(&path)?;
        written.push(path.clone());
        write_cut_csv(std::io::BufWriter::new(file), &cut)?;
        outcome.cut_paths.push(path);
    }
    let report_path = dir.join("report.txt");
    std::fs::write(&report_path, outcome.report_text.as_bytes())?;
    written.push(report_path.clone());
    outcome.report_path = Some(report_path);
    Ok(())
}

/// Dry-run geometry and configuration checks; returns a human-readable
/// summary without assembling any operator.
pub fn validate_run(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let templates = build_templates(cfg)?;
    let layout = ArrayLayout::new(
        cfg.layout.period_x,
        cfg.layout.period_y,
        cfg.layout.count_x,
        cfg.layout.count_y,
        cfg.template_map(),
        templates.len(),
    )?;
    let t0 = &templates[0];
    let overlap = build_overlap(&layout, &t0.mesh, &t0.decomp)?;
    build_excitation(cfg, &layout, &t0.mesh)?;
    let mut s = String::new();
    s.push_str("configuration valid\n");
    for t in &templates {
        s.push_str(&format!(
            "template '{}': {} triangles, {} raw unknowns, {} box unknowns, {} interior unknowns\n",
            t.id,
            t.mesh.triangles().len(),
            t.decomp.raw_len(),
            t.decomp.eq_len(),
            t.u.n_int(),
        ));
    }
    s.push_str(&format!(
        "array {} x {}: {} raw box unknowns, {} after merging ({} duplicates)\n",
        cfg.layout.count_x,
        cfg.layout.count_y,
        overlap.n_raw(),
        overlap.n_merged(),
        overlap.n_raw() - overlap.n_merged(),
    ));
    Ok(s)
}

/// The coarse grounded patch-cell fixture used by the validation suites:
/// 13.5 mm cell, two layers (0.762 mm substrate at eps_r 3.66 plus an air
/// layer), 5.4 mm centered PEC patch, grounded underside.
pub fn reference_cell_toml(count_x: usize, count_y: usize, out_dir: &str) -> String {
    format!(
        r#"
frequency_hz = 9.6e9

[[template]]
id = "patch"
permittivities = [3.66, 1.0]
width = 13.5e-3
layer_heights = [0.762e-3, 1.238e-3]
patch_width = 5.4e-3
mesh_length_patch = 2.7e-3
mesh_length_box = 4.5e-3
grounded = true

[layout]
period_x = 13.5e-3
period_y = 13.5e-3
count_x = {count_x}
count_y = {count_y}
templates = [0]

[excitation]
kind = "plane_wave"
e0 = [1.0, 0.0, 0.0]
direction = [0.0, 0.0, -1.0]

[output]
directory = "{out_dir}"
"#
    )
}

/// Compare two solutions' phi-cut scattered fields in dB over the dynamic
/// range `range_db` below the peak; returns the worst absolute deviation.
pub fn cut_deviation_db(a: &[FarFieldSample], b: &[FarFieldSample], range_db: f64) -> f64 {
    let mag =
        |s: &FarFieldSample| (s.e_theta.norm_sqr() + s.e_phi.norm_sqr()).sqrt();
    let peak = b.iter().map(|s| mag(s)).fold(0.0f64, f64::max);
    let floor = peak * 10f64.powf(-range_db / 20.0);
    let mut worst = 0.0f64;
    for (sa, sb) in a.iter().zip(b) {
        let (ma, mb) = (mag(sa), mag(sb));
        if mb >= floor {
            worst = worst.max((20.0 * (ma / mb).log10()).abs());
        }
    }
    worst
}

/// Book-keeping needed by the selftest and acceptance suites.
pub struct FixtureComparison {
    pub deviation_db: f64,
    pub solved_unknowns: usize,
    pub monolithic_unknowns: usize,
}

/// Solve the 2x2 reference fixture with both pipelines and compare the
/// phi = 0 scattered-field cuts.
pub fn compare_fixture_2x2(cache_dir: Option<&Path>) -> Result<FixtureComparison> {
    let cfg = RunConfig::from_str(&reference_cell_toml(2, 2, "unused"))?;
    let (fast, outcome) = solve_pipeline(&cfg, cache_dir)?;
    let slow = monolithic_reference(&cfg)?;
    let cut_fast = fast.scattered_cut(0.0, 181);
    let cut_slow = slow.scattered_cut(0.0, 181);
    Ok(FixtureComparison {
        deviation_db: cut_deviation_db(&cut_fast, &cut_slow, 30.0),
        solved_unknowns: outcome.solved_unknowns,
        monolithic_unknowns: outcome.monolithic_unknowns,
    })
}

/// Generators shared between runs of equal layouts; re-exported for tests.
pub type GeneratorMap = BTreeMap<(i64, i64), DMatrix<Cplx>>;

/// Worst Love-condition violation over a 3x3x3 probe grid per cell, in dB:
/// 20 log10(|E_rad + E_inc| / |E_inc|) at points inside each cell's box.
pub fn love_null_depth_db(sol: &Solution, exc: &RunExcitation) -> f64 {
    let (j_owned, m_owned) = sol.owned_sheets();
    let j = borrow_sheets(&j_owned, &sol.decomp);
    let m = borrow_sheets(&m_owned, &sol.decomp);
    let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in sol.template_mesh.vertices() {
        zmin = zmin.min(v.z);
        zmax = zmax.max(v.z);
    }
    let (px, py) = sol.layout.periods();
    // 3x3x3 probes per cell, centered: as far from the equivalent surfaces as
    // the flat cell allows (the cell is too thin for every probe to sit 0.1
    // wavelengths inside, so distance from the box is maximized instead), and
    // clear of physical edges (patch rims) whose singular near fields the
    // low-order basis cannot represent.
    let fractions = [0.4, 0.5, 0.6];
    let mut worst = f64::NEG_INFINITY;
    for cell in 0..sol.layout.cells() {
        let o = sol.layout.origin(cell);
        for fx in fractions {
            for fy in fractions {
                for fz in fractions {
                    let p = Vec3::new(
                        o.x + fx * px,
                        o.y + fy * py,
                        zmin + fz * (zmax - zmin),
                    );
                    let (e_rad, _) = crate::post::near_field(&j, &m, sol.k0, p);
                    let (e_inc, _) = exc.fields(p);
                    let depth = 20.0 * ((e_rad + e_inc).norm() / e_inc.norm()).log10();
                    worst = worst.max(depth);
                }
            }
        }
    }
    worst
}

/// Worst bistatic-RCS deviation (dB) of an EFIE PEC-sphere solve against the
/// exact series solution, over both principal cuts at ka = 1.
pub fn pec_sphere_worst_db() -> Result<f64> {
    use crate::kernels::assemble_l;
    use crate::mesh::build_rwg;
    use crate::oracle::{icosphere_mesh, mie_pec_bistatic_rcs, CutPlane};
    use crate::post::{bistatic_rcs, CurrentSheet};
    use crate::ETA0;
    let radius = 0.05;
    let k = 1.0 / radius;
    let mesh = icosphere_mesh(radius, 2);
    let all: Vec<usize> = (0..mesh.triangles().len()).collect();
    let set = build_rwg(&mesh, &all)?;
    let l = assemble_l(&mesh, &set, &mesh, &set, k, &assembly_options());
    let z = l.map(|v| Complex64::new(0.0, k * ETA0) * v);
    let pw = PlaneWave::new(
        CVec3::new(Complex64::from(1.0), Complex64::ZERO, Complex64::ZERO),
        Vec3::z(),
        k,
    )?;
    let rhs = crate::array::project_field(&mesh, &set, |r| pw.fields(r).0);
    let coeffs = z
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Factorization("EFIE system is singular".into()))?;
    let js = [CurrentSheet { mesh: &mesh, set: &set, coeffs: coeffs.as_slice() }];
    let mut worst: f64 = 0.0;
    for (phi, plane) in
        [(0.0, CutPlane::EPlane), (std::f64::consts::FRAC_PI_2, CutPlane::HPlane)]
    {
        for deg in (0..=180).step_by(5) {
            let theta = (deg as f64).to_radians();
            let sigma = bistatic_rcs(&js, &[], k, theta, phi, 1.0);
            let exact = mie_pec_bistatic_rcs(k, radius, theta, plane);
            worst = worst.max((10.0 * (sigma / exact).log10()).abs());
        }
    }
    Ok(worst)
}

/// Validation tier: `Fast` runs algebraic oracles in seconds, `Full` adds the
/// scattering and equivalence fixtures (minutes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelftestTier {
    Fast,
    Full,
}

impl std::str::FromStr for SelftestTier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(SelftestTier::Fast),
            "full" => Ok(SelftestTier::Full),
            other => Err(Error::Config(format!("unknown selftest tier '{other}' (fast|full)"))),
        }
    }
}

/// One selftest criterion's outcome.
#[derive(Debug, Clone)]
pub struct SelftestResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check<F: FnOnce() -> Result<String>>(name: &str, f: F) -> SelftestResult {
    match f() {
        Ok(detail) => SelftestResult { name: name.to_string(), passed: true, detail },
        Err(e) => SelftestResult { name: name.to_string(), passed: false, detail: e.to_string() },
    }
}

fn xorshift(seed: &mut u64) -> f64 {
    *seed ^= *seed << 13;
    *seed ^= *seed >> 7;
    *seed ^= *seed << 17;
    (*seed as f64 / u64::MAX as f64) - 0.5
}

fn random_generator_map(mx: usize, my: usize, n: usize, seed: u64) -> GeneratorMap {
    let mut s = seed;
    let mut g = GeneratorMap::new();
    for dy in -(my as i64 - 1)..=(my as i64 - 1) {
        for dx in -(mx as i64 - 1)..=(mx as i64 - 1) {
            g.insert(
                (dx, dy),
                DMatrix::from_fn(n, n, |_, _| Complex64::new(xorshift(&mut s), xorshift(&mut s))),
            );
        }
    }
    g
}

/// Run the validation suite and return per-criterion results.
pub fn run_selftest(tier: SelftestTier) -> Vec<SelftestResult> {
    let mut out = Vec::new();

    out.push(check("fft matvec exactness", || {
        let (mx, my, n) = (4, 4, 8);
        let op = BlockToeplitzOperator::new(random_generator_map(mx, my, n, 11), mx, my)?;
        let dense = op.densify(20_000)?;
        let mut s = 3u64;
        let x = DVector::from_fn(mx * my * n, |_, _| {
            Complex64::new(xorshift(&mut s), xorshift(&mut s))
        });
        let fast = op.apply(&x)?;
        let exact = &dense * &x;
        let rel = (fast - &exact).norm() / exact.norm();
        if rel < 1e-12 {
            Ok(format!("relative error {rel:.2e}"))
        } else {
            Err(Error::Operator(format!("FFT apply deviates by {rel:.2e}")))
        }
    }));

    out.push(check("toeplitz hand example", || {
        let mut g = GeneratorMap::new();
        g.insert((0, 0), DMatrix::from_element(1, 1, Complex64::from(1.0)));
        g.insert((1, 0), DMatrix::from_element(1, 1, Complex64::from(4.0)));
        g.insert((-1, 0), DMatrix::from_element(1, 1, Complex64::from(2.0)));
        let op = BlockToeplitzOperator::new(g, 2, 1)?;
        let y = op.apply(&DVector::from_element(2, Complex64::from(1.0)))?;
        if (y[0] - Complex64::from(5.0)).norm() < 1e-12 && (y[1] - Complex64::from(3.0)).norm() < 1e-12
        {
            Ok("y = [5, 3]".into())
        } else {
            Err(Error::Operator(format!("got [{}, {}]", y[0], y[1])))
        }
    }));

    out.push(check("gmres identity and diagonal oracles", || {
        let mut s = 7u64;
        let b = DVector::from_fn(16, |_, _| Complex64::new(xorshift(&mut s), xorshift(&mut s)));
        let (x, rep) = gmres_solve(|v| Ok(v.clone()), |v| v.clone(), &b, &GmresConfig::default())?;
        if rep.iterations != 1 || (x - &b).norm() > 1e-12 * b.norm() {
            return Err(Error::NonConvergence { residual: rep.residual, iterations: rep.iterations });
        }
        let d: Vec<Cplx> = (0..16).map(|i| Complex64::new(2.0 + i as f64, 0.1)).collect();
        let cfg = GmresConfig { tolerance: 1e-10, ..Default::default() };
        let (x, _) = gmres_solve(
            |v| Ok(DVector::from_fn(16, |i, _| d[i] * v[i])),
            |v| v.clone(),
            &b,
            &cfg,
        )?;
        let exact = DVector::from_fn(16, |i, _| b[i] / d[i]);
        let rel = (x - &exact).norm() / exact.norm();
        if rel < 1e-8 {
            Ok(format!("diagonal solve error {rel:.2e}"))
        } else {
            Err(Error::NonConvergence { residual: rel, iterations: 0 })
        }
    }));

    out.push(check("config strict unknown-key rejection", || {
        let good = reference_cell_toml(2, 2, "out");
        RunConfig::from_str(&good)?;
        let bad = good.replace("frequency_hz = 9.6e9", "frequency_hz = 9.6e9\nmystery = 1");
        match RunConfig::from_str(&bad) {
            Err(_) => Ok("unknown key rejected".into()),
            Ok(_) => Err(Error::Config("unknown key was accepted".into())),
        }
    }));

    out.push(check("macromodel cache roundtrip", || {
        use crate::macromodel::{read_macromodel, write_macromodel, Macromodel};
        let mut s = 5u64;
        let m = Macromodel {
            z_eq: DMatrix::from_fn(6, 6, |_, _| Complex64::new(xorshift(&mut s), xorshift(&mut s))),
            freq_hz: 9.6e9,
            mesh_hash: 0xDEADBEEF,
            recovery: Some(DMatrix::from_fn(3, 6, |_, _| {
                Complex64::new(xorshift(&mut s), xorshift(&mut s))
            })),
        };
        let mut buf = Vec::new();
        write_macromodel(&mut buf, &m)?;
        let m2 = read_macromodel(std::io::Cursor::new(&buf))?;
        if m2.z_eq == m.z_eq && m2.recovery == m.recovery && m2.mesh_hash == m.mesh_hash {
            Ok(format!("{} bytes bit-exact", buf.len()))
        } else {
            Err(Error::Cache("cache roundtrip altered data".into()))
        }
    }));

    out.push(check("directivity quadrature normalization", || {
        // Ideal-dipole intensity U = sin^2(theta): peak directivity 1.5.
        let gl = crate::post::gauss_legendre(32);
        let mut p = 0.0;
        for &(ct, w) in &gl {
            p += w * (1.0 - ct * ct) * 2.0 * std::f64::consts::PI;
        }
        let d_peak = 4.0 * std::f64::consts::PI / p;
        let err = (d_peak - 1.5f64).abs() / 1.5;
        if err < 5e-3 {
            Ok(format!("dipole peak D = {d_peak:.6} (1.76 dBi)"))
        } else {
            Err(Error::Post(format!("dipole peak D = {d_peak}")))
        }
    }));

    if tier == SelftestTier::Full {
        out.push(check("pec sphere vs series solution", || {
            let worst = pec_sphere_worst_db()?;
            if worst <= 0.5 {
                Ok(format!("worst deviation {worst:.3} dB"))
            } else {
                Err(Error::Post(format!("worst deviation {worst:.3} dB exceeds 0.5 dB")))
            }
        }));

        // One shared 2x2 fixture solve feeds the remaining physics checks.
        let fixture = (|| -> Result<(RunConfig, Solution, RunOutcome, Solution)> {
            let cfg = RunConfig::from_str(&reference_cell_toml(2, 2, "unused"))?;
            let (fast, outcome) = solve_pipeline(&cfg, None)?;
            let slow = monolithic_reference(&cfg)?;
            Ok((cfg, fast, outcome, slow))
        })();
        match fixture {
            Ok((cfg, fast, outcome, slow)) => {
                out.push(check("macromodel vs monolithic 2x2", || {
                    let dev = cut_deviation_db(
                        &fast.scattered_cut(0.0, 181),
                        &slow.scattered_cut(0.0, 181),
                        30.0,
                    );
                    if dev <= 0.1 {
                        Ok(format!("worst cut deviation {dev:.4} dB"))
                    } else {
                        Err(Error::Post(format!("cut deviation {dev:.4} dB exceeds 0.1 dB")))
                    }
                }));
                out.push(check("love-condition interior null", || {
                    let exc = build_excitation(&cfg, &fast.layout, &fast.template_mesh)?;
                    let depth = love_null_depth_db(&fast, &exc);
                    if depth <= -40.0 {
                        Ok(format!("worst null depth {depth:.1} dB"))
                    } else {
                        Err(Error::Post(format!("null depth {depth:.1} dB above -40 dB")))
                    }
                }));
                out.push(check("unknown-reduction bookkeeping", || {
                    if outcome.solved_unknowns < outcome.monolithic_unknowns {
                        Ok(format!(
                            "{} solved vs {} monolithic",
                            outcome.solved_unknowns, outcome.monolithic_unknowns
                        ))
                    } else {
                        Err(Error::Reduction("no unknown reduction achieved".into()))
                    }
                }));
            }
            Err(e) => {
                for name in
                    ["macromodel vs monolithic 2x2", "love-condition interior null", "unknown-reduction bookkeeping"]
                {
                    out.push(SelftestResult {
                        name: name.into(),
                        passed: false,
                        detail: format!("fixture solve failed: {e}"),
                    });
                }
            }
        }
    }
    out
}
