//! Scratch diagnostic for the interior-null property (temporary).

use emsurf::array::{project_field, Excitation, PlaneWave};
use emsurf::config::RunConfig;
use emsurf::macromodel::{assemble_region_block, RegionBasis};
use emsurf::mesh::{build_rwg, RegionRef, SurfaceTag, TriMesh, Vec3};
use emsurf::oracle::icosphere_mesh;
use emsurf::post::{near_field, CurrentSheet};
use emsurf::runner::{
    borrow_sheets, build_excitation, love_null_depth_db, reference_cell_toml, solve_pipeline,
};
use emsurf::{CVec3, Cplx};
use nalgebra::DVector;

fn sphere_null() {
    let radius = 0.05;
    let k0 = 1.0 / radius;
    let eps_r = 2.5;
    let freq = k0 * emsurf::C0 / (2.0 * std::f64::consts::PI);
    let pec = icosphere_mesh(radius, 2);
    let tris = pec
        .triangles()
        .iter()
        .map(|t| {
            let mut t = *t;
            t.tag = SurfaceTag::Dielectric;
            t.front = RegionRef::Exterior;
            t.back = RegionRef::Interior(0);
            t
        })
        .collect();
    let mesh = TriMesh::new(pec.vertices().to_vec(), tris).unwrap();
    let all: Vec<usize> = (0..mesh.triangles().len()).collect();
    let set = build_rwg(&mesh, &all).unwrap();
    let ext = RegionBasis {
        region: RegionRef::Exterior,
        eps_r: 1.0,
        electric: set.clone(),
        magnetic: set.clone(),
    };
    let int = RegionBasis {
        region: RegionRef::Interior(0),
        eps_r,
        electric: set.clone(),
        magnetic: set.clone(),
    };
    let opts = emsurf::kernels::AssemblyOptions::default();
    let z = assemble_region_block(&mesh, &ext, freq, &opts).unwrap()
        + assemble_region_block(&mesh, &int, freq, &opts).unwrap();
    let pw = PlaneWave::new(CVec3::new(Cplx::ONE, Cplx::ZERO, Cplx::ZERO), Vec3::z(), k0).unwrap();
    let ve = project_field(&mesh, &set, |r| pw.fields(r).0);
    let vh = project_field(&mesh, &set, |r| pw.fields(r).1);
    let mut rhs = DVector::zeros(2 * set.len());
    rhs.rows_mut(0, set.len()).copy_from(&(-&ve));
    rhs.rows_mut(set.len(), set.len()).copy_from(&(-&vh));
    let sol = z.lu().solve(&rhs).unwrap();
    let jc: Vec<Cplx> = sol.as_slice()[..set.len()].to_vec();
    let mc: Vec<Cplx> = sol.as_slice()[set.len()..].to_vec();
    let js = [CurrentSheet { mesh: &mesh, set: &set, coeffs: &jc }];
    let ms = [CurrentSheet { mesh: &mesh, set: &set, coeffs: &mc }];
    println!("-- dielectric sphere interior null (expect deep):");
    for frac in [0.2, 0.4, 0.6] {
        for dir in [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(0.5, 0.5, 0.7)] {
            let p = dir.normalize() * (radius * frac);
            let (e_rad, _) = near_field(&js, &ms, k0, p);
            let (e_inc, _) = pw.fields(p);
            let plus = (e_rad + e_inc).norm() / e_inc.norm();
            let minus = (e_rad - e_inc).norm() / e_inc.norm();
            println!(
                "  r={:>6.4} |Erad+Einc|/|Einc| = {:8.2e} ({:6.1} dB)   |Erad-Einc|/|Einc| = {:8.2e}",
                p.norm(),
                plus,
                20.0 * plus.log10(),
                minus
            );
        }
    }
}

fn cell_null(count: (usize, usize), grounded: bool, patch: bool, label: &str) {
    let mut toml = reference_cell_toml(count.0, count.1, "unused");
    if !grounded {
        toml = toml.replace("grounded = true", "grounded = false");
    }
    if !patch {
        toml = toml.replace("patch_width = 5.4e-3", "patch_width = 0.0");
    }
    if let Ok(f) = std::env::var("FREQ_GHZ") {
        let f: f64 = f.parse().unwrap();
        toml = toml.replace("frequency_hz = 9.6e9", &format!("frequency_hz = {}", f * 1e9));
    }
    if let Ok(s) = std::env::var("MESH_SCALE") {
        let s: f64 = s.parse().unwrap();
        toml = toml
            .replace("mesh_length_patch = 2.7e-3", &format!("mesh_length_patch = {}", 2.7e-3 * s))
            .replace("mesh_length_box = 4.5e-3", &format!("mesh_length_box = {}", 4.5e-3 * s));
    }
    if let Ok(s) = std::env::var("BOX_MM") {
        let s: f64 = s.parse().unwrap();
        toml = toml.replace("mesh_length_box = 4.5e-3", &format!("mesh_length_box = {}", s * 1e-3));
    }
    if let Ok(s) = std::env::var("PATCH_MM") {
        let s: f64 = s.parse().unwrap();
        toml =
            toml.replace("mesh_length_patch = 2.7e-3", &format!("mesh_length_patch = {}", s * 1e-3));
    }
    if let Ok(g) = std::env::var("RIM_GRADE") {
        let g: usize = g.parse().unwrap();
        toml = toml.replace("grounded = true", &format!("grounded = true\nrim_grading = {g}"));
    }
    let cfg = RunConfig::from_str(&toml).unwrap();
    let (sol, outcome) = solve_pipeline(&cfg, None).unwrap();
    let exc = build_excitation(&cfg, &sol.layout, &sol.template_mesh).unwrap();
    let depth = love_null_depth_db(&sol, &exc);
    println!(
        "-- {label}: null depth {depth:.1} dB  ({} solved unknowns, {} iters, residual {:.1e})",
        outcome.solved_unknowns, outcome.iterations, outcome.residual
    );
    // Full probe map of cell 0.
    let (j_owned, m_owned) = sol.owned_sheets();
    let j = borrow_sheets(&j_owned, &sol.decomp);
    let m = borrow_sheets(&m_owned, &sol.decomp);
    let (px, py) = sol.layout.periods();
    let o = sol.layout.origin(0);
    for fz in [0.4, 0.5, 0.6] {
        for fy in [0.4, 0.5, 0.6] {
            let mut line = format!("   z={:4.1}mm y={:4.1}mm:", 2.0 * fz, 13.5 * fy);
            for fx in [0.4, 0.5, 0.6] {
                let p = Vec3::new(o.x + fx * px, o.y + fy * py, 2.0e-3 * fz);
                let (e_rad, _) = near_field(&j, &m, sol.k0, p);
                let (e_inc, _) = exc.fields(p);
                let plus = (e_rad + e_inc).norm() / e_inc.norm();
                line.push_str(&format!(" {:6.1}", 20.0 * plus.log10()));
            }
            println!("{line}");
        }
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "sphere".into());
    match which.as_str() {
        "sphere" => sphere_null(),
        "brick" => cell_null((1, 1), false, false, "1x1 ungrounded brick"),
        "ground" => cell_null((1, 1), true, false, "1x1 grounded, no patch"),
        "patch" => cell_null((1, 1), true, true, "1x1 grounded patch"),
        "full" => cell_null((2, 2), true, true, "2x2 grounded patch"),
        "x2" => cell_null((2, 1), true, false, "2x1 grounded (x seam)"),
        "y2" => cell_null((1, 2), true, false, "1x2 grounded (y seam)"),
        other => eprintln!("unknown case {other}"),
    }
}
