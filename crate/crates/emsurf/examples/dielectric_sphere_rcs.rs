//! PMCHWT scattering from a homogeneous dielectric sphere, compared against
//! the exact series solution. Demonstrates the two-region formulation with
//! both electric and magnetic surface currents.
//!
//! Run with: cargo run --release --example dielectric_sphere_rcs

use emsurf::array::{project_field, Excitation, PlaneWave};
use emsurf::macromodel::{assemble_region_block, RegionBasis};
use emsurf::mesh::{build_rwg, RegionRef, SurfaceTag, TriMesh, Vec3};
use emsurf::oracle::{icosphere_mesh, mie_dielectric_bistatic_rcs, CutPlane};
use emsurf::post::{bistatic_rcs, CurrentSheet};
use emsurf::{CVec3, Cplx};
use nalgebra::DVector;

fn main() {
    let radius = 0.05;
    let k0 = 1.0 / radius; // k0 a = 1
    let eps_r = 2.5;
    let freq = k0 * emsurf::C0 / (2.0 * std::f64::consts::PI);

    // Retag the icosphere as a dielectric interface: exterior in front,
    // interior region 0 behind.
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
    println!("sphere: {} RWG pairs (J and M)", set.len());

    // PMCHWT: add the exterior and interior region blocks.
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
    let sol = z.lu().solve(&rhs).expect("PMCHWT system is nonsingular");

    let jc: Vec<Cplx> = sol.as_slice()[..set.len()].to_vec();
    let mc: Vec<Cplx> = sol.as_slice()[set.len()..].to_vec();
    let js = [CurrentSheet { mesh: &mesh, set: &set, coeffs: &jc }];
    let ms = [CurrentSheet { mesh: &mesh, set: &set, coeffs: &mc }];

    let mut worst: f64 = 0.0;
    for (label, phi, plane) in [
        ("E-plane", 0.0, CutPlane::EPlane),
        ("H-plane", std::f64::consts::FRAC_PI_2, CutPlane::HPlane),
    ] {
        println!("-- {label}");
        for deg in (0..=180).step_by(15) {
            let theta = (deg as f64).to_radians();
            let sigma = bistatic_rcs(&js, &ms, k0, theta, phi, 1.0);
            let exact = mie_dielectric_bistatic_rcs(k0, radius, eps_r, theta, plane);
            let err = (10.0 * (sigma / exact).log10()).abs();
            worst = worst.max(err);
            println!("{deg:>8}° computed {sigma:>12.5e}  series {exact:>12.5e}  {err:>6.3} dB");
        }
    }
    println!("worst deviation: {worst:.3} dB");
}
