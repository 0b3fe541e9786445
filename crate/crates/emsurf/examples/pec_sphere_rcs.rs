//! EFIE scattering from a PEC sphere, compared against the exact series
//! solution: assembles the L operator on an icosphere, solves for the
//! surface current under plane-wave illumination, and prints the bistatic
//! RCS in both principal planes.
//!
//! Run with: cargo run --release --example pec_sphere_rcs

use emsurf::array::{project_field, Excitation, PlaneWave};
use emsurf::kernels::{assemble_l, AssemblyOptions};
use emsurf::mesh::{build_rwg, Vec3};
use emsurf::oracle::{icosphere_mesh, mie_pec_bistatic_rcs, CutPlane};
use emsurf::post::{bistatic_rcs, CurrentSheet};
use emsurf::{CVec3, Cplx, ETA0};
use num_complex::Complex64;

fn main() {
    let radius = 0.05;
    let k = 1.0 / radius; // ka = 1
    let mesh = icosphere_mesh(radius, 2);
    let all: Vec<usize> = (0..mesh.triangles().len()).collect();
    let set = build_rwg(&mesh, &all).expect("closed mesh");
    println!("sphere: {} triangles, {} RWG unknowns", mesh.triangles().len(), set.len());

    let l = assemble_l(&mesh, &set, &mesh, &set, k, &AssemblyOptions::default());
    let z = l.map(|v| Complex64::new(0.0, k * ETA0) * v);
    let pw = PlaneWave::new(CVec3::new(Cplx::ONE, Cplx::ZERO, Cplx::ZERO), Vec3::z(), k).unwrap();
    let rhs = project_field(&mesh, &set, |r| pw.fields(r).0);
    let coeffs = z.lu().solve(&rhs).expect("EFIE system is nonsingular");
    let js = [CurrentSheet { mesh: &mesh, set: &set, coeffs: coeffs.as_slice() }];

    println!("{:>9} {:>14} {:>14} {:>8}", "theta", "sigma (m^2)", "series (m^2)", "dB err");
    let mut worst: f64 = 0.0;
    for (label, phi, plane) in [
        ("E-plane", 0.0, CutPlane::EPlane),
        ("H-plane", std::f64::consts::FRAC_PI_2, CutPlane::HPlane),
    ] {
        println!("-- {label}");
        for deg in (0..=180).step_by(15) {
            let theta = (deg as f64).to_radians();
            let sigma = bistatic_rcs(&js, &[], k, theta, phi, 1.0);
            let exact = mie_pec_bistatic_rcs(k, radius, theta, plane);
            let err = (10.0 * (sigma / exact).log10()).abs();
            worst = worst.max(err);
            println!("{deg:>8}° {sigma:>14.6e} {exact:>14.6e} {err:>8.3}");
        }
    }
    println!("worst deviation: {worst:.3} dB");
}
