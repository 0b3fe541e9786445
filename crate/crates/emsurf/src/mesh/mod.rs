//! Triangulated geometry, RWG basis sets, and basis matching across
//! translated faces.

mod matching;
mod rwg;
mod trimesh;
mod unitcell;

pub use matching::{match_bases, BasisMatch};
pub use rwg::{build_rwg, RwgBasisSet, RwgFunction};
pub use trimesh::{
    load_mesh, load_msh, write_mesh, FaceId, MshTagTable, RegionRef, SurfaceTag, TriMesh, Triangle,
};
pub use unitcell::{generate_unit_cell, UnitCellGeometry, UnitCellParams};

/// Absolute geometric tolerance for coincidence tests, meters.
pub const GEOM_TOL: f64 = 1e-9;

pub type Vec3 = nalgebra::Vector3<f64>;
