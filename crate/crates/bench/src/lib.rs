//! Shared fixtures for the kernel benchmarks.

use alesbm_core::cases::{manufactured_case, CaseDefinition};
use alesbm_core::mesh::generate_disk;
use alesbm_core::scheme::{SchemeOptions, Solver};

/// Manufactured case on a disk with `rings` rings.
pub fn disk_case(rings: usize) -> CaseDefinition {
    manufactured_case(generate_disk(1.0, rings).expect("disk mesh"), 1.0, true).expect("manufactured case")
}

pub fn solver(case: &CaseDefinition, degree: usize) -> Solver {
    let q = case.initial_averages(degree).expect("initial averages");
    let options = SchemeOptions {
        degree,
        cfl: 0.9,
        gas: case.gas,
    };
    Solver::new(
        case.mesh.clone(),
        q,
        0.0,
        options,
        case.boundary.clone(),
        case.motion.clone(),
        case.source.clone(),
    )
    .expect("solver")
}
