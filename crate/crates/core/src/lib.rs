//! Direct ALE ADER-WENO finite-volume solver for the 2D Euler equations on
//! moving triangle meshes, with a shifted-boundary polynomial correction at
//! curved boundaries.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Component loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod cases;
pub mod config;
pub mod error;
pub mod euler;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod motion;
pub mod predictor;
pub mod quadrature;
pub mod runner;
pub mod sbm;
pub mod scheme;
pub mod vtk;
pub mod weno;

pub use error::{Error, Result};
pub use euler::{GasModel, State, NVAR};
pub use mesh::{Point, ReferenceMap, TriMesh};
