//! Legacy ASCII VTK snapshots with cell-centered flow variables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::euler::{conserved_to_primitive, ConservedState, GasModel, PrimitiveState, State};
use crate::mesh::TriMesh;

pub const VTK_HEADER: &str = "# vtk DataFile Version 3.0";

/// VTK cell type id of a linear triangle.
const VTK_TRIANGLE: u8 = 5;

/// Cell scalar from the primitive state and `gamma`.
type Scalar = fn(&PrimitiveState, f64) -> f64;

/// Unstructured grid with scalars `rho`, `u`, `v`, `p` and entropy `S`.
pub fn vtk_string(mesh: &TriMesh, averages: &[State], gas: &GasModel, title: &str) -> Result<String> {
    let nc = mesh.num_cells();
    let mut prim = Vec::with_capacity(nc);
    for (c, q) in averages.iter().enumerate() {
        let w = conserved_to_primitive(&ConservedState(*q), gas)
            .map_err(|e| Error::InvalidState(format!("cell {c}: {e}")))?;
        prim.push(w);
    }
    let mut s = String::new();
    // The title line must not contain newlines.
    let title: String = title.chars().filter(|c| *c != '\n' && *c != '\r').take(255).collect();
    let _ = writeln!(s, "{VTK_HEADER}\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in mesh.positions() {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    let gamma = gas.gamma();
    let fields: [(&str, Scalar); 5] = [
        ("rho", |w, _| w.rho),
        ("u", |w, _| w.vel[0]),
        ("v", |w, _| w.vel[1]),
        ("p", |w, _| w.p),
        ("S", |w, g| w.p / w.rho.powf(g)),
    ];
    for (name, f) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for w in &prim {
            let _ = writeln!(s, "{:.17e}", f(w, gamma));
        }
    }
    Ok(s)
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &TriMesh,
    averages: &[State],
    gas: &GasModel,
    title: &str,
) -> Result<()> {
    let path = path.as_ref();
    let text = vtk_string(mesh, averages, gas, title)?;
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
