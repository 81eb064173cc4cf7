//! Harmonic extension of boundary velocities: P1 Laplace problem on the
//! current mesh, solved per component by Jacobi-preconditioned CG.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

pub const CG_TOLERANCE: f64 = 1e-10;

/// Sparse pattern cached across steps; values are re-assembled each call.
#[derive(Clone, Debug)]
pub struct HarmonicSolver {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    /// CSR slot of entry `(t[a], t[b])` for every triangle, `3 * a + b`.
    slots: Vec<[usize; 9]>,
    values: Vec<f64>,
    boundary: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicStats {
    pub iterations: usize,
    /// Relative residual of the worse component.
    pub residual: f64,
    /// Discrete maximum principle held componentwise (diagnostic only).
    pub max_principle: bool,
}

impl HarmonicSolver {
    pub fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.num_vertices();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for t in mesh.triangles() {
            for &a in t {
                for &b in t {
                    adj[a].push(b);
                }
            }
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let slot = |r: usize, c: usize| {
            let s = &cols[row_ptr[r]..row_ptr[r + 1]];
            row_ptr[r] + s.binary_search(&c).expect("pattern covers triangle pairs")
        };
        let slots = mesh
            .triangles()
            .iter()
            .map(|t| std::array::from_fn(|i| slot(t[i / 3], t[i % 3])))
            .collect();
        let values = vec![0.0; cols.len()];
        let boundary = (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect();
        Self {
            row_ptr,
            cols,
            slots,
            values,
            boundary,
        }
    }

    /// Assembles the P1 stiffness matrix on the current positions.
    pub fn assemble(&mut self, mesh: &TriMesh) -> Result<()> {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for cell in 0..mesh.num_cells() {
            let p = mesh.cell_vertices(cell);
            let area = crate::mesh::signed_area(&p);
            if !(area > 0.0) {
                return Err(Error::TangledMesh { cell, area });
            }
            // Gradients of the hat functions times 2|T|.
            let g: [Point; 3] = std::array::from_fn(|i| {
                let a = p[(i + 1) % 3];
                let b = p[(i + 2) % 3];
                [a[1] - b[1], b[0] - a[0]]
            });
            for a in 0..3 {
                for b in 0..3 {
                    let k = (g[a][0] * g[b][0] + g[a][1] * g[b][1]) / (4.0 * area);
                    self.values[self.slots[cell][3 * a + b]] += k;
                }
            }
        }
        Ok(())
    }

    /// Row-wise sums of the assembled matrix (zero for P1 stiffness).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.boundary.len())
            .map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum())
            .collect()
    }

    /// Entry `(r, c)`, zero outside the pattern.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let s = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        s.binary_search(&c)
            .map(|i| self.values[self.row_ptr[r] + i])
            .unwrap_or(0.0)
    }

    /// Assembles on the current mesh and extends `boundary` (indexed by
    /// vertex, `Some` on every boundary vertex) harmonically. `guess` seeds
    /// the interior values.
    pub fn solve(
        &mut self,
        mesh: &TriMesh,
        boundary: &[Option<Point>],
        guess: Option<&[Point]>,
    ) -> Result<(Vec<Point>, HarmonicStats)> {
        let nv = mesh.num_vertices();
        if boundary.len() != nv {
            return Err(Error::Solver(format!(
                "expected {nv} boundary entries, got {}",
                boundary.len()
            )));
        }
        for v in 0..nv {
            if self.boundary[v] && boundary[v].is_none() {
                return Err(Error::Solver(format!("boundary vertex {v} has no prescribed velocity")));
            }
        }
        self.assemble(mesh)?;
        let n_free = self.boundary.iter().filter(|b| !**b).count();
        let max_iter = ((10.0 * (n_free as f64).sqrt()).ceil() as usize).max(50);
        let mut out = vec![[0.0; 2]; nv];
        let mut stats = HarmonicStats {
            iterations: 0,
            residual: 0.0,
            max_principle: true,
        };
        for comp in 0..2 {
            let g: Vec<f64> = (0..nv).map(|v| boundary[v].map(|p| p[comp]).unwrap_or(0.0)).collect();
            let mut x: Vec<f64> = (0..nv)
                .map(|v| {
                    if self.boundary[v] {
                        g[v]
                    } else {
                        guess.map(|s| s[v][comp]).unwrap_or(0.0)
                    }
                })
                .collect();
            let (iters, res) = self.cg(&mut x, max_iter)?;
            stats.iterations = stats.iterations.max(iters);
            stats.residual = stats.residual.max(res);
            let (lo, hi) = (0..nv)
                .filter(|v| self.boundary[*v])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                    (l.min(g[v]), h.max(g[v]))
                });
            let slack = 1e-10 * (1.0 + lo.abs().max(hi.abs()));
            if x.iter().any(|&xv| xv < lo - slack || xv > hi + slack) {
                stats.max_principle = false;
            }
            for v in 0..nv {
                out[v][comp] = x[v];
            }
        }
        Ok((out, stats))
    }

    /// `y = A x` restricted to free rows (boundary rows zero).
    fn apply_free(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.boundary.len() {
            if self.boundary[r] {
                y[r] = 0.0;
                continue;
            }
            let mut s = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[i] * x[self.cols[i]];
            }
            y[r] = s;
        }
    }

    fn diagonal(&self, r: usize) -> f64 {
        self.entry(r, r)
    }

    /// Jacobi-preconditioned CG on the free rows; `x` holds Dirichlet values.
    fn cg(&self, x: &mut [f64], max_iter: usize) -> Result<(usize, f64)> {
        let n = x.len();
        let free: Vec<bool> = self.boundary.iter().map(|b| !b).collect();
        // Right-hand side: lifting of the Dirichlet data.
        let mut lift = vec![0.0; n];
        let dirichlet: Vec<f64> = (0..n).map(|v| if free[v] { 0.0 } else { x[v] }).collect();
        self.apply_free(&dirichlet, &mut lift);
        let bnorm = lift.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut ax = vec![0.0; n];
        self.apply_free(x, &mut ax);
        let mut r: Vec<f64> = (0..n).map(|v| if free[v] { -ax[v] } else { 0.0 }).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
        let mut rnorm = norm(&r);
        if rnorm <= CG_TOLERANCE * scale || free.iter().all(|f| !f) {
            return Ok((0, rnorm / scale));
        }
        let dinv: Vec<f64> = (0..n)
            .map(|v| if free[v] { 1.0 / self.diagonal(v) } else { 0.0 })
            .collect();
        let mut z: Vec<f64> = (0..n).map(|v| dinv[v] * r[v]).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for it in 1..=max_iter {
            // p is zero on boundary rows, so A p only touches free unknowns.
            self.apply_free(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Solver(format!(
                    "harmonic system is not positive definite (p^T A p = {pap:e})"
                )));
            }
            let alpha = rz / pap;
            for v in 0..n {
                x[v] += alpha * p[v];
                r[v] -= alpha * ap[v];
            }
            rnorm = norm(&r);
            if rnorm <= CG_TOLERANCE * scale {
                return Ok((it, rnorm / scale));
            }
            for v in 0..n {
                z[v] = dinv[v] * r[v];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for v in 0..n {
                p[v] = z[v] + beta * p[v];
            }
        }
        Err(Error::Solver(format!(
            "CG did not converge in {max_iter} iterations (relative residual {:e})",
            rnorm / scale
        )))
    }
}

/// Boundary data sampled from a per-vertex rule; interior entries are `None`.
pub fn boundary_data(mesh: &TriMesh, f: impl Fn(usize, Point) -> Point) -> Vec<Option<Point>> {
    (0..mesh.num_vertices())
        .map(|v| mesh.is_boundary_vertex(v).then(|| f(v, mesh.positions()[v])))
        .collect()
}
