//! Cell-wise WENO reconstruction of degree `M` from cell averages.
//!
//! Each cell owns one central and up to three sector stencils. On every
//! stencil a constrained least-squares fit reproduces the owner average
//! exactly; the candidates are blended with nonlinear weights computed per
//! conserved component.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::euler::{State, NVAR};
use crate::linalg::least_squares;
use crate::mesh::{Point, ReferenceMap, TriMesh};
use crate::quadrature::TriangleRule;

pub const WENO_EPSILON: f64 = 1e-14;
pub const WENO_POWER: i32 = 8;
pub const CENTRAL_WEIGHT: f64 = 1e5;
pub const SECTOR_WEIGHT: f64 = 1.0;

/// Reference barycenter; basis monomials are centered here.
pub const BASIS_CENTER: Point = [1.0 / 3.0, 1.0 / 3.0];

/// Centered monomials `(xi - 1/3)^a (eta - 1/3)^b`, `a + b <= M`, ordered by
/// total degree so that `psi_0 = 1`.
#[derive(Clone, Debug)]
pub struct Basis {
    degree: usize,
    exponents: Vec<(usize, usize)>,
    /// Row-major `D x D` oscillation-indicator matrix.
    sigma: Vec<f64>,
}

impl Basis {
    pub fn new(degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let mut basis = Self {
            degree,
            exponents,
            sigma: Vec::new(),
        };
        basis.sigma = basis.build_sigma();
        basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `D = (M+1)(M+2)/2`.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    pub fn sigma_matrix(&self) -> &[f64] {
        &self.sigma
    }

    /// Writes `psi_k(xi)` into `out[..D]`.
    #[inline]
    pub fn eval_into(&self, xi: Point, out: &mut [f64]) {
        let dx = xi[0] - BASIS_CENTER[0];
        let dy = xi[1] - BASIS_CENTER[1];
        let mut px = [1.0; 8];
        let mut py = [1.0; 8];
        for k in 1..=self.degree.min(7) {
            px[k] = px[k - 1] * dx;
            py[k] = py[k - 1] * dy;
        }
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = if a < 8 && b < 8 {
                px[a] * py[b]
            } else {
                dx.powi(a as i32) * dy.powi(b as i32)
            };
        }
    }

    pub fn eval(&self, xi: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(xi, &mut out);
        out
    }

    /// Reference-coordinate gradients `(d/dxi, d/deta)` of every basis function.
    pub fn eval_gradient(&self, xi: Point) -> Vec<[f64; 2]> {
        let dx = xi[0] - BASIS_CENTER[0];
        let dy = xi[1] - BASIS_CENTER[1];
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let gx = if a == 0 {
                    0.0
                } else {
                    a as f64 * dx.powi(a as i32 - 1) * dy.powi(b as i32)
                };
                let gy = if b == 0 {
                    0.0
                } else {
                    b as f64 * dx.powi(a as i32) * dy.powi(b as i32 - 1)
                };
                [gx, gy]
            })
            .collect()
    }

    /// `Sigma_km = sum_{1 <= alpha+beta <= M} int_ref d^{alpha,beta} psi_k d^{alpha,beta} psi_m`.
    fn build_sigma(&self) -> Vec<f64> {
        let d = self.len();
        let rule = TriangleRule::with_degree(2 * self.degree.max(1));
        let mut sigma = vec![0.0; d * d];
        for order in 1..=self.degree {
            for alpha in 0..=order {
                let beta = order - alpha;
                for (p, w) in rule.iter() {
                    let vals: Vec<f64> = self
                        .exponents
                        .iter()
                        .map(|&(a, b)| derivative_monomial(a, b, alpha, beta, p))
                        .collect();
                    for k in 0..d {
                        for m in 0..d {
                            sigma[k * d + m] += w * vals[k] * vals[m];
                        }
                    }
                }
            }
        }
        sigma
    }
}

fn derivative_monomial(a: usize, b: usize, alpha: usize, beta: usize, p: Point) -> f64 {
    if alpha > a || beta > b {
        return 0.0;
    }
    let falling = |n: usize, k: usize| ((n - k + 1)..=n).map(|v| v as f64).product::<f64>();
    let dx = p[0] - BASIS_CENTER[0];
    let dy = p[1] - BASIS_CENTER[1];
    falling(a, alpha) * falling(b, beta) * dx.powi((a - alpha) as i32) * dy.powi((b - beta) as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilKind {
    Central,
    /// Sector spanned by the owner barycenter and local edge `k`.
    Sector(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    pub owner: usize,
    /// `members[0] == owner`.
    pub members: Vec<usize>,
    pub kind: StencilKind,
}

/// Target stencil size `n_s = 2 D`.
pub fn stencil_size(degree: usize) -> usize {
    if degree == 0 {
        1
    } else {
        2 * Basis::new(degree).len()
    }
}

/// Central stencil followed by every sector stencil that could be filled,
/// for each cell. Sector stencils that run out of cells are dropped.
pub fn build_stencils(mesh: &TriMesh, degree: usize) -> Result<Vec<Vec<Stencil>>> {
    let target = stencil_size(degree);
    let bary: Vec<Point> = (0..mesh.num_cells()).map(|c| mesh.barycenter(c)).collect();
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut list = Vec::with_capacity(4);
            let central = grow(mesh, &bary, cell, target, |_| true).ok_or_else(|| Error::Stencil {
                cell,
                reason: format!("cannot collect {target} cells for the central stencil"),
            })?;
            list.push(Stencil {
                owner: cell,
                members: central,
                kind: StencilKind::Central,
            });
            if degree == 0 {
                return Ok(list);
            }
            let verts = mesh.cell_vertices(cell);
            let b = bary[cell];
            for k in 0..3 {
                let e0 = [verts[k][0] - b[0], verts[k][1] - b[1]];
                let e1 = [verts[(k + 1) % 3][0] - b[0], verts[(k + 1) % 3][1] - b[1]];
                let det = e0[0] * e1[1] - e0[1] * e1[0];
                let in_cone = |c: usize| {
                    let p = [bary[c][0] - b[0], bary[c][1] - b[1]];
                    let s = (p[0] * e1[1] - p[1] * e1[0]) / det;
                    let t = (e0[0] * p[1] - e0[1] * p[0]) / det;
                    s >= -1e-12 && t >= -1e-12
                };
                if let Some(members) = grow(mesh, &bary, cell, target, in_cone) {
                    list.push(Stencil {
                        owner: cell,
                        members,
                        kind: StencilKind::Sector(k),
                    });
                }
            }
            Ok(list)
        })
        .collect()
}

/// Vertex-adjacency breadth-first growth restricted by `accept`. The last
/// layer is truncated by barycenter distance, edge neighbors first.
fn grow(
    mesh: &TriMesh,
    bary: &[Point],
    owner: usize,
    target: usize,
    accept: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    let mut members = vec![owner];
    let mut seen = std::collections::HashSet::from([owner]);
    let mut front = vec![owner];
    let edge_nb = mesh.cell_neighbors(owner);
    while members.len() < target {
        let mut layer = Vec::new();
        for &c in &front {
            for &v in &mesh.triangles()[c] {
                for &n in mesh.vertex_cells(v) {
                    if seen.insert(n) && accept(n) {
                        layer.push(n);
                    }
                }
            }
        }
        if layer.is_empty() {
            return None;
        }
        let need = target - members.len();
        if layer.len() > need {
            let d2 = |c: usize| {
                let p = bary[c];
                let q = bary[owner];
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
            };
            layer.sort_by(|&x, &y| {
                let ex = edge_nb.contains(&Some(x));
                let ey = edge_nb.contains(&Some(y));
                ey.cmp(&ex).then(d2(x).total_cmp(&d2(y))).then(x.cmp(&y))
            });
            layer.truncate(need);
        }
        members.extend_from_slice(&layer);
        front = layer;
    }
    Some(members)
}

/// Degree-`M` polynomial on one cell, in the owner's reference coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CellPolynomial {
    pub owner: usize,
    /// `coeffs[k][v]`: basis index `k`, conserved component `v`.
    pub coeffs: Vec<State>,
}

impl CellPolynomial {
    pub fn constant(owner: usize, value: State, basis: &Basis) -> Self {
        let mut coeffs = vec![[0.0; NVAR]; basis.len()];
        coeffs[0] = value;
        Self { owner, coeffs }
    }

    pub fn eval_reference(&self, basis: &Basis, xi: Point) -> State {
        let mut psi = [0.0; 64];
        let d = basis.len();
        basis.eval_into(xi, &mut psi[..d]);
        let mut out = [0.0; NVAR];
        for (k, c) in self.coeffs.iter().enumerate() {
            for v in 0..NVAR {
                out[v] += psi[k] * c[v];
            }
        }
        out
    }

    /// Evaluates at a physical point (the map is affine, so points outside
    /// the owner extrapolate).
    pub fn eval_physical(&self, basis: &Basis, map: &ReferenceMap, x: Point) -> State {
        self.eval_reference(basis, map.to_reference_unchecked(x))
    }

    /// Physical-coordinate gradient `[d/dx, d/dy]` per component.
    pub fn gradient_physical(&self, basis: &Basis, map: &ReferenceMap, x: Point) -> [[f64; 2]; NVAR] {
        let xi = map.to_reference_unchecked(x);
        let g = basis.eval_gradient(xi);
        let inv = map.inverse_jacobian();
        let mut out = [[0.0; 2]; NVAR];
        for (k, c) in self.coeffs.iter().enumerate() {
            let gx = g[k][0] * inv[0][0] + g[k][1] * inv[1][0];
            let gy = g[k][0] * inv[0][1] + g[k][1] * inv[1][1];
            for v in 0..NVAR {
                out[v][0] += gx * c[v];
                out[v][1] += gy * c[v];
            }
        }
        out
    }

    /// Mean over the owner cell.
    pub fn cell_average(&self, basis: &Basis, rule: &TriangleRule) -> State {
        let mut out = [0.0; NVAR];
        for (p, w) in rule.iter() {
            let v = self.eval_reference(basis, p);
            for i in 0..NVAR {
                out[i] += 2.0 * w * v[i];
            }
        }
        out
    }
}

/// `sigma = w^T Sigma w` for one component.
pub fn oscillation_indicator(basis: &Basis, coeffs: &[f64]) -> f64 {
    let d = basis.len();
    let s = basis.sigma_matrix();
    let mut acc = 0.0;
    for k in 1..d {
        let mut row = 0.0;
        for m in 1..d {
            row += s[k * d + m] * coeffs[m];
        }
        acc += coeffs[k] * row;
    }
    acc.max(0.0)
}

/// Normalized nonlinear weights from linear weights and indicators.
pub fn nonlinear_weights(linear: &[f64], sigma: &[f64]) -> Vec<f64> {
    // (sigma_min + eps)^r / (sigma + eps)^r avoids overflow for tiny sigma.
    let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min) + WENO_EPSILON;
    let raw: Vec<f64> = linear
        .iter()
        .zip(sigma)
        .map(|(l, s)| l * (smin / (s + WENO_EPSILON)).powi(WENO_POWER))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

/// Blends candidate polynomials per conserved component.
pub fn weno_combine(basis: &Basis, candidates: &[(StencilKind, Vec<State>)]) -> Vec<State> {
    let d = basis.len();
    if candidates.len() == 1 {
        return candidates[0].1.clone();
    }
    let linear: Vec<f64> = candidates
        .iter()
        .map(|(k, _)| match k {
            StencilKind::Central => CENTRAL_WEIGHT,
            StencilKind::Sector(_) => SECTOR_WEIGHT,
        })
        .collect();
    let mut out = vec![[0.0; NVAR]; d];
    let mut comp = vec![0.0; d];
    let mut sigma = vec![0.0; candidates.len()];
    for v in 0..NVAR {
        for (s, (_, c)) in candidates.iter().enumerate() {
            for k in 0..d {
                comp[k] = c[k][v];
            }
            sigma[s] = oscillation_indicator(basis, &comp);
        }
        let w = nonlinear_weights(&linear, &sigma);
        for (s, (_, c)) in candidates.iter().enumerate() {
            for k in 0..d {
                out[k][v] += w[s] * c[k][v];
            }
        }
    }
    out
}

/// Stencils and basis for one mesh, reused across steps.
#[derive(Clone, Debug)]
pub struct Reconstructor {
    basis: Basis,
    stencils: Vec<Vec<Stencil>>,
    rule: TriangleRule,
    owner_means: Vec<f64>,
}

impl Reconstructor {
    pub fn new(mesh: &TriMesh, degree: usize) -> Result<Self> {
        let basis = Basis::new(degree);
        let stencils = build_stencils(mesh, degree)?;
        let rule = TriangleRule::with_degree(degree);
        // Reference-cell means of the basis; affine invariance makes them cell-independent.
        let mut owner_means = vec![0.0; basis.len()];
        let mut psi = vec![0.0; basis.len()];
        for (p, w) in rule.iter() {
            basis.eval_into(p, &mut psi);
            for k in 0..basis.len() {
                owner_means[k] += 2.0 * w * psi[k];
            }
        }
        Ok(Self {
            basis,
            stencils,
            rule,
            owner_means,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn stencils(&self, cell: usize) -> &[Stencil] {
        &self.stencils[cell]
    }

    /// Means of the owner-centered basis over one stencil member.
    fn member_means(&self, map: &ReferenceMap, tri: [Point; 3], out: &mut [f64]) {
        let a = map.to_reference_unchecked(tri[0]);
        let b = map.to_reference_unchecked(tri[1]);
        let c = map.to_reference_unchecked(tri[2]);
        let d = self.basis.len();
        let mut psi = [0.0; 64];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (p, w) in self.rule.iter() {
            let xi = [
                a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1],
                a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1],
            ];
            self.basis.eval_into(xi, &mut psi[..d]);
            for k in 0..d {
                out[k] += 2.0 * w * psi[k];
            }
        }
    }

    /// Constrained least-squares fit on one stencil.
    pub fn reconstruct_stencil(&self, mesh: &TriMesh, stencil: &Stencil, averages: &[State]) -> Result<Vec<State>> {
        let d = self.basis.len();
        let owner = stencil.owner;
        let q0 = averages[owner];
        let mut coeffs = vec![[0.0; NVAR]; d];
        coeffs[0] = q0;
        if d == 1 {
            return Ok(coeffs);
        }
        let map = mesh.reference_map(owner);
        if !(map.det() > 0.0) {
            return Err(Error::DegenerateCell {
                cell: owner,
                reason: "non-positive Jacobian in reconstruction".into(),
            });
        }
        let rows = stencil.members.len() - 1;
        let cols = d - 1;
        let mut a = vec![0.0; rows * cols];
        let mut b = vec![0.0; rows * NVAR];
        let mut means = vec![0.0; d];
        // Eliminating w_0 through the owner constraint:
        // sum_{k>0} (m_jk - m_0k) w_k = Q_j - Q_0.
        for (r, &j) in stencil.members[1..].iter().enumerate() {
            self.member_means(&map, mesh.cell_vertices(j), &mut means);
            for k in 1..d {
                a[r * cols + k - 1] = means[k] - self.owner_means[k];
            }
            for v in 0..NVAR {
                b[r * NVAR + v] = averages[j][v] - q0[v];
            }
        }
        let x = least_squares(&mut a, rows, cols, &mut b, NVAR).ok_or_else(|| Error::Reconstruction {
            cell: owner,
            reason: format!("rank-deficient {:?} stencil", stencil.kind),
        })?;
        for k in 1..d {
            for v in 0..NVAR {
                coeffs[k][v] = x[(k - 1) * NVAR + v];
                coeffs[0][v] -= self.owner_means[k] * coeffs[k][v];
            }
        }
        Ok(coeffs)
    }

    /// WENO reconstruction on one cell. Failing sector fits are skipped.
    pub fn reconstruct_cell(&self, mesh: &TriMesh, cell: usize, averages: &[State]) -> Result<CellPolynomial> {
        let mut candidates = Vec::with_capacity(4);
        for st in &self.stencils[cell] {
            match self.reconstruct_stencil(mesh, st, averages) {
                Ok(c) => candidates.push((st.kind, c)),
                Err(e) if st.kind == StencilKind::Central => return Err(e),
                Err(_) => {}
            }
        }
        Ok(CellPolynomial {
            owner: cell,
            coeffs: weno_combine(&self.basis, &candidates),
        })
    }

    pub fn reconstruct_all(&self, mesh: &TriMesh, averages: &[State]) -> Result<Vec<CellPolynomial>> {
        (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| self.reconstruct_cell(mesh, c, averages))
            .collect()
    }
}
