//! Element-local space-time predictor on a moving triangle.
//!
//! The predictor lives in the total-degree space `P_M(xi, eta, tau)` with a
//! nodal basis on the simplex lattice `(i, j, k) / M`, `i + j + k <= M`.
//! Nodes with `k = 0` carry the reconstruction; the remaining coefficients
//! solve the reference-element weak form tested against `P_{M-1}`, by
//! Picard iteration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::euler::{flux_columns, GasModel, State, NVAR};
use crate::mesh::{Point, ReferenceMap};
use crate::quadrature::{GaussLegendre, TriangleRule};
use crate::weno::{Basis, CellPolynomial};

/// Source term `S(x, t, q)`.
pub trait SourceTerm: Sync {
    fn eval(&self, x: Point, t: f64, q: &State) -> State;
}

/// Vertex paths `X(tau) = X^n + tau dt V`.
#[derive(Clone, Copy, Debug)]
pub struct SlabGeometry {
    pub cell: usize,
    pub vertices: [Point; 3],
    pub velocities: [Point; 3],
    pub dt: f64,
}

impl SlabGeometry {
    pub fn new(cell: usize, vertices: [Point; 3], velocities: [Point; 3], dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::TimeStep { dt });
        }
        let g = Self {
            cell,
            vertices,
            velocities,
            dt,
        };
        if let Some(tau) = g.first_nonpositive_area() {
            return Err(Error::DegenerateCell {
                cell,
                reason: format!("area vanishes inside the slab at tau = {tau:.6}"),
            });
        }
        Ok(g)
    }

    pub fn vertices_at(&self, tau: f64) -> [Point; 3] {
        let s = tau * self.dt;
        let mut out = self.vertices;
        for (o, v) in out.iter_mut().zip(&self.velocities) {
            o[0] += s * v[0];
            o[1] += s * v[1];
        }
        out
    }

    pub fn map_at(&self, tau: f64) -> ReferenceMap {
        ReferenceMap::new(self.cell, self.vertices_at(tau))
    }

    pub fn area_at(&self, tau: f64) -> f64 {
        crate::mesh::signed_area(&self.vertices_at(tau))
    }

    /// `x(xi, eta, tau)`.
    pub fn to_physical(&self, xi: Point, tau: f64) -> Point {
        self.map_at(tau).to_physical(xi)
    }

    /// Mesh velocity interpolated linearly from the vertices.
    pub fn velocity_at(&self, xi: Point) -> Point {
        let [a, b, c] = self.velocities;
        [
            a[0] + (b[0] - a[0]) * xi[0] + (c[0] - a[0]) * xi[1],
            a[1] + (b[1] - a[1]) * xi[0] + (c[1] - a[1]) * xi[1],
        ]
    }

    /// Smallest `tau` in `[0, 1]` with non-positive area, if any. The area is
    /// a quadratic in `tau`.
    pub fn first_nonpositive_area(&self) -> Option<f64> {
        let a0 = self.area_at(0.0);
        let a1 = self.area_at(1.0);
        let ah = self.area_at(0.5);
        if !(a0 > 0.0) {
            return Some(0.0);
        }
        // area(tau) = a0 + b tau + c tau^2.
        let c = 2.0 * (a1 + a0 - 2.0 * ah);
        let b = a1 - a0 - c;
        if !(a1 > 0.0) {
            // Root in (0, 1]: report it.
            return Some(smallest_root(a0, b, c).unwrap_or(1.0));
        }
        if c > 0.0 {
            let tv = -b / (2.0 * c);
            if tv > 0.0 && tv < 1.0 && !(a0 + b * tv + c * tv * tv > 0.0) {
                return Some(smallest_root(a0, b, c).unwrap_or(tv));
            }
        }
        None
    }
}

fn smallest_root(a0: f64, b: f64, c: f64) -> Option<f64> {
    if c.abs() < 1e-300 {
        return (b != 0.0).then(|| -a0 / b).filter(|t| *t >= 0.0);
    }
    let disc = b * b - 4.0 * c * a0;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let mut roots = [(-b - s) / (2.0 * c), (-b + s) / (2.0 * c)];
    roots.sort_by(f64::total_cmp);
    roots.into_iter().find(|t| *t >= 0.0)
}

/// Monomials `xi^a eta^b tau^c`, `a + b + c <= m`.
fn monomial_exponents(m: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=m {
        for c in 0..=total {
            for b in 0..=(total - c) {
                out.push([total - b - c, b, c]);
            }
        }
    }
    out
}

#[inline]
fn powers(x: f64, m: usize, out: &mut [f64; 8]) {
    out[0] = 1.0;
    for k in 1..=m {
        out[k] = out[k - 1] * x;
    }
}

fn eval_monomials(exps: &[[usize; 3]], m: usize, p: [f64; 3], out: &mut [f64]) {
    let (mut px, mut py, mut pt) = ([0.0; 8], [0.0; 8], [0.0; 8]);
    powers(p[0], m, &mut px);
    powers(p[1], m, &mut py);
    powers(p[2], m, &mut pt);
    for (o, e) in out.iter_mut().zip(exps) {
        *o = px[e[0]] * py[e[1]] * pt[e[2]];
    }
}

/// Derivative of every monomial along axis `axis`.
fn eval_monomial_derivative(exps: &[[usize; 3]], m: usize, p: [f64; 3], axis: usize, out: &mut [f64]) {
    let (mut px, mut py, mut pt) = ([0.0; 8], [0.0; 8], [0.0; 8]);
    powers(p[0], m, &mut px);
    powers(p[1], m, &mut py);
    powers(p[2], m, &mut pt);
    let tabs = [&px, &py, &pt];
    for (o, e) in out.iter_mut().zip(exps) {
        if e[axis] == 0 {
            *o = 0.0;
            continue;
        }
        let mut v = e[axis] as f64;
        for ax in 0..3 {
            let k = if ax == axis { e[ax] - 1 } else { e[ax] };
            v *= tabs[ax][k];
        }
        *o = v;
    }
}

/// Reference space-time basis and all element-independent operators.
#[derive(Clone, Debug)]
pub struct SpaceTimeBasis {
    degree: usize,
    exps: Vec<[usize; 3]>,
    nodes: Vec<[f64; 3]>,
    /// Row-major `Q x Q`: `theta_k = sum_j modal[j * Q + k] m_j`.
    modal: Vec<f64>,
    num_spatial: usize,
    tau_rule: GaussLegendre,
    /// `-A K_tau[F, 0]`, row-major `F x D`.
    initial_lift: Vec<f64>,
    /// `A M[F, :]`, row-major `F x Q`.
    mass: Vec<f64>,
    /// Per tau level, weighted tensors `A <phi_l, s d_r theta_k>` for
    /// `s in {1, xi, eta}` and `r in {xi, eta}`; index `3 * r + s`.
    levels: Vec<[Vec<f64>; 6]>,
    /// Per tau level, `int_ref theta_k(., tau) dxi deta`.
    theta_integrals: Vec<Vec<f64>>,
}

impl SpaceTimeBasis {
    pub fn new(degree: usize) -> Self {
        assert!(degree <= 6, "space-time degree above 6 is not supported");
        let m = degree;
        let exps = monomial_exponents(m);
        let q = exps.len();
        let mut nodes = Vec::with_capacity(q);
        let h = if m == 0 { 0.0 } else { 1.0 / m as f64 };
        for k in 0..=m {
            for j in 0..=(m - k) {
                for i in 0..=(m - k - j) {
                    nodes.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                }
            }
        }
        if m == 0 {
            nodes[0] = [1.0 / 3.0, 1.0 / 3.0, 0.0];
        }
        let num_spatial = (m + 1) * (m + 2) / 2;

        // Vandermonde V[l][j] = m_j(node_l); modal = V^{-1}.
        let mut vand = DMatrix::<f64>::zeros(q, q);
        let mut row = vec![0.0; q];
        for (l, node) in nodes.iter().enumerate() {
            eval_monomials(&exps, m, *node, &mut row);
            for j in 0..q {
                vand[(l, j)] = row[j];
            }
        }
        let inv = vand.try_inverse().expect("simplex lattice is unisolvent");
        let modal: Vec<f64> = (0..q * q).map(|i| inv[(i / q, i % q)]).collect();

        let mut basis = Self {
            degree,
            exps,
            nodes,
            modal,
            num_spatial,
            tau_rule: GaussLegendre::new(m + 2),
            initial_lift: Vec::new(),
            mass: Vec::new(),
            levels: Vec::new(),
            theta_integrals: Vec::new(),
        };
        basis.build_operators();
        basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `Q = (M+1)(M+2)(M+3)/6`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Nodes with `tau = 0` come first.
    pub fn num_spatial_nodes(&self) -> usize {
        self.num_spatial
    }

    pub fn tau_rule(&self) -> &GaussLegendre {
        &self.tau_rule
    }

    /// Nodal basis values `theta_k(p)`.
    pub fn eval_into(&self, p: [f64; 3], out: &mut [f64]) {
        let q = self.len();
        let mut mono = [0.0; 128];
        eval_monomials(&self.exps, self.degree, p, &mut mono[..q]);
        for (k, o) in out.iter_mut().enumerate().take(q) {
            *o = (0..q).map(|j| self.modal[j * q + k] * mono[j]).sum();
        }
    }

    pub fn eval(&self, p: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(p, &mut out);
        out
    }

    /// `d theta_k / d axis` at `p`.
    pub fn eval_derivative(&self, p: [f64; 3], axis: usize) -> Vec<f64> {
        let q = self.len();
        let mut mono = vec![0.0; q];
        eval_monomial_derivative(&self.exps, self.degree, p, axis, &mut mono);
        (0..q)
            .map(|k| (0..q).map(|j| self.modal[j * q + k] * mono[j]).sum())
            .collect()
    }

    /// Reference-element tensors `<theta_l, d theta_k / d tau>` and
    /// `<theta_l, theta_k>` over the full nodal space.
    pub fn reference_mass_and_stiffness(&self, spatial_degree: usize) -> (Vec<f64>, Vec<f64>) {
        let q = self.len();
        let rule = TriangleRule::with_degree(spatial_degree);
        let tau = GaussLegendre::with_degree(spatial_degree);
        let mut kt = vec![0.0; q * q];
        let mut mm = vec![0.0; q * q];
        for (t, wt) in tau.iter() {
            for (p, w) in rule.iter() {
                let pt = [p[0], p[1], t];
                let th = self.eval(pt);
                let dt = self.eval_derivative(pt, 2);
                for l in 0..q {
                    for k in 0..q {
                        kt[l * q + k] += wt * w * th[l] * dt[k];
                        mm[l * q + k] += wt * w * th[l] * th[k];
                    }
                }
            }
        }
        (kt, mm)
    }

    fn build_operators(&mut self) {
        let m = self.degree;
        let q = self.len();
        let d = self.num_spatial;
        let f = q - d;
        if f == 0 {
            self.levels = vec![Default::default(); self.tau_rule.len()];
            self.theta_integrals = self.tau_rule.iter().map(|_| vec![0.5]).collect();
            return;
        }
        let test_exps = monomial_exponents(m - 1);
        debug_assert_eq!(test_exps.len(), f);
        let rule = TriangleRule::with_degree(2 * m + 1);
        let exact_tau = GaussLegendre::with_degree(2 * m);

        let mut phi = vec![0.0; f];
        let mut th = vec![0.0; q];
        // Tau-integrated operators.
        let mut ktau = DMatrix::<f64>::zeros(f, q);
        let mut mass = DMatrix::<f64>::zeros(f, q);
        for (t, wt) in exact_tau.iter() {
            for (p, w) in rule.iter() {
                let pt = [p[0], p[1], t];
                eval_monomials(&test_exps, m, pt, &mut phi);
                self.eval_into(pt, &mut th);
                let dtau = self.eval_derivative(pt, 2);
                for l in 0..f {
                    for k in 0..q {
                        ktau[(l, k)] += wt * w * phi[l] * dtau[k];
                        mass[(l, k)] += wt * w * phi[l] * th[k];
                    }
                }
            }
        }
        let a = ktau
            .columns(d, f)
            .into_owned()
            .try_inverse()
            .expect("time-derivative block is invertible on P_{M-1}");
        let lift = -(&a * ktau.columns(0, d));
        let amass = &a * &mass;
        self.initial_lift = (0..f * d).map(|i| lift[(i / d, i % d)]).collect();
        self.mass = (0..f * q).map(|i| amass[(i / q, i % q)]).collect();

        // Geometry-weighted tensors per tau level.
        let mut levels = Vec::with_capacity(self.tau_rule.len());
        let mut theta_integrals = Vec::with_capacity(self.tau_rule.len());
        for (t, wt) in self.tau_rule.clone().iter() {
            let mut raw: [DMatrix<f64>; 6] = std::array::from_fn(|_| DMatrix::zeros(f, q));
            let mut ints = vec![0.0; q];
            for (p, w) in rule.iter() {
                let pt = [p[0], p[1], t];
                eval_monomials(&test_exps, m, pt, &mut phi);
                self.eval_into(pt, &mut th);
                let dx = self.eval_derivative(pt, 0);
                let dy = self.eval_derivative(pt, 1);
                let s = [1.0, p[0], p[1]];
                for k in 0..q {
                    ints[k] += w * th[k];
                }
                for (r, dr) in [&dx, &dy].into_iter().enumerate() {
                    for (si, sv) in s.iter().enumerate() {
                        let mat = &mut raw[3 * r + si];
                        for l in 0..f {
                            let c = wt * w * sv * phi[l];
                            for k in 0..q {
                                mat[(l, k)] += c * dr[k];
                            }
                        }
                    }
                }
            }
            let tensors: [Vec<f64>; 6] = std::array::from_fn(|i| {
                let prod = &a * &raw[i];
                (0..f * q).map(|j| prod[(j / q, j % q)]).collect()
            });
            levels.push(tensors);
            theta_integrals.push(ints);
        }
        self.levels = levels;
        self.theta_integrals = theta_integrals;
    }
}

/// Converged predictor on one element.
#[derive(Clone, Debug)]
pub struct Predictor {
    pub cell: usize,
    /// Nodal states `q_k`.
    pub nodal: Vec<State>,
    /// Monomial coefficients for fast evaluation.
    modal: Vec<State>,
    pub geometry: SlabGeometry,
    pub sweeps: usize,
    /// Max-norm update of each sweep.
    pub updates: Vec<f64>,
}

impl Predictor {
    /// `q_h(xi, eta, tau)`.
    pub fn eval(&self, basis: &SpaceTimeBasis, p: [f64; 3]) -> State {
        let q = basis.len();
        let mut mono = [0.0; 128];
        eval_monomials(&basis.exps, basis.degree, p, &mut mono[..q]);
        let mut out = [0.0; NVAR];
        for (j, c) in self.modal.iter().enumerate() {
            for v in 0..NVAR {
                out[v] += mono[j] * c[v];
            }
        }
        out
    }

    /// `q_h` at a physical point at slab time `tau`; the map is affine so
    /// points outside the element extrapolate.
    pub fn eval_physical(&self, basis: &SpaceTimeBasis, x: Point, tau: f64) -> State {
        let xi = self.geometry.map_at(tau).to_reference_unchecked(x);
        self.eval(basis, [xi[0], xi[1], tau])
    }

    /// Space-time integral of the nodally interpolated source over the element.
    pub fn source_integral(&self, basis: &SpaceTimeBasis, source: &dyn SourceTerm, t0: f64) -> State {
        let g = &self.geometry;
        let nodal: Vec<State> = basis
            .nodes
            .iter()
            .zip(&self.nodal)
            .map(|(n, q)| {
                let x = g.to_physical([n[0], n[1]], n[2]);
                source.eval(x, t0 + n[2] * g.dt, q)
            })
            .collect();
        let mut out = [0.0; NVAR];
        for ((t, wt), ints) in basis.tau_rule.iter().zip(&basis.theta_integrals) {
            let det = 2.0 * g.area_at(t);
            for (k, s) in nodal.iter().enumerate() {
                let c = g.dt * wt * det * ints[k];
                for v in 0..NVAR {
                    out[v] += c * s[v];
                }
            }
        }
        out
    }
}

pub const PREDICTOR_TOLERANCE: f64 = 1e-12;

/// Picard iteration for one element.
pub fn solve_predictor(
    basis: &SpaceTimeBasis,
    spatial: &Basis,
    reconstruction: &CellPolynomial,
    geometry: SlabGeometry,
    t0: f64,
    gas: &GasModel,
    source: Option<&dyn SourceTerm>,
) -> Result<Predictor> {
    let q = basis.len();
    let d = basis.num_spatial;
    let f = q - d;
    let cell = geometry.cell;
    let dt = geometry.dt;
    let fail = |reason: String| Error::Predictor { cell, reason };

    let mut nodal: Vec<State> = basis
        .nodes
        .iter()
        .map(|n| reconstruction.eval_reference(spatial, [n[0], n[1]]))
        .collect();

    // Per-element operators Pt, Px, Py (F x Q, row-major).
    let mut pt = vec![0.0; f * q];
    let mut px = vec![0.0; f * q];
    let mut py = vec![0.0; f * q];
    if f > 0 {
        let v = geometry.velocities;
        // V(xi, eta) = V1 + (V2 - V1) xi + (V3 - V1) eta.
        let vs = [
            v[0],
            [v[1][0] - v[0][0], v[1][1] - v[0][1]],
            [v[2][0] - v[0][0], v[2][1] - v[0][1]],
        ];
        for ((tau, _), lv) in basis.tau_rule.iter().zip(&basis.levels) {
            let map = geometry.map_at(tau);
            if !(map.det() > 0.0) {
                return Err(fail(format!("non-positive Jacobian at tau = {tau}")));
            }
            let inv = map.inverse_jacobian();
            // xi_t = -(xi_x Vx + xi_y Vy), linear in (xi, eta).
            let mut coef_t = [0.0; 6];
            for s in 0..3 {
                coef_t[s] = -(inv[0][0] * vs[s][0] + inv[0][1] * vs[s][1]);
                coef_t[3 + s] = -(inv[1][0] * vs[s][0] + inv[1][1] * vs[s][1]);
            }
            for i in 0..f * q {
                let (t0_, t1_) = (lv[0][i], lv[3][i]);
                px[i] += inv[0][0] * t0_ + inv[1][0] * t1_;
                py[i] += inv[0][1] * t0_ + inv[1][1] * t1_;
                let mut acc = 0.0;
                for (r, c) in coef_t.iter().enumerate() {
                    acc += c * lv[r][i];
                }
                pt[i] += acc;
            }
        }
    }

    let mut updates = Vec::new();
    let max_sweeps = 2 * (basis.degree + 1);
    let mut fx = vec![[0.0; NVAR]; q];
    let mut gy = vec![[0.0; NVAR]; q];
    let mut src = vec![[0.0; NVAR]; q];
    let mut sweeps = 0;
    while f > 0 && sweeps < max_sweeps {
        sweeps += 1;
        for k in 0..q {
            let (fk, gk) = flux_columns(&nodal[k], gas).map_err(|e| fail(format!("sweep {sweeps}, node {k}: {e}")))?;
            fx[k] = fk;
            gy[k] = gk;
            if let Some(s) = source {
                let n = basis.nodes[k];
                let x = geometry.to_physical([n[0], n[1]], n[2]);
                src[k] = s.eval(x, t0 + n[2] * dt, &nodal[k]);
            }
        }
        let mut update: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for l in 0..f {
            let mut new = [0.0; NVAR];
            let lift = &basis.initial_lift[l * d..(l + 1) * d];
            for (k, c) in lift.iter().enumerate() {
                for v in 0..NVAR {
                    new[v] += c * nodal[k][v];
                }
            }
            let row = l * q;
            for k in 0..q {
                let (a_t, a_x, a_y) = (pt[row + k], px[row + k], py[row + k]);
                let a_s = if source.is_some() { basis.mass[row + k] } else { 0.0 };
                for v in 0..NVAR {
                    new[v] -= dt * (a_t * nodal[k][v] + a_x * fx[k][v] + a_y * gy[k][v] - a_s * src[k][v]);
                }
            }
            let old = &mut nodal[d + l];
            for v in 0..NVAR {
                update = update.max((new[v] - old[v]).abs());
                scale = scale.max(new[v].abs());
                old[v] = new[v];
            }
        }
        if !update.is_finite() {
            return Err(fail(format!("non-finite update in sweep {sweeps}")));
        }
        updates.push(update);
        if update < PREDICTOR_TOLERANCE * (1.0 + scale) {
            break;
        }
    }
    for (k, s) in nodal.iter().enumerate() {
        if !(s[0] > 0.0) {
            return Err(fail(format!("non-positive density {} at node {k}", s[0])));
        }
    }
    let modal: Vec<State> = (0..q)
        .map(|j| {
            let mut c = [0.0; NVAR];
            for k in 0..q {
                let w = basis.modal[j * q + k];
                for v in 0..NVAR {
                    c[v] += w * nodal[k][v];
                }
            }
            c
        })
        .collect();
    Ok(Predictor {
        cell,
        nodal,
        modal,
        geometry,
        sweeps,
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::primitive_to_conserved;
    use crate::euler::PrimitiveState;
    use crate::mesh::REFERENCE_VERTICES;

    fn air() -> GasModel {
        GasModel::air()
    }

    #[test]
    fn basis_is_nodal_and_partition_of_unity() {
        for m in 0..=4 {
            let b = SpaceTimeBasis::new(m);
            assert_eq!(b.len(), (m + 1) * (m + 2) * (m + 3) / 6);
            for (l, n) in b.nodes().iter().enumerate() {
                let th = b.eval(*n);
                for (k, v) in th.iter().enumerate() {
                    let e = if k == l { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-11, "M={m} l={l} k={k}: {v}");
                }
            }
            let th = b.eval([0.21, 0.33, 0.71]);
            assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let d = b.eval_derivative([0.21, 0.33, 0.71], 2);
            assert!(d.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn reference_tensors() {
        for m in 1..=3 {
            let b = SpaceTimeBasis::new(m);
            let q = b.len();
            let (kt, mm) = b.reference_mass_and_stiffness(2 * m + 1);
            let (_, mm_hi) = b.reference_mass_and_stiffness(2 * m + 5);
            for i in 0..q * q {
                assert!((mm[i] - mm_hi[i]).abs() < 1e-14 * mm_hi[i].abs().max(1.0));
            }
            for l in 0..q {
                for k in 0..q {
                    assert!((mm[l * q + k] - mm[k * q + l]).abs() < 1e-15);
                }
                let row: f64 = (0..q).map(|k| kt[l * q + k]).sum();
                assert!(row.abs() < 1e-13);
            }
            let chol = DMatrix::from_row_slice(q, q, &mm).cholesky();
            assert!(chol.is_some());
        }
    }

    fn uniform(q: State, m: usize) -> (Basis, CellPolynomial) {
        let basis = Basis::new(m);
        let poly = CellPolynomial::constant(0, q, &basis);
        (basis, poly)
    }

    #[test]
    fn slab_geometry_examples() {
        let v = [[0.0, 0.0], [1.0, 0.2], [0.3, 1.0]];
        let g = SlabGeometry::new(0, v, [[0.0; 2]; 3], 0.1).unwrap();
        let a = g.map_at(0.7).jacobian();
        assert_eq!(a, g.map_at(0.0).jacobian());
        let tr = SlabGeometry::new(0, v, [[0.4, -1.0]; 3], 0.1).unwrap();
        assert!((tr.area_at(1.0) - tr.area_at(0.0)).abs() < 1e-14);
        let alpha = 0.5;
        let vel = v.map(|p| [alpha * p[0], alpha * p[1]]);
        let ex = SlabGeometry::new(0, v, vel, 0.2).unwrap();
        let ratio = ex.area_at(1.0) / ex.area_at(0.0);
        assert!((ratio - (1.0 + alpha * 0.2f64).powi(2)).abs() < 1e-14);
        // Vertex 2 crossing the opposite edge halfway through the slab.
        let crush = [[0.0; 2], [0.0; 2], [0.0, -2.0]];
        assert!(SlabGeometry::new(0, REFERENCE_VERTICES, crush, 1.0).is_err());
        assert!(SlabGeometry::new(0, REFERENCE_VERTICES, crush, 0.4).is_ok());
        assert!(SlabGeometry::new(0, REFERENCE_VERTICES, crush, 0.0).is_err());
    }

    #[test]
    fn uniform_state_stays_uniform_under_motion() {
        let gas = air();
        let q = primitive_to_conserved(&PrimitiveState::new(1.2, [0.3, -0.4], 2.0), &gas)
            .unwrap()
            .0;
        for m in 1..=3 {
            let st = SpaceTimeBasis::new(m);
            let (basis, poly) = uniform(q, m);
            let g = SlabGeometry::new(
                0,
                [[0.1, 0.0], [1.2, 0.3], [0.2, 0.9]],
                [[0.5, 0.1], [-0.3, 0.2], [0.1, -0.6]],
                0.3,
            )
            .unwrap();
            let p = solve_predictor(&st, &basis, &poly, g, 0.0, &gas, None).unwrap();
            for n in &p.nodal {
                for v in 0..NVAR {
                    assert!((n[v] - q[v]).abs() < 1e-11);
                }
            }
            let e = p.eval(&st, [0.2, 0.1, 0.9]);
            for v in 0..NVAR {
                assert!((e[v] - q[v]).abs() < 1e-11);
            }
        }
    }

    struct Manufactured;
    impl SourceTerm for Manufactured {
        fn eval(&self, x: Point, _t: f64, _q: &State) -> State {
            let c = (x[0] + x[1]).cos();
            [0.4 * c, 0.6 * c, 0.6 * c, 1.8 * c]
        }
    }

    fn manufactured_state(x: Point, gas: &GasModel) -> State {
        let r = 1.0 + 0.2 * (x[0] + x[1]).sin();
        primitive_to_conserved(&PrimitiveState::new(r, [1.0, 1.0], r), gas)
            .unwrap()
            .0
    }

    #[test]
    fn steady_manufactured_solution_is_stationary() {
        let gas = air();
        let m = 3;
        let st = SpaceTimeBasis::new(m);
        let basis = Basis::new(m);
        let verts = [[0.3, 0.2], [0.35, 0.21], [0.31, 0.26]];
        let map = ReferenceMap::new(0, verts);
        // Interpolate the exact steady state at the spatial nodes (degree-M fit).
        let rule = TriangleRule::with_degree(2 * m);
        let mut coeffs = vec![[0.0; NVAR]; basis.len()];
        // L2 projection onto the centered monomials.
        let dlen = basis.len();
        let mut gram = DMatrix::<f64>::zeros(dlen, dlen);
        let mut rhs = DMatrix::<f64>::zeros(dlen, NVAR);
        for (p, w) in rule.iter() {
            let psi = basis.eval(p);
            let s = manufactured_state(map.to_physical(p), &gas);
            for a in 0..dlen {
                for b in 0..dlen {
                    gram[(a, b)] += w * psi[a] * psi[b];
                }
                for v in 0..NVAR {
                    rhs[(a, v)] += w * psi[a] * s[v];
                }
            }
        }
        let sol = gram.lu().solve(&rhs).unwrap();
        for a in 0..dlen {
            for v in 0..NVAR {
                coeffs[a][v] = sol[(a, v)];
            }
        }
        let poly = CellPolynomial { owner: 0, coeffs };
        let g = SlabGeometry::new(0, verts, [[0.0; 2]; 3], 0.005).unwrap();
        let p = solve_predictor(&st, &basis, &poly, g, 0.0, &gas, Some(&Manufactured)).unwrap();
        let a = p.eval(&st, [0.3, 0.3, 0.0]);
        let b = p.eval(&st, [0.3, 0.3, 1.0]);
        for v in 0..NVAR {
            // The data is a degree-M projection, so the residual is O(h^M).
            assert!((a[v] - b[v]).abs() < 1e-8, "{v}: {} vs {}", a[v], b[v]);
        }
        let u = &p.updates;
        assert!(u.len() >= 2 && u[u.len() - 1] <= u[u.len() - 2]);
    }

    #[test]
    fn initial_trace_matches_reconstruction() {
        let gas = air();
        let m = 2;
        let st = SpaceTimeBasis::new(m);
        let basis = Basis::new(m);
        let mut coeffs = vec![[0.0; NVAR]; basis.len()];
        coeffs[0] = [1.0, 0.2, 0.1, 2.5];
        coeffs[1] = [0.01, 0.0, 0.02, 0.03];
        coeffs[4] = [0.005, 0.01, 0.0, 0.02];
        let poly = CellPolynomial { owner: 0, coeffs };
        let g = SlabGeometry::new(0, REFERENCE_VERTICES, [[0.1, 0.0]; 3], 0.05).unwrap();
        let p = solve_predictor(&st, &basis, &poly, g, 0.0, &gas, None).unwrap();
        for xi in [[0.1, 0.1], [0.5, 0.2], [0.0, 0.9]] {
            let a = p.eval(&st, [xi[0], xi[1], 0.0]);
            let b = poly.eval_reference(&basis, xi);
            for v in 0..NVAR {
                assert!((a[v] - b[v]).abs() < 1e-12);
            }
        }
    }

    /// Density advected by u = v = 1 at constant pressure: the degree-M data
    /// and its exact evolution both lie in the predictor space.
    #[test]
    fn advected_polynomial_is_reproduced() {
        let gas = air();
        for m in 1..=3 {
            let st = SpaceTimeBasis::new(m);
            let basis = Basis::new(m);
            let verts = [[0.2, 0.1], [0.25, 0.1], [0.2, 0.15]];
            let map = ReferenceMap::new(0, verts);
            let rho = |x: Point, t: f64| 1.0 + 0.2 * (x[0] + x[1] - 2.0 * t).powi(m as i32);
            // Centered monomials in reference coordinates fitted by collocation.
            let nodes: Vec<Point> = st.nodes()[..basis.len()].iter().map(|n| [n[0], n[1]]).collect();
            let mut vand = DMatrix::<f64>::zeros(basis.len(), basis.len());
            let mut rhs = DMatrix::<f64>::zeros(basis.len(), 1);
            for (l, n) in nodes.iter().enumerate() {
                let psi = basis.eval(*n);
                for k in 0..basis.len() {
                    vand[(l, k)] = psi[k];
                }
                rhs[(l, 0)] = rho(map.to_physical(*n), 0.0);
            }
            let c = vand.lu().solve(&rhs).unwrap();
            let coeffs = (0..basis.len())
                .map(|k| {
                    let r = c[(k, 0)];
                    let e = if k == 0 { 2.5 } else { 0.0 };
                    [r, r, r, r + e]
                })
                .collect();
            let poly = CellPolynomial { owner: 0, coeffs };
            let dt = 0.01;
            let g = SlabGeometry::new(0, verts, [[0.3, -0.2]; 3], dt).unwrap();
            let p = solve_predictor(&st, &basis, &poly, g, 0.0, &gas, None).unwrap();
            for pt in [[0.2, 0.3, 1.0], [0.6, 0.1, 0.5], [0.0, 0.0, 0.25]] {
                let x = g.to_physical([pt[0], pt[1]], pt[2]);
                let num = p.eval(&st, pt)[0];
                assert!((num - rho(x, pt[2] * dt)).abs() < 1e-11, "M={m}");
            }
        }
    }

    /// `d rho / dt = -rho^2` on uniform data: `rho = 1 / (1 + t)`.
    struct Decay;
    impl SourceTerm for Decay {
        fn eval(&self, _x: Point, _t: f64, q: &State) -> State {
            let r = q[0];
            [-r * r, 0.0, 0.0, -r * r * 2.5]
        }
    }

    fn decay_error(m: usize, dt: f64) -> f64 {
        let gas = air();
        let st = SpaceTimeBasis::new(m);
        let (basis, poly) = uniform([1.0, 0.0, 0.0, 2.5], m);
        let g = SlabGeometry::new(0, REFERENCE_VERTICES, [[0.0; 2]; 3], dt).unwrap();
        let p = solve_predictor(&st, &basis, &poly, g, 0.0, &gas, Some(&Decay)).unwrap();
        (p.eval(&st, [0.3, 0.3, 1.0])[0] - 1.0 / (1.0 + dt)).abs()
    }

    #[test]
    fn predictor_time_order() {
        for m in 1..=3 {
            let dts = [0.4, 0.2, 0.1];
            let e: Vec<f64> = dts.iter().map(|&dt| decay_error(m, dt)).collect();
            for w in e.windows(2) {
                let order = (w[0] / w[1]).ln() / 2f64.ln();
                assert!(order >= m as f64 + 0.5, "M={m}: errors {e:?}, order {order}");
            }
        }
    }
}
