//! One-step ALE finite-volume update on a moving triangle mesh.
//!
//! Per step: reconstruct, compute vertex velocities, size the step, solve the
//! element predictors, integrate fluxes over the space-time faces swept by the
//! edges, add the source, move the mesh. Each face flux is computed once and
//! used with opposite signs by its two cells.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::euler::{
    ale_eigen, ale_normal_flux, conserved_to_primitive, max_signal_speed, ConservedState, GasModel, State, NVAR,
};
use crate::mesh::{circumdiameter, signed_area, EdgeNeighbor, Point, TriMesh, REFERENCE_VERTICES};
use crate::motion::{HarmonicSolver, HarmonicStats};
use crate::predictor::{solve_predictor, Predictor, SlabGeometry, SourceTerm, SpaceTimeBasis};
use crate::quadrature::GaussLegendre;
use crate::sbm::{ghost_state, BoundaryPoint, BoundarySpec};
use crate::weno::{CellPolynomial, Reconstructor};

/// Gauss points on the Osher path `Psi(s) = q- + s (q+ - q-)`.
pub const OSHER_PATH_POINTS: usize = 3;

/// Smallest admissible step relative to the final time.
pub const MIN_RELATIVE_DT: f64 = 1e-14;

/// Gauss-Legendre points per direction on a space-time face.
pub fn face_points(degree: usize) -> usize {
    (degree + 3) / 2
}

/// One quadrature point on the ruled surface swept by a moving edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacePoint {
    pub chi: f64,
    pub tau: f64,
    pub x: Point,
    /// Spatial unit normal, outward from the left cell.
    pub normal: Point,
    /// Mesh normal speed `V.n`.
    pub vn: f64,
    /// `w_chi w_tau dt L(tau)`: the space-time measure carried by the point.
    pub weight: f64,
}

/// Quadrature points of the face swept by edge `a -> b` moving with vertex
/// velocities `va`, `vb` over `dt`.
pub fn face_geometry(a: Point, b: Point, va: Point, vb: Point, dt: f64, rule: &GaussLegendre) -> Vec<FacePoint> {
    let mut out = Vec::with_capacity(rule.nodes.len() * rule.nodes.len());
    for (tau, wt) in rule.iter() {
        let s = tau * dt;
        let at = [a[0] + s * va[0], a[1] + s * va[1]];
        let bt = [b[0] + s * vb[0], b[1] + s * vb[1]];
        let e = [bt[0] - at[0], bt[1] - at[1]];
        let len = e[0].hypot(e[1]);
        let n = [e[1] / len, -e[0] / len];
        for (chi, wc) in rule.iter() {
            let v = [(1.0 - chi) * va[0] + chi * vb[0], (1.0 - chi) * va[1] + chi * vb[1]];
            out.push(FacePoint {
                chi,
                tau,
                x: [at[0] + chi * e[0], at[1] + chi * e[1]],
                normal: n,
                vn: v[0] * n[0] + v[1] * n[1],
                weight: wc * wt * dt * len,
            });
        }
    }
    out
}

/// Osher ALE flux per unit space-time area:
/// `(F~(q-) + F~(q+))/2 - (1/2) int_0^1 |A_n^V(Psi(s))| ds (q+ - q-)`.
pub fn osher_flux(qm: &State, qp: &State, n: Point, vn: f64, gas: &GasModel, path: &GaussLegendre) -> Result<State> {
    let fail = |reason: String| Error::Flux {
        reason,
        left: *qm,
        right: *qp,
    };
    let fm = ale_normal_flux(qm, n, vn, gas).map_err(|e| fail(e.to_string()))?;
    let fp = ale_normal_flux(qp, n, vn, gas).map_err(|e| fail(e.to_string()))?;
    let mut jump = [0.0; NVAR];
    for k in 0..NVAR {
        jump[k] = qp[k] - qm[k];
    }
    let mut diss = [0.0; NVAR];
    for (s, w) in path.iter() {
        let mut psi = [0.0; NVAR];
        for k in 0..NVAR {
            psi[k] = qm[k] + s * jump[k];
        }
        let eig =
            ale_eigen(&ConservedState(psi), n, vn, gas).map_err(|e| fail(format!("path state at s = {s:.4}: {e}")))?;
        let d = eig.apply_abs(&jump);
        for k in 0..NVAR {
            diss[k] += w * d[k];
        }
    }
    let mut out = [0.0; NVAR];
    for k in 0..NVAR {
        out[k] = 0.5 * (fm[k] + fp[k]) - 0.5 * diss[k];
        if !out[k].is_finite() {
            return Err(fail("non-finite flux".into()));
        }
    }
    Ok(out)
}

/// `|T^{n+1}| Q^{n+1} = |T^n| Q^n - sum of face integrals + source integral`.
pub fn fv_update(
    cell: usize,
    q: &State,
    area_old: f64,
    area_new: f64,
    face_integrals: &[State],
    source: &State,
    gas: &GasModel,
) -> Result<State> {
    let mut out = [0.0; NVAR];
    for v in 0..NVAR {
        let mut acc = area_old * q[v] + source[v];
        for f in face_integrals {
            acc -= f[v];
        }
        out[v] = acc / area_new;
    }
    check_positive(cell, &out, gas)?;
    Ok(out)
}

fn check_positive(cell: usize, q: &State, gas: &GasModel) -> Result<()> {
    match conserved_to_primitive(&ConservedState(*q), gas) {
        Ok(w) if w.rho > 0.0 && w.p > 0.0 && w.rho.is_finite() && w.p.is_finite() => Ok(()),
        Ok(w) => Err(Error::Positivity {
            cell,
            reason: format!("rho = {:e}, p = {:e}", w.rho, w.p),
        }),
        Err(e) => Err(Error::Positivity {
            cell,
            reason: e.to_string(),
        }),
    }
}

/// `CFL min_i(d_i / lambda_i) / (2M + 1)`, with `d_i` the incircle diameter
/// and `lambda_i` the largest signal speed over the faces of cell `i`.
pub fn compute_timestep(
    mesh: &TriMesh,
    averages: &[State],
    velocities: &[Point],
    cfl: f64,
    degree: usize,
    gas: &GasModel,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for c in 0..mesh.num_cells() {
        let tri = mesh.triangles()[c];
        let pos = mesh.cell_vertices(c);
        let q = ConservedState(averages[c]);
        let mut lambda: f64 = 0.0;
        for k in 0..3 {
            let (a, b) = (pos[k], pos[(k + 1) % 3]);
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = e[0].hypot(e[1]);
            let n = [e[1] / len, -e[0] / len];
            let (va, vb) = (velocities[tri[k]], velocities[tri[(k + 1) % 3]]);
            let vn = 0.5 * ((va[0] + vb[0]) * n[0] + (va[1] + vb[1]) * n[1]);
            lambda = lambda.max(max_signal_speed(&q, n, vn, gas).map_err(|_| Error::Positivity {
                cell: c,
                reason: "invalid state in time-step control".into(),
            })?);
        }
        best = best.min(mesh.incircle_diameter(c) / lambda);
    }
    Ok(cfl * best / (2 * degree + 1) as f64)
}

/// Boundary vertex velocity rule.
pub trait BoundaryVelocity: Send + Sync {
    fn velocity(&self, tag: &str, x: Point, t: f64) -> Point;

    /// Constant velocity carrying `x` along its exact path from `t` to
    /// `t + dt`, so boundary vertices never drift off the true boundary.
    fn step_velocity(&self, tag: &str, x: Point, t: f64, _dt: f64) -> Point {
        self.velocity(tag, x, t)
    }
}

/// Vertex velocity field prescribed everywhere.
pub trait VelocityField: Send + Sync {
    fn velocity(&self, x: Point, t: f64) -> Point;
}

#[derive(Clone)]
pub enum MeshMotion {
    Fixed,
    /// Boundary rule extended harmonically into the interior.
    Harmonic(Arc<dyn BoundaryVelocity>),
    Prescribed(Arc<dyn VelocityField>),
}

#[derive(Clone, Copy, Debug)]
pub struct SchemeOptions {
    pub degree: usize,
    pub cfl: f64,
    pub gas: GasModel,
}

/// Per-step diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub halvings: usize,
    pub max_predictor_sweeps: usize,
    pub harmonic: Option<HarmonicStats>,
    /// Integrated flux leaving through boundary faces.
    pub boundary_flux: State,
    pub source: State,
    /// `sum |T| Q` after the step.
    pub totals: State,
    pub stage_seconds: [f64; 5],
}

pub const STAGE_NAMES: [&str; 5] = ["reconstruct", "mesh velocity", "predictor", "flux", "update"];

/// Owns the mesh, the cell averages and every per-mesh cache.
pub struct Solver {
    pub options: SchemeOptions,
    mesh: TriMesh,
    averages: Vec<State>,
    time: f64,
    step: usize,
    reconstructor: Reconstructor,
    st_basis: SpaceTimeBasis,
    face_rule: GaussLegendre,
    path_rule: GaussLegendre,
    boundary: Vec<BoundarySpec>,
    motion: MeshMotion,
    harmonic: Option<HarmonicSolver>,
    velocities: Vec<Point>,
    source: Option<Arc<dyn SourceTerm + Send>>,
}

impl Solver {
    /// `boundary` must cover every boundary tag of the mesh.
    pub fn new(
        mesh: TriMesh,
        averages: Vec<State>,
        time: f64,
        options: SchemeOptions,
        boundary: HashMap<String, BoundarySpec>,
        motion: MeshMotion,
        source: Option<Arc<dyn SourceTerm + Send>>,
    ) -> Result<Self> {
        if averages.len() != mesh.num_cells() {
            return Err(Error::Config(format!(
                "{} cell averages for {} cells",
                averages.len(),
                mesh.num_cells()
            )));
        }
        if !(options.cfl > 0.0 && options.cfl <= 1.0) {
            return Err(Error::Config(format!("CFL {} outside (0, 1]", options.cfl)));
        }
        for name in boundary.keys() {
            if mesh.tag_id(name).is_none() {
                return Err(Error::Config(format!("boundary tag '{name}' not present in the mesh")));
            }
        }
        let mut specs = Vec::with_capacity(mesh.tag_names().len());
        for name in mesh.tag_names() {
            let spec = boundary
                .get(name)
                .ok_or_else(|| Error::Config(format!("no boundary condition for tag '{name}'")))?;
            specs.push(spec.clone());
        }
        for (c, q) in averages.iter().enumerate() {
            check_positive(c, q, &options.gas)?;
        }
        let reconstructor = Reconstructor::new(&mesh, options.degree)?;
        let harmonic = matches!(motion, MeshMotion::Harmonic(_)).then(|| HarmonicSolver::new(&mesh));
        let velocities = vec![[0.0; 2]; mesh.num_vertices()];
        Ok(Self {
            st_basis: SpaceTimeBasis::new(options.degree),
            face_rule: GaussLegendre::new(face_points(options.degree)),
            path_rule: GaussLegendre::new(OSHER_PATH_POINTS),
            options,
            mesh,
            averages,
            time,
            step: 0,
            reconstructor,
            boundary: specs,
            motion,
            harmonic,
            velocities,
            source,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn averages(&self) -> &[State] {
        &self.averages
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn reconstructor(&self) -> &Reconstructor {
        &self.reconstructor
    }

    /// Current WENO polynomials.
    pub fn reconstruct(&self) -> Result<Vec<CellPolynomial>> {
        self.reconstructor.reconstruct_all(&self.mesh, &self.averages)
    }

    /// `sum_i |T_i| Q_i`.
    pub fn totals(&self) -> State {
        totals(&self.mesh, &self.averages)
    }

    /// Vertex velocities at the current time; with `dt`, boundary vertices
    /// use their secant velocity over the step.
    pub fn vertex_velocities(&mut self, dt: Option<f64>) -> Result<(Vec<Point>, Option<HarmonicStats>)> {
        let t = self.time;
        let mesh = &self.mesh;
        match &self.motion {
            MeshMotion::Fixed => Ok((vec![[0.0; 2]; mesh.num_vertices()], None)),
            MeshMotion::Prescribed(f) => Ok((mesh.positions().iter().map(|&x| f.velocity(x, t)).collect(), None)),
            MeshMotion::Harmonic(rule) => {
                let data: Vec<Option<Point>> = (0..mesh.num_vertices())
                    .map(|v| {
                        mesh.vertex_tag(v).map(|tag| {
                            let (name, x) = (mesh.tag_name(tag), mesh.positions()[v]);
                            match dt {
                                Some(dt) => rule.step_velocity(name, x, t, dt),
                                None => rule.velocity(name, x, t),
                            }
                        })
                    })
                    .collect();
                let solver = self
                    .harmonic
                    .as_mut()
                    .expect("harmonic solver exists for harmonic motion");
                let guess = (self.step > 0).then_some(self.velocities.as_slice());
                let (v, stats) = solver.solve(mesh, &data, guess)?;
                Ok((v, Some(stats)))
            }
        }
    }

    /// Advances one step without passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<StepReport> {
        let step = self.step + 1;
        let gas = self.options.gas;
        let degree = self.options.degree;
        let mut timer = std::time::Instant::now();
        let mut stage_seconds = [0.0; 5];
        let mut lap = |i: usize, timer: &mut std::time::Instant| {
            stage_seconds[i] = timer.elapsed().as_secs_f64();
            *timer = std::time::Instant::now();
        };

        let polys = self.reconstruct().map_err(|e| e.at_stage("reconstruct", step))?;
        lap(0, &mut timer);

        let (mut velocities, mut harmonic) = self
            .vertex_velocities(None)
            .map_err(|e| e.at_stage("mesh velocity", step))?;
        let secant = matches!(self.motion, MeshMotion::Harmonic(_));

        let remaining = t_end - self.time;
        if !(remaining > 0.0) {
            return Err(Error::TimeStep { dt: remaining }.at_stage("timestep", step));
        }
        let mut dt = compute_timestep(&self.mesh, &self.averages, &velocities, self.options.cfl, degree, &gas)
            .map_err(|e| e.at_stage("timestep", step))?;
        let floor = MIN_RELATIVE_DT * t_end.abs().max(f64::MIN_POSITIVE);
        let mut clipped = false;
        if dt >= remaining {
            dt = remaining;
            clipped = true;
        }
        let mut halvings = 0;
        let slabs = loop {
            if !(dt >= floor) {
                return Err(Error::TimeStep { dt }.at_stage("timestep", step));
            }
            if secant {
                (velocities, harmonic) = self
                    .vertex_velocities(Some(dt))
                    .map_err(|e| e.at_stage("mesh velocity", step))?;
            }
            let slabs: Result<Vec<SlabGeometry>> = (0..self.mesh.num_cells())
                .map(|c| {
                    let tri = self.mesh.triangles()[c];
                    SlabGeometry::new(
                        c,
                        self.mesh.cell_vertices(c),
                        [velocities[tri[0]], velocities[tri[1]], velocities[tri[2]]],
                        dt,
                    )
                })
                .collect();
            match slabs {
                Ok(s) => break s,
                Err(Error::DegenerateCell { .. }) => {
                    dt *= 0.5;
                    clipped = false;
                    halvings += 1;
                }
                Err(e) => return Err(e.at_stage("timestep", step)),
            }
        };
        lap(1, &mut timer);

        let basis = &self.st_basis;
        let spatial = self.reconstructor.basis();
        let t0 = self.time;
        let source = self.source.as_deref().map(|s| s as &dyn SourceTerm);
        let predictors: Vec<Predictor> = polys
            .par_iter()
            .zip(slabs.par_iter())
            .map(|(p, g)| solve_predictor(basis, spatial, p, *g, t0, &gas, source))
            .collect::<Result<_>>()
            .map_err(|e| e.at_stage("predictor", step))?;
        lap(2, &mut timer);

        let face_integrals: Vec<State> = (0..self.mesh.num_edges())
            .into_par_iter()
            .map(|e| self.face_integral(e, &predictors, &velocities, dt, t0))
            .collect::<Result<_>>()
            .map_err(|e| e.at_stage("flux", step))?;
        let source_integrals: Vec<State> = match source {
            Some(s) => predictors.par_iter().map(|p| p.source_integral(basis, s, t0)).collect(),
            None => vec![[0.0; NVAR]; self.mesh.num_cells()],
        };
        lap(3, &mut timer);

        let new_positions: Vec<Point> = self
            .mesh
            .positions()
            .iter()
            .zip(&velocities)
            .map(|(p, v)| [p[0] + dt * v[0], p[1] + dt * v[1]])
            .collect();
        let mesh = &self.mesh;
        let averages = &self.averages;
        let updated: Vec<State> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let tri = mesh.triangles()[c];
                let new_area = signed_area(&[new_positions[tri[0]], new_positions[tri[1]], new_positions[tri[2]]]);
                let mut faces = [[0.0; NVAR]; 3];
                for (k, e) in mesh.cell_edges(c).into_iter().enumerate() {
                    let sign = if mesh.edges()[e].left.cell == c { 1.0 } else { -1.0 };
                    for v in 0..NVAR {
                        faces[k][v] = sign * face_integrals[e][v];
                    }
                }
                fv_update(
                    c,
                    &averages[c],
                    mesh.area(c),
                    new_area,
                    &faces,
                    &source_integrals[c],
                    &gas,
                )
            })
            .collect::<Result<_>>()
            .map_err(|e| e.at_stage("update", step))?;
        let mut boundary_flux = [0.0; NVAR];
        for (e, _) in self.mesh.boundary_edges() {
            for v in 0..NVAR {
                boundary_flux[v] += face_integrals[e][v];
            }
        }
        let mut source_total = [0.0; NVAR];
        for s in &source_integrals {
            for v in 0..NVAR {
                source_total[v] += s[v];
            }
        }
        self.mesh
            .set_positions(new_positions)
            .map_err(|e| e.at_stage("update", step))?;
        self.averages = updated;
        self.velocities = velocities;
        self.time = if clipped { t_end } else { self.time + dt };
        self.step = step;
        lap(4, &mut timer);

        Ok(StepReport {
            step,
            time: self.time,
            dt,
            halvings,
            max_predictor_sweeps: predictors.iter().map(|p| p.sweeps).max().unwrap_or(0),
            harmonic,
            boundary_flux,
            source: source_total,
            totals: self.totals(),
            stage_seconds,
        })
    }

    /// Space-time integral of the flux through edge `e`, outward from its left cell.
    fn face_integral(
        &self,
        e: usize,
        predictors: &[Predictor],
        velocities: &[Point],
        dt: f64,
        t0: f64,
    ) -> Result<State> {
        let edge = &self.mesh.edges()[e];
        let gas = &self.options.gas;
        let [ia, ib] = edge.vertices;
        let pos = self.mesh.positions();
        let points = face_geometry(pos[ia], pos[ib], velocities[ia], velocities[ib], dt, &self.face_rule);
        let left = &predictors[edge.left.cell];
        let ref_point = |local: usize, chi: f64| {
            let a = REFERENCE_VERTICES[local];
            let b = REFERENCE_VERTICES[(local + 1) % 3];
            [a[0] + chi * (b[0] - a[0]), a[1] + chi * (b[1] - a[1])]
        };
        let mut acc = [0.0; NVAR];
        for fp in &points {
            let xi = ref_point(edge.left.local, fp.chi);
            let qm = left.eval(&self.st_basis, [xi[0], xi[1], fp.tau]);
            let qp = match edge.right {
                EdgeNeighbor::Cell(side) => {
                    let xr = ref_point(side.local, 1.0 - fp.chi);
                    predictors[side.cell].eval(&self.st_basis, [xr[0], xr[1], fp.tau])
                }
                EdgeNeighbor::Boundary(tag) => {
                    let spec = &self.boundary[tag.0];
                    let t = t0 + fp.tau * dt;
                    let cell = edge.left.cell;
                    let diameter = circumdiameter(&self.mesh.cell_vertices(cell));
                    let bp = BoundaryPoint::new(fp.x, t, fp.normal, cell, diameter, spec.descriptor.as_ref())?;
                    let interior = |x: Point| left.eval_physical(&self.st_basis, x, fp.tau);
                    ghost_state(spec, &bp, &qm, &interior, gas)?
                }
            };
            let f = osher_flux(&qm, &qp, fp.normal, fp.vn, gas, &self.path_rule)?;
            for v in 0..NVAR {
                acc[v] += fp.weight * f[v];
            }
        }
        Ok(acc)
    }

    /// Steps until `t_end` is reached exactly, calling `observe` after each step.
    pub fn advance_to(&mut self, t_end: f64, mut observe: impl FnMut(&Self, &StepReport)) -> Result<()> {
        while self.time < t_end {
            let r = self.step(t_end)?;
            observe(self, &r);
        }
        Ok(())
    }
}

pub fn totals(mesh: &TriMesh, averages: &[State]) -> State {
    let mut out = [0.0; NVAR];
    for (c, q) in averages.iter().enumerate() {
        let a = mesh.area(c);
        for v in 0..NVAR {
            out[v] += a * q[v];
        }
    }
    out
}
