//! Test problems: manufactured steady flow in an expanding disk, the Kidder
//! isentropic shell compression, and cylinders oscillating in a box.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::euler::{
    conserved_to_primitive, flux_columns, primitive_to_conserved, ConservedState, GasModel, PrimitiveState, State, NVAR,
};
use crate::geometry::{BoundaryDescriptor, CenterPath, Circle, RadiusPath};
use crate::mesh::{
    average_rule, generate_annulus, generate_cylinder_in_box, generate_disk, generate_rectangle, read_mesh, Point,
    TriMesh,
};
use crate::predictor::SourceTerm;
use crate::sbm::{BoundaryKind, BoundarySpec, ExactSolution, UniformState};
use crate::scheme::{BoundaryVelocity, MeshMotion};
use crate::weno::{Basis, CellPolynomial};

/// How to obtain the initial mesh.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshRecipe {
    Disk {
        radius: f64,
        rings: usize,
    },
    Annulus {
        inner: f64,
        outer: f64,
        n_r: usize,
        n_theta: usize,
    },
    CylinderBox {
        radius: f64,
        half_width: f64,
        n_theta: usize,
        n_radial: usize,
    },
    Rectangle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
    },
    File {
        path: String,
    },
}

impl MeshRecipe {
    pub fn build(&self) -> Result<TriMesh> {
        match self {
            MeshRecipe::Disk { radius, rings } => generate_disk(*radius, *rings),
            MeshRecipe::Annulus {
                inner,
                outer,
                n_r,
                n_theta,
            } => generate_annulus(*inner, *outer, *n_r, *n_theta),
            MeshRecipe::CylinderBox {
                radius,
                half_width,
                n_theta,
                n_radial,
            } => generate_cylinder_in_box(*radius, *half_width, *n_theta, *n_radial),
            MeshRecipe::Rectangle { x0, x1, y0, y1, nx, ny } => generate_rectangle(*x0, *x1, *y0, *y1, *nx, *ny),
            MeshRecipe::File { path } => read_mesh(path),
        }
    }
}

/// Everything the solver needs for one experiment.
pub struct CaseDefinition {
    pub name: String,
    pub gas: GasModel,
    pub mesh: TriMesh,
    pub initial: Arc<dyn ExactSolution>,
    pub exact: Option<Arc<dyn ExactSolution>>,
    pub source: Option<Arc<dyn SourceTerm + Send>>,
    pub boundary: HashMap<String, BoundarySpec>,
    pub motion: MeshMotion,
    pub t_final: f64,
}

impl CaseDefinition {
    /// Cell averages of the initial state in conserved variables.
    pub fn initial_averages(&self, degree: usize) -> Result<Vec<State>> {
        cell_averages(&self.mesh, self.initial.as_ref(), 0.0, degree, &self.gas)
    }

    /// Switches the shifted-boundary correction on every tag that has a descriptor.
    pub fn set_correction(&mut self, on: bool) {
        for spec in self.boundary.values_mut() {
            if spec.descriptor.is_some() {
                spec.corrected = on;
            }
        }
    }
}

/// Cell averages of `field(., t)` with the degree-(2M+2) rule.
pub fn cell_averages(
    mesh: &TriMesh,
    field: &dyn ExactSolution,
    t: f64,
    degree: usize,
    gas: &GasModel,
) -> Result<Vec<State>> {
    let rule = average_rule(degree);
    (0..mesh.num_cells())
        .map(|c| {
            let map = mesh.reference_map(c);
            let mut acc = [0.0; NVAR];
            for (xi, w) in rule.iter() {
                let q = primitive_to_conserved(&field.primitive(map.to_physical(xi), t)?, gas)?.0;
                for v in 0..NVAR {
                    acc[v] += 2.0 * w * q[v];
                }
            }
            Ok(acc)
        })
        .collect()
}

// ---------------------------------------------------------------- manufactured

pub const MANUFACTURED_U0: f64 = 0.1;
pub const MANUFACTURED_T_FINAL: f64 = 0.5;

/// Steady exact solution `rho = p = 1 + 0.2 sin(x + y)`, `u = v = 1`.
pub fn manufactured_exact(x: Point) -> PrimitiveState {
    let r = 1.0 + 0.2 * (x[0] + x[1]).sin();
    PrimitiveState::new(r, [1.0, 1.0], r)
}

/// Source balancing the steady manufactured solution for `gamma = 1.4`.
pub fn manufactured_source(x: Point) -> State {
    let c = (x[0] + x[1]).cos();
    [0.4 * c, 0.6 * c, 0.6 * c, 1.8 * c]
}

/// Radial boundary velocity `u0 x`.
pub fn manufactured_boundary_velocity(x: Point) -> Point {
    [MANUFACTURED_U0 * x[0], MANUFACTURED_U0 * x[1]]
}

/// `div F(Q) - S` of the exact solution by central differences with step `h`.
pub fn manufactured_residual(x: Point, h: f64) -> Result<State> {
    let gas = GasModel::air();
    let flux = |p: Point| flux_columns(&primitive_to_conserved(&manufactured_exact(p), &gas)?.0, &gas);
    let (fe, _) = flux([x[0] + h, x[1]])?;
    let (fw, _) = flux([x[0] - h, x[1]])?;
    let (_, gn) = flux([x[0], x[1] + h])?;
    let (_, gs) = flux([x[0], x[1] - h])?;
    let s = manufactured_source(x);
    Ok(std::array::from_fn(|k| {
        (fe[k] - fw[k] + gn[k] - gs[k]) / (2.0 * h) - s[k]
    }))
}

pub struct ManufacturedExact;

impl ExactSolution for ManufacturedExact {
    fn primitive(&self, x: Point, _t: f64) -> Result<PrimitiveState> {
        Ok(manufactured_exact(x))
    }
}

pub struct ManufacturedSource;

impl SourceTerm for ManufacturedSource {
    fn eval(&self, x: Point, _t: f64, _q: &State) -> State {
        manufactured_source(x)
    }
}

struct RadialExpansion;

impl BoundaryVelocity for RadialExpansion {
    fn velocity(&self, _tag: &str, x: Point, _t: f64) -> Point {
        manufactured_boundary_velocity(x)
    }

    fn step_velocity(&self, _tag: &str, x: Point, _t: f64, dt: f64) -> Point {
        let k = (MANUFACTURED_U0 * dt).exp_m1() / dt;
        [k * x[0], k * x[1]]
    }
}

/// Manufactured case on a disk mesh of radius `radius` centred at the origin.
pub fn manufactured_case(mesh: TriMesh, radius: f64, corrected: bool) -> Result<CaseDefinition> {
    let exact: Arc<dyn ExactSolution> = Arc::new(ManufacturedExact);
    let descriptor = BoundaryDescriptor::Circle(Circle {
        center: CenterPath::Fixed([0.0, 0.0]),
        radius: RadiusPath::Exponential {
            r0: radius,
            rate: MANUFACTURED_U0,
        },
    });
    let boundary = mesh
        .tag_names()
        .iter()
        .map(|t| {
            (
                t.clone(),
                BoundarySpec {
                    kind: BoundaryKind::Dirichlet(exact.clone()),
                    descriptor: Some(descriptor),
                    corrected,
                },
            )
        })
        .collect();
    Ok(CaseDefinition {
        name: "manufactured".into(),
        gas: GasModel::air(),
        mesh,
        initial: exact.clone(),
        exact: Some(exact),
        source: Some(Arc::new(ManufacturedSource)),
        boundary,
        motion: MeshMotion::Harmonic(Arc::new(RadialExpansion)),
        t_final: MANUFACTURED_T_FINAL,
    })
}

// ---------------------------------------------------------------------- kidder

/// Self-similar isentropic compression of a gas shell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kidder {
    pub gamma: f64,
    pub r_inner: f64,
    pub r_outer: f64,
    pub rho_inner: f64,
    pub rho_outer: f64,
    pub entropy: f64,
}

/// Relative radial slack, in shell thicknesses, accepted by [`ExactSolution`]
/// evaluation: polygonal cells at a curved boundary stick out of the shell.
pub const KIDDER_EXTENSION: f64 = 0.5;

impl Default for Kidder {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            r_inner: 0.9,
            r_outer: 1.0,
            rho_inner: 1.0,
            rho_outer: 2.0,
            entropy: 1.0,
        }
    }
}

impl Kidder {
    pub fn gas(&self) -> GasModel {
        GasModel::new(self.gamma).expect("gamma > 1")
    }

    pub fn sound_speeds(&self) -> (f64, f64) {
        let c = |rho: f64| (self.gamma * self.entropy * rho.powf(self.gamma - 1.0)).sqrt();
        (c(self.rho_inner), c(self.rho_outer))
    }

    /// Focalisation time.
    pub fn tau(&self) -> f64 {
        let (ci, ce) = self.sound_speeds();
        (0.5 * (self.gamma - 1.0) * (self.r_outer.powi(2) - self.r_inner.powi(2)) / (ce * ce - ci * ci)).sqrt()
    }

    /// `t_f` with `h(t_f) = 1/2`.
    pub fn final_time(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.tau()
    }

    pub fn h(&self, t: f64) -> f64 {
        (1.0 - (t / self.tau()).powi(2)).sqrt()
    }

    pub fn h_dot(&self, t: f64) -> f64 {
        let tau = self.tau();
        -t / (tau * tau * self.h(t))
    }

    /// Initial density, defined by its blend formula for any radius where
    /// the blend stays positive.
    pub fn rho0(&self, r: f64) -> f64 {
        let (ri2, re2) = (self.r_inner.powi(2), self.r_outer.powi(2));
        let g1 = self.gamma - 1.0;
        let blend = (re2 - r * r) / (re2 - ri2) * self.rho_inner.powf(g1)
            + (r * r - ri2) / (re2 - ri2) * self.rho_outer.powf(g1);
        blend.powf(1.0 / g1)
    }

    fn eval_unchecked(&self, r: f64, t: f64) -> (f64, f64, f64) {
        let h = self.h(t);
        let g1 = self.gamma - 1.0;
        let rho0 = self.rho0(r / h);
        let rho = h.powf(-2.0 / g1) * rho0;
        let p = h.powf(-2.0 * self.gamma / g1) * self.entropy * rho0.powf(self.gamma);
        (rho, r * self.h_dot(t) / h, p)
    }

    /// `(rho, u_r, p)` at radius `r`, time `t`; `r` must lie in the shell.
    pub fn exact(&self, r: f64, t: f64) -> Result<(f64, f64, f64)> {
        if !(0.0..self.tau()).contains(&t) {
            return Err(Error::Range(format!("Kidder time {t} outside [0, tau)")));
        }
        let h = self.h(t);
        let (lo, hi) = (h * self.r_inner, h * self.r_outer);
        let eps = 1e-12 * hi;
        if r < lo - eps || r > hi + eps {
            return Err(Error::Range(format!(
                "radius {r} outside shell [{lo}, {hi}] at t = {t}"
            )));
        }
        Ok(self.eval_unchecked(r, t))
    }

    pub fn inner_circle(&self) -> BoundaryDescriptor {
        self.circle(self.r_inner)
    }

    pub fn outer_circle(&self) -> BoundaryDescriptor {
        self.circle(self.r_outer)
    }

    fn circle(&self, r0: f64) -> BoundaryDescriptor {
        BoundaryDescriptor::Circle(Circle {
            center: CenterPath::Fixed([0.0, 0.0]),
            radius: RadiusPath::Compression { r0, tau: self.tau() },
        })
    }

    /// Largest deviations of the entropy and of `rho h^{2/(gamma-1)} - rho0`
    /// on an `n x n` grid of the shell over `[0, t_f]`.
    pub fn identity_errors(&self, n: usize) -> (f64, f64) {
        let (mut es, mut ec) = (0.0f64, 0.0f64);
        for i in 0..=n {
            let t = self.final_time() * i as f64 / n as f64;
            let h = self.h(t);
            for j in 0..=n {
                let r0 = self.r_inner + (self.r_outer - self.r_inner) * j as f64 / n as f64;
                let (rho, _, p) = self.eval_unchecked(h * r0, t);
                es = es.max((p / rho.powf(self.gamma) - self.entropy).abs());
                ec = ec.max((rho * h.powf(2.0 / (self.gamma - 1.0)) - self.rho0(r0)).abs());
            }
        }
        (es, ec)
    }
}

impl ExactSolution for Kidder {
    fn primitive(&self, x: Point, t: f64) -> Result<PrimitiveState> {
        let r = x[0].hypot(x[1]);
        let h = self.h(t);
        let slack = KIDDER_EXTENSION * (self.r_outer - self.r_inner) * h;
        if !(t >= 0.0 && t < self.tau()) || r < h * self.r_inner - slack || r > h * self.r_outer + slack {
            return Err(Error::Range(format!("Kidder field requested at r = {r}, t = {t}")));
        }
        let (rho, ur, p) = self.eval_unchecked(r, t);
        let (c, s) = if r > 0.0 { (x[0] / r, x[1] / r) } else { (0.0, 0.0) };
        Ok(PrimitiveState::new(rho, [ur * c, ur * s], p))
    }
}

impl BoundaryVelocity for Kidder {
    fn velocity(&self, _tag: &str, x: Point, t: f64) -> Point {
        let k = self.h_dot(t) / self.h(t);
        [k * x[0], k * x[1]]
    }

    fn step_velocity(&self, _tag: &str, x: Point, t: f64, dt: f64) -> Point {
        let k = (self.h(t + dt) / self.h(t) - 1.0) / dt;
        [k * x[0], k * x[1]]
    }
}

/// Kidder shell on a mesh with tags `inner` and `outer`.
pub fn kidder_case(mesh: TriMesh, corrected: bool) -> Result<CaseDefinition> {
    let k = Kidder::default();
    for tag in ["inner", "outer"] {
        if mesh.tag_id(tag).is_none() {
            return Err(Error::Config(format!("Kidder mesh lacks boundary tag '{tag}'")));
        }
    }
    let exact: Arc<dyn ExactSolution> = Arc::new(k);
    let spec = |d: BoundaryDescriptor| BoundarySpec {
        kind: BoundaryKind::Dirichlet(exact.clone()),
        descriptor: Some(d),
        corrected,
    };
    let boundary = HashMap::from([
        ("inner".to_string(), spec(k.inner_circle())),
        ("outer".to_string(), spec(k.outer_circle())),
    ]);
    Ok(CaseDefinition {
        name: "kidder".into(),
        gas: k.gas(),
        mesh,
        initial: exact.clone(),
        exact: Some(exact),
        source: None,
        boundary,
        motion: MeshMotion::Harmonic(Arc::new(k)),
        t_final: k.final_time(),
    })
}

/// `(barycenter radius, cell-average density)` per cell.
pub fn kidder_scatter(mesh: &TriMesh, averages: &[State]) -> Vec<(f64, f64)> {
    (0..mesh.num_cells())
        .map(|c| {
            let b = mesh.barycenter(c);
            (b[0].hypot(b[1]), averages[c][0])
        })
        .collect()
}

pub fn scatter_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("radius,density\n");
    for (r, rho) in points {
        s.push_str(&format!("{r:.12e},{rho:.12e}\n"));
    }
    s
}

// ------------------------------------------------------------------- cylinders

/// Cylinder of radius 1 oscillating in `[-10, 10]^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatingCylinder {
    /// Oscillation amplitude vector (direction times `A`).
    pub amplitude: Point,
    pub frequency: f64,
    pub free_stream: [f64; 2],
    pub t_final: f64,
}

pub const CYLINDER_RADIUS: f64 = 1.0;
pub const CYLINDER_BOX_HALF_WIDTH: f64 = 10.0;

impl OscillatingCylinder {
    pub fn horizontal() -> Self {
        Self {
            amplitude: [0.1, 0.0],
            frequency: 0.1,
            free_stream: [0.0, 0.0],
            t_final: 10.0,
        }
    }

    pub fn vertical() -> Self {
        Self {
            amplitude: [0.0, 0.05],
            frequency: 0.25,
            free_stream: [0.25, 0.0],
            t_final: 8.0,
        }
    }

    pub fn center(&self) -> CenterPath {
        CenterPath::Sine {
            origin: [0.0, 0.0],
            amplitude: self.amplitude,
            frequency: self.frequency,
        }
    }

    pub fn descriptor(&self) -> BoundaryDescriptor {
        BoundaryDescriptor::Circle(Circle {
            center: self.center(),
            radius: RadiusPath::Constant(CYLINDER_RADIUS),
        })
    }

    pub fn free_stream_state(&self) -> PrimitiveState {
        PrimitiveState::new(1.0, self.free_stream, 1.0)
    }
}

impl BoundaryVelocity for OscillatingCylinder {
    fn velocity(&self, tag: &str, _x: Point, t: f64) -> Point {
        if tag == "wall" {
            self.center().velocity(t)
        } else {
            [0.0, 0.0]
        }
    }

    fn step_velocity(&self, tag: &str, _x: Point, t: f64, dt: f64) -> Point {
        if tag == "wall" {
            let (a, b) = (self.center().position(t), self.center().position(t + dt));
            [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt]
        } else {
            [0.0, 0.0]
        }
    }
}

/// Cylinder case on a mesh tagged `wall` (cylinder) and `farfield` (box).
pub fn cylinder_case(setup: OscillatingCylinder, mesh: TriMesh, corrected: bool) -> Result<CaseDefinition> {
    for tag in ["wall", "farfield"] {
        if mesh.tag_id(tag).is_none() {
            return Err(Error::Config(format!("cylinder mesh lacks boundary tag '{tag}'")));
        }
    }
    let stream: Arc<dyn ExactSolution> = Arc::new(UniformState(setup.free_stream_state()));
    let boundary = HashMap::from([
        (
            "wall".to_string(),
            BoundarySpec {
                kind: BoundaryKind::SlipWall,
                descriptor: Some(setup.descriptor()),
                corrected,
            },
        ),
        (
            "farfield".to_string(),
            BoundarySpec {
                kind: BoundaryKind::Dirichlet(stream.clone()),
                descriptor: None,
                corrected: false,
            },
        ),
    ]);
    Ok(CaseDefinition {
        name: "cylinder".into(),
        gas: GasModel::air(),
        mesh,
        initial: stream,
        exact: None,
        source: None,
        boundary,
        motion: MeshMotion::Harmonic(Arc::new(setup)),
        t_final: setup.t_final,
    })
}

// ------------------------------------------------------------------ metrology

/// L2 errors of density and of the `u` velocity component between the
/// reconstructed polynomials and `exact` at time `t`.
pub fn l2_error(
    mesh: &TriMesh,
    basis: &Basis,
    polys: &[CellPolynomial],
    exact: &dyn ExactSolution,
    t: f64,
    gas: &GasModel,
) -> Result<[f64; 2]> {
    let rule = average_rule(basis.degree());
    let mut acc = [0.0; 2];
    for (c, poly) in polys.iter().enumerate() {
        let map = mesh.reference_map(c);
        let jac = 2.0 * map.area();
        for (xi, w) in rule.iter() {
            let wh = conserved_to_primitive(&ConservedState(poly.eval_reference(basis, xi)), gas)?;
            let we = exact.primitive(map.to_physical(xi), t)?;
            acc[0] += w * jac * (wh.rho - we.rho).powi(2);
            acc[1] += w * jac * (wh.vel[0] - we.vel[0]).powi(2);
        }
    }
    Ok([acc[0].sqrt(), acc[1].sqrt()])
}

/// `ln(E1/E2) / ln(h1/h2)`.
pub fn observed_order(h1: f64, e1: f64, h2: f64, e2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Largest `|p / rho^gamma - s|` over the cell averages.
pub fn max_entropy_deviation(averages: &[State], gas: &GasModel, s: f64) -> Result<f64> {
    averages.iter().try_fold(0.0f64, |m, q| {
        Ok(m.max((crate::euler::entropy(&ConservedState(*q), gas)? - s).abs()))
    })
}

/// Largest `|p / rho^gamma - s|` of the reconstructed point values at cell
/// barycenters. Unlike the cell-average variant it carries no `O(h^2)`
/// averaging bias from the nonlinearity of the entropy.
pub fn max_entropy_deviation_pointwise(basis: &Basis, polys: &[CellPolynomial], gas: &GasModel, s: f64) -> Result<f64> {
    polys.iter().try_fold(0.0f64, |m, p| {
        let q = p.eval_reference(basis, [1.0 / 3.0, 1.0 / 3.0]);
        Ok(m.max((crate::euler::entropy(&ConservedState(q), gas)? - s).abs()))
    })
}

/// Period of a center path's oscillation.
pub fn oscillation_period(frequency: f64) -> f64 {
    1.0 / frequency
}
