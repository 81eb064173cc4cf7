//! Ghost states at boundary quadrature points, with the optional shifted
//! boundary polynomial correction.
//!
//! The correction replaces boundary data taken at the true-boundary point
//! `x = x~ + d n` by `phi_D(x) - [phi_h(x) - phi_h(x~)]`, where `phi_h` is the
//! interior polynomial evaluated off-element through its affine map.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::euler::{conserved_to_primitive, primitive_to_conserved, ConservedState, GasModel, PrimitiveState, State};
use crate::geometry::{BoundaryDescriptor, Projection};
use crate::mesh::Point;

/// Exterior data `g(x, t)` in primitive variables.
pub trait ExactSolution: Send + Sync {
    fn primitive(&self, x: Point, t: f64) -> Result<PrimitiveState>;
}

/// Constant exterior state.
#[derive(Clone, Copy, Debug)]
pub struct UniformState(pub PrimitiveState);

impl ExactSolution for UniformState {
    fn primitive(&self, _x: Point, _t: f64) -> Result<PrimitiveState> {
        Ok(self.0)
    }
}

#[derive(Clone)]
pub enum BoundaryKind {
    Dirichlet(Arc<dyn ExactSolution>),
    SlipWall,
}

impl std::fmt::Debug for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryKind::Dirichlet(_) => f.write_str("Dirichlet"),
            BoundaryKind::SlipWall => f.write_str("SlipWall"),
        }
    }
}

/// Boundary condition bound to one tag.
#[derive(Clone, Debug)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub descriptor: Option<BoundaryDescriptor>,
    pub corrected: bool,
}

/// Maximum projection distance in cell diameters.
pub const PROJECTION_GUARD: f64 = 2.0;

/// One space-time boundary quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub surrogate: Point,
    pub t: f64,
    /// Outward unit normal of the surrogate edge.
    pub edge_normal: Point,
    pub cell: usize,
    pub cell_diameter: f64,
    pub projection: Option<Projection>,
}

impl BoundaryPoint {
    /// Projects onto `descriptor` (if any) and checks the distance guard.
    pub fn new(
        surrogate: Point,
        t: f64,
        edge_normal: Point,
        cell: usize,
        cell_diameter: f64,
        descriptor: Option<&BoundaryDescriptor>,
    ) -> Result<Self> {
        let projection = descriptor.map(|d| d.closest_point(surrogate, t)).transpose()?;
        if let Some(p) = &projection {
            if p.distance.abs() > PROJECTION_GUARD * cell_diameter {
                return Err(Error::Projection(format!(
                    "cell {cell}: true boundary is {:.3e} away from ({:.6}, {:.6}), more than {PROJECTION_GUARD} cell diameters",
                    p.distance.abs(),
                    surrogate[0],
                    surrogate[1]
                )));
            }
        }
        Ok(Self {
            surrogate,
            t,
            edge_normal,
            cell,
            cell_diameter,
            projection,
        })
    }

    /// True-boundary point, or the surrogate point without a descriptor.
    pub fn true_point(&self) -> Point {
        self.projection.map(|p| p.point).unwrap_or(self.surrogate)
    }
}

fn primitive_array(q: &State, gas: &GasModel) -> Result<[f64; 4]> {
    Ok(conserved_to_primitive(&ConservedState(*q), gas)?.as_array())
}

fn conserved(w: [f64; 4], gas: &GasModel) -> Result<State> {
    Ok(primitive_to_conserved(&PrimitiveState::from_array(w), gas)?.0)
}

/// `Q^BC = g(x, t)` at the true-boundary point associated with `x~`.
pub fn ghost_dirichlet_uncorrected(
    point: &BoundaryPoint,
    provider: &dyn ExactSolution,
    gas: &GasModel,
) -> Result<State> {
    let w = provider.primitive(point.true_point(), point.t)?;
    Ok(primitive_to_conserved(&w, gas)?.0)
}

/// `phi* = phi_D(x) - [phi_h(x) - phi_h(x~)]` in primitive variables;
/// `interior` evaluates the cell polynomial at a physical point.
pub fn ghost_dirichlet_corrected(
    point: &BoundaryPoint,
    provider: &dyn ExactSolution,
    interior: &dyn Fn(Point) -> State,
    gas: &GasModel,
) -> Result<State> {
    let Some(_) = point.projection else {
        return ghost_dirichlet_uncorrected(point, provider, gas);
    };
    let x = point.true_point();
    let data = provider.primitive(x, point.t)?.as_array();
    let at_x = primitive_array(&interior(x), gas)?;
    let at_s = primitive_array(&interior(point.surrogate), gas)?;
    let mut w = [0.0; 4];
    for i in 0..4 {
        w[i] = data[i] - (at_x[i] - at_s[i]);
    }
    conserved(w, gas)
}

/// Moving slip wall: density and pressure mirrored, `u^BC = 2 u^b - u-`.
///
/// Uncorrected: `u^b = (w.n~) n~ + (u-.t~) t~` with the surrogate normal and
/// `w` at `x~`. Corrected: true normal `n` at `x` and normal datum
/// `(w.n)(x) - [u_h(x) - u_h(x~)].n`.
pub fn ghost_slipwall(
    point: &BoundaryPoint,
    q_minus: &State,
    descriptor: Option<&BoundaryDescriptor>,
    corrected: bool,
    interior: &dyn Fn(Point) -> State,
    gas: &GasModel,
) -> Result<State> {
    let w_minus = primitive_array(q_minus, gas)?;
    let u = [w_minus[1], w_minus[2]];
    let (n, wn) = match (corrected, point.projection, descriptor) {
        (true, Some(p), Some(d)) => {
            let n = p.normal;
            let w = d.wall_velocity(p.point, point.t);
            let ux = primitive_array(&interior(p.point), gas)?;
            let us = primitive_array(&interior(point.surrogate), gas)?;
            let jump = (ux[1] - us[1]) * n[0] + (ux[2] - us[2]) * n[1];
            (n, w[0] * n[0] + w[1] * n[1] - jump)
        }
        _ => {
            let n = point.edge_normal;
            let w = descriptor
                .map(|d| d.wall_velocity(point.surrogate, point.t))
                .unwrap_or([0.0, 0.0]);
            (n, w[0] * n[0] + w[1] * n[1])
        }
    };
    let tangent = [-n[1], n[0]];
    let ut = u[0] * tangent[0] + u[1] * tangent[1];
    let ub = [wn * n[0] + ut * tangent[0], wn * n[1] + ut * tangent[1]];
    conserved([w_minus[0], 2.0 * ub[0] - u[0], 2.0 * ub[1] - u[1], w_minus[3]], gas)
}

/// Ghost state for one boundary quadrature point.
pub fn ghost_state(
    spec: &BoundarySpec,
    point: &BoundaryPoint,
    q_minus: &State,
    interior: &dyn Fn(Point) -> State,
    gas: &GasModel,
) -> Result<State> {
    match &spec.kind {
        BoundaryKind::Dirichlet(g) if spec.corrected => ghost_dirichlet_corrected(point, g.as_ref(), interior, gas),
        BoundaryKind::Dirichlet(g) => ghost_dirichlet_uncorrected(point, g.as_ref(), gas),
        BoundaryKind::SlipWall => {
            ghost_slipwall(point, q_minus, spec.descriptor.as_ref(), spec.corrected, interior, gas)
        }
    }
}
