//! Ideal-gas Euler physics: equation of state, conversions between conserved
//! and primitive variables, the physical flux tensor and the eigenstructure
//! of the ALE Jacobian `dF.n/dQ - (V.n) I`.
//!
//! Conserved ordering is `(rho, rho u, rho v, rho E)`.

use crate::error::{Error, Result};

/// Number of conserved variables in 2D.
pub const NVAR: usize = 4;

/// Raw conserved vector.
pub type State = [f64; NVAR];

/// Perfect gas with constant ratio of specific heats.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasModel {
    gamma: f64,
}

impl GasModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidGas(gamma));
        }
        Ok(Self { gamma })
    }

    /// Air.
    pub fn air() -> Self {
        Self { gamma: 1.4 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn to_primitive(&self, q: &ConservedState) -> Result<PrimitiveState> {
        conserved_to_primitive(q, self)
    }

    pub fn to_conserved(&self, w: &PrimitiveState) -> Result<ConservedState> {
        primitive_to_conserved(w, self)
    }

    pub fn sound_speed(&self, rho: f64, p: f64) -> f64 {
        (self.gamma * p / rho).sqrt()
    }
}

/// Conserved state `(rho, rho u, rho v, rho E)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ConservedState(pub State);

impl ConservedState {
    pub fn new(rho: f64, mom: [f64; 2], rho_e: f64) -> Self {
        Self([rho, mom[0], mom[1], rho_e])
    }

    pub fn rho(&self) -> f64 {
        self.0[0]
    }

    pub fn mom(&self) -> [f64; 2] {
        [self.0[1], self.0[2]]
    }

    pub fn rho_e(&self) -> f64 {
        self.0[3]
    }

    /// Specific internal energy `e = rhoE/rho - |u|^2/2`.
    pub fn internal_energy(&self) -> f64 {
        let rho = self.0[0];
        let u = self.0[1] / rho;
        let v = self.0[2] / rho;
        self.0[3] / rho - 0.5 * (u * u + v * v)
    }
}

impl From<State> for ConservedState {
    fn from(s: State) -> Self {
        Self(s)
    }
}

/// Primitive state `(rho, u, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimitiveState {
    pub rho: f64,
    pub vel: [f64; 2],
    pub p: f64,
}

impl PrimitiveState {
    pub fn new(rho: f64, vel: [f64; 2], p: f64) -> Self {
        Self { rho, vel, p }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.rho, self.vel[0], self.vel[1], self.p]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            rho: a[0],
            vel: [a[1], a[2]],
            p: a[3],
        }
    }
}

/// `p = (gamma - 1) rho e`.
pub fn eos_pressure(rho: f64, e: f64, gas: &GasModel) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidState(format!("non-positive density {rho:e}")));
    }
    if !(e > 0.0) {
        return Err(Error::InvalidState(format!("non-positive internal energy {e:e}")));
    }
    Ok((gas.gamma - 1.0) * rho * e)
}

pub fn conserved_to_primitive(q: &ConservedState, gas: &GasModel) -> Result<PrimitiveState> {
    let [rho, mx, my, rho_e] = q.0;
    if !(rho > 0.0) {
        return Err(Error::InvalidState(format!("non-positive density {rho:e}")));
    }
    let u = mx / rho;
    let v = my / rho;
    let p = (gas.gamma - 1.0) * (rho_e - 0.5 * rho * (u * u + v * v));
    if !(p > 0.0) {
        return Err(Error::InvalidState(format!(
            "non-positive pressure {p:e} (rho {rho:e})"
        )));
    }
    Ok(PrimitiveState { rho, vel: [u, v], p })
}

pub fn primitive_to_conserved(w: &PrimitiveState, gas: &GasModel) -> Result<ConservedState> {
    if !(w.rho > 0.0) {
        return Err(Error::InvalidState(format!("non-positive density {:e}", w.rho)));
    }
    if !(w.p > 0.0) {
        return Err(Error::InvalidState(format!("non-positive pressure {:e}", w.p)));
    }
    let [u, v] = w.vel;
    let rho_e = w.p / (gas.gamma - 1.0) + 0.5 * w.rho * (u * u + v * v);
    Ok(ConservedState([w.rho, w.rho * u, w.rho * v, rho_e]))
}

/// Pressure of a raw conserved vector with positivity checks.
#[inline]
pub fn pressure(q: &State, gas: &GasModel) -> Result<f64> {
    Ok(conserved_to_primitive(&ConservedState(*q), gas)?.p)
}

/// Flux tensor: `flux[k][d]` is the `d`-th spatial column of row `k`.
pub fn physical_flux(q: &ConservedState, gas: &GasModel) -> Result<[[f64; 2]; NVAR]> {
    let w = conserved_to_primitive(q, gas)?;
    let [u, v] = w.vel;
    let p = w.p;
    let [_, mx, my, rho_e] = q.0;
    let h_tot = rho_e + p; // rho H
    Ok([
        [mx, my],
        [mx * u + p, mx * v],
        [my * u, my * v + p],
        [h_tot * u, h_tot * v],
    ])
}

/// Both flux columns at once without building `ConservedState`.
#[inline]
pub fn flux_columns(q: &State, gas: &GasModel) -> Result<(State, State)> {
    let rho = q[0];
    if !(rho > 0.0) {
        return Err(Error::InvalidState(format!("non-positive density {rho:e}")));
    }
    let u = q[1] / rho;
    let v = q[2] / rho;
    let p = (gas.gamma - 1.0) * (q[3] - 0.5 * rho * (u * u + v * v));
    if !(p > 0.0) {
        return Err(Error::InvalidState(format!(
            "non-positive pressure {p:e} (rho {rho:e})"
        )));
    }
    let h = q[3] + p;
    Ok((
        [q[1], q[1] * u + p, q[2] * u, h * u],
        [q[2], q[1] * v, q[2] * v + p, h * v],
    ))
}

/// `F(q).n - vn q`.
#[inline]
pub fn ale_normal_flux(q: &State, n: [f64; 2], vn: f64, gas: &GasModel) -> Result<State> {
    let (f, g) = flux_columns(q, gas)?;
    let mut out = [0.0; NVAR];
    for k in 0..NVAR {
        out[k] = f[k] * n[0] + g[k] * n[1] - vn * q[k];
    }
    Ok(out)
}

/// Eigen-decomposition `A = R diag(values) L` with `L = R^{-1}`.
#[derive(Clone, Copy, Debug)]
pub struct AleEigen {
    pub values: [f64; NVAR],
    /// Columns are right eigenvectors: `right[row][col]`.
    pub right: [[f64; NVAR]; NVAR],
    /// Rows are left eigenvectors.
    pub left: [[f64; NVAR]; NVAR],
}

impl AleEigen {
    /// `R |diag(values)| L`.
    pub fn abs_matrix(&self) -> [[f64; NVAR]; NVAR] {
        let mut out = [[0.0; NVAR]; NVAR];
        for i in 0..NVAR {
            for j in 0..NVAR {
                let mut s = 0.0;
                for k in 0..NVAR {
                    s += self.right[i][k] * self.values[k].abs() * self.left[k][j];
                }
                out[i][j] = s;
            }
        }
        out
    }

    /// `R |diag(values)| L x` without forming the matrix.
    #[inline]
    pub fn apply_abs(&self, x: &State) -> State {
        let mut c = [0.0; NVAR];
        for k in 0..NVAR {
            let mut s = 0.0;
            for j in 0..NVAR {
                s += self.left[k][j] * x[j];
            }
            c[k] = s * self.values[k].abs();
        }
        let mut out = [0.0; NVAR];
        for i in 0..NVAR {
            let mut s = 0.0;
            for k in 0..NVAR {
                s += self.right[i][k] * c[k];
            }
            out[i] = s;
        }
        out
    }
}

/// Eigenstructure of `dF.n/dQ - vn I` for a unit normal `n`.
///
/// Ordering: acoustic `-c`, entropy, shear, acoustic `+c`.
pub fn ale_eigen(q: &ConservedState, n: [f64; 2], vn: f64, gas: &GasModel) -> Result<AleEigen> {
    let w = conserved_to_primitive(q, gas)?;
    let g1 = gas.gamma - 1.0;
    let [u, v] = w.vel;
    let c2 = gas.gamma * w.p / w.rho;
    let c = c2.sqrt();
    let [nx, ny] = n;
    let (tx, ty) = (-ny, nx);
    let un = u * nx + v * ny;
    let ut = u * tx + v * ty;
    let q2 = u * u + v * v;
    let h = (q.0[3] + w.p) / w.rho;

    let values = [un - vn - c, un - vn, un - vn, un - vn + c];
    let right = [
        [1.0, 1.0, 0.0, 1.0],
        [u - c * nx, u, tx, u + c * nx],
        [v - c * ny, v, ty, v + c * ny],
        [h - c * un, 0.5 * q2, ut, h + c * un],
    ];
    let inv2c2 = 0.5 / c2;
    let left = [
        [
            (0.5 * g1 * q2 + c * un) * inv2c2,
            -(g1 * u + c * nx) * inv2c2,
            -(g1 * v + c * ny) * inv2c2,
            g1 * inv2c2,
        ],
        [1.0 - 0.5 * g1 * q2 / c2, g1 * u / c2, g1 * v / c2, -g1 / c2],
        [-ut, tx, ty, 0.0],
        [
            (0.5 * g1 * q2 - c * un) * inv2c2,
            -(g1 * u - c * nx) * inv2c2,
            -(g1 * v - c * ny) * inv2c2,
            g1 * inv2c2,
        ],
    ];
    Ok(AleEigen { values, right, left })
}

/// `S = p / rho^gamma`.
pub fn entropy(q: &ConservedState, gas: &GasModel) -> Result<f64> {
    let w = conserved_to_primitive(q, gas)?;
    Ok(w.p / w.rho.powf(gas.gamma))
}

/// Largest `|lambda|` of the ALE Jacobian: `|u.n - vn| + c`.
pub fn max_signal_speed(q: &ConservedState, n: [f64; 2], vn: f64, gas: &GasModel) -> Result<f64> {
    let w = conserved_to_primitive(q, gas)?;
    let un = w.vel[0] * n[0] + w.vel[1] * n[1];
    Ok((un - vn).abs() + gas.sound_speed(w.rho, w.p))
}
