//! Analytic, time-dependent true boundaries: closest-point map, outward
//! normals and rigid wall velocity.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Motion of a circle center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CenterPath {
    Fixed(Point),
    /// `origin + amplitude * sin(2 pi f t)`.
    Sine {
        origin: Point,
        amplitude: Point,
        frequency: f64,
    },
    /// `origin + amplitude * cos(2 pi f t)`.
    Cosine {
        origin: Point,
        amplitude: Point,
        frequency: f64,
    },
}

impl CenterPath {
    pub fn position(&self, t: f64) -> Point {
        match *self {
            CenterPath::Fixed(c) => c,
            CenterPath::Sine {
                origin,
                amplitude,
                frequency,
            } => {
                let s = (TAU * frequency * t).sin();
                [origin[0] + amplitude[0] * s, origin[1] + amplitude[1] * s]
            }
            CenterPath::Cosine {
                origin,
                amplitude,
                frequency,
            } => {
                let c = (TAU * frequency * t).cos();
                [origin[0] + amplitude[0] * c, origin[1] + amplitude[1] * c]
            }
        }
    }

    pub fn velocity(&self, t: f64) -> Point {
        match *self {
            CenterPath::Fixed(_) => [0.0, 0.0],
            CenterPath::Sine {
                amplitude, frequency, ..
            } => {
                let k = TAU * frequency * (TAU * frequency * t).cos();
                [amplitude[0] * k, amplitude[1] * k]
            }
            CenterPath::Cosine {
                amplitude, frequency, ..
            } => {
                let k = -TAU * frequency * (TAU * frequency * t).sin();
                [amplitude[0] * k, amplitude[1] * k]
            }
        }
    }
}

/// Time law of a circle radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusPath {
    Constant(f64),
    /// `r0 * exp(rate * t)`.
    Exponential {
        r0: f64,
        rate: f64,
    },
    /// `r0 * sqrt(1 - t^2 / tau^2)`, the self-similar isentropic compression law.
    Compression {
        r0: f64,
        tau: f64,
    },
}

impl RadiusPath {
    pub fn radius(&self, t: f64) -> f64 {
        match *self {
            RadiusPath::Constant(r) => r,
            RadiusPath::Exponential { r0, rate } => r0 * (rate * t).exp(),
            RadiusPath::Compression { r0, tau } => r0 * (1.0 - (t / tau).powi(2)).sqrt(),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            RadiusPath::Constant(_) => 0.0,
            RadiusPath::Exponential { r0, rate } => r0 * rate * (rate * t).exp(),
            RadiusPath::Compression { r0, tau } => {
                let h = (1.0 - (t / tau).powi(2)).sqrt();
                -r0 * t / (tau * tau * h)
            }
        }
    }
}

/// Circle `|x - c(t)| = R(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: CenterPath,
    pub radius: RadiusPath,
}

/// Result of projecting a surrogate point onto the true boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub point: Point,
    /// Signed so that `point = surrogate + distance * normal`.
    pub distance: f64,
    /// Outward radial unit normal at `point`.
    pub normal: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryDescriptor {
    Circle(Circle),
}

impl BoundaryDescriptor {
    pub fn static_circle(center: Point, radius: f64) -> Self {
        BoundaryDescriptor::Circle(Circle {
            center: CenterPath::Fixed(center),
            radius: RadiusPath::Constant(radius),
        })
    }

    /// Checks `R(t) > 0` on `[t0, t1]` at a fine sampling.
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        let BoundaryDescriptor::Circle(c) = self;
        for k in 0..=64 {
            let t = t0 + (t1 - t0) * k as f64 / 64.0;
            let r = c.radius.radius(t);
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Range(format!("boundary radius {r} is not positive at t = {t}")));
            }
        }
        Ok(())
    }

    pub fn closest_point(&self, surrogate: Point, t: f64) -> Result<Projection> {
        let BoundaryDescriptor::Circle(circle) = self;
        let c = circle.center.position(t);
        let r = circle.radius.radius(t);
        let dx = [surrogate[0] - c[0], surrogate[1] - c[1]];
        let len = dx[0].hypot(dx[1]);
        if !(len > 1e-14 * r.max(1.0)) {
            return Err(Error::Projection(format!(
                "point ({}, {}) is at the circle center; projection is ambiguous",
                surrogate[0], surrogate[1]
            )));
        }
        let normal = [dx[0] / len, dx[1] / len];
        Ok(Projection {
            point: [c[0] + r * normal[0], c[1] + r * normal[1]],
            distance: r - len,
            normal,
        })
    }

    /// Rigid-motion velocity of the boundary at a point on it.
    pub fn wall_velocity(&self, x: Point, t: f64) -> Point {
        let BoundaryDescriptor::Circle(circle) = self;
        let c = circle.center.position(t);
        let cv = circle.center.velocity(t);
        let r = circle.radius.radius(t);
        let rdot = circle.radius.rate(t);
        [cv[0] + rdot * (x[0] - c[0]) / r, cv[1] + rdot * (x[1] - c[1]) / r]
    }
}
