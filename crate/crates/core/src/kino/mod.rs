//! Bicycle-model feasibility checks and Hybrid A* repair of sharp turns.

pub mod dubins;
mod hybrid;
mod repair;

pub use hybrid::{hybrid_astar, hybrid_astar_curve, HybridConfig};
pub use repair::{repair_path, repair_path_with, RepairConfig, RepairResult};

use crate::geometry::{discrete_curvature, PixelPath, Point, Pose};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinoError {
    #[error("steering limit {0} rad must lie in (0, pi/2)")]
    InvalidSteering(f64),
    #[error("wheelbase {0} m must be positive")]
    InvalidWheelbase(f64),
    #[error("meters per pixel {0} must be positive")]
    InvalidScale(f64),
    #[error("no feasible path inside the slice, even at map size (segment {segment})")]
    SliceExhausted { segment: usize },
    #[error("start or goal pose is not traversable")]
    BlockedEndpoint,
    #[error("search stopped after {0} expansions")]
    NodeLimit(usize),
}

/// Kinematic bicycle: wheelbase `l` and steering limit `phi_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicModel {
    pub wheelbase: f64,
    pub phi_max: f64,
    pub meters_per_pixel: f64,
}

impl KinematicModel {
    pub fn new(wheelbase: f64, phi_max: f64, meters_per_pixel: f64) -> Result<Self, KinoError> {
        let m = KinematicModel {
            wheelbase,
            phi_max,
            meters_per_pixel,
        };
        m.validate()?;
        Ok(m)
    }

    /// Model for vehicles characterised only by their turning radius (skid
    /// steer, differential drive): unit wheelbase, matching steering limit.
    pub fn from_turning_radius(rho_min: f64, meters_per_pixel: f64) -> Result<Self, KinoError> {
        if !(rho_min > 0.0) {
            return Err(KinoError::InvalidWheelbase(rho_min));
        }
        Self::new(1.0, (1.0 / rho_min).atan(), meters_per_pixel)
    }

    pub fn validate(&self) -> Result<(), KinoError> {
        if !(self.phi_max > 0.0 && self.phi_max < FRAC_PI_2) {
            return Err(KinoError::InvalidSteering(self.phi_max));
        }
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return Err(KinoError::InvalidWheelbase(self.wheelbase));
        }
        if !(self.meters_per_pixel > 0.0 && self.meters_per_pixel.is_finite()) {
            return Err(KinoError::InvalidScale(self.meters_per_pixel));
        }
        Ok(())
    }

    /// Minimum turning radius in meters.
    pub fn rho_min(&self) -> f64 {
        min_turning_radius(self)
    }

    /// Maximum curvature in 1/m.
    pub fn k_max(&self) -> f64 {
        1.0 / self.rho_min()
    }

    pub fn rho_min_px(&self) -> f64 {
        self.rho_min() / self.meters_per_pixel
    }

    pub fn k_max_px(&self) -> f64 {
        1.0 / self.rho_min_px()
    }

    /// State derivative `(x', y', theta')` for speed `v` and steering `phi`.
    pub fn derivative(&self, state: Pose, v: f64, phi: f64) -> Pose {
        let phi = phi.clamp(-self.phi_max, self.phi_max);
        Pose::new(v * state.theta.cos(), v * state.theta.sin(), v * phi.tan() / self.wheelbase)
    }

    /// Fourth-order Runge-Kutta integration of the bicycle model.
    pub fn simulate(&self, start: Pose, v: f64, phi: f64, dt: f64, steps: usize) -> Vec<Pose> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut s = start;
        out.push(s);
        let add = |a: Pose, k: Pose, h: f64| Pose::new(a.x + h * k.x, a.y + h * k.y, a.theta + h * k.theta);
        for _ in 0..steps {
            let k1 = self.derivative(s, v, phi);
            let k2 = self.derivative(add(s, k1, dt / 2.0), v, phi);
            let k3 = self.derivative(add(s, k2, dt / 2.0), v, phi);
            let k4 = self.derivative(add(s, k3, dt), v, phi);
            s = Pose::new(
                s.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                s.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
                s.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
            );
            out.push(s);
        }
        out
    }
}

impl Default for KinematicModel {
    fn default() -> Self {
        KinematicModel {
            wheelbase: 2.5,
            phi_max: 0.5,
            meters_per_pixel: 1.0,
        }
    }
}

pub fn min_turning_radius(model: &KinematicModel) -> f64 {
    model.wheelbase / model.phi_max.tan()
}

/// Guard against `sin(alpha / 2) -> 0` for hairpin turns.
pub const VERTEX_EPS: f64 = 1e-4;

/// Distance from a path vertex with interior angle `alpha` to the centre of
/// the tangent circle of radius `rho`.
pub fn vertex_center_distance(rho: f64, alpha: f64) -> f64 {
    rho / ((alpha / 2.0).sin() + VERTEX_EPS)
}

/// A vertex whose turn exceeds the curvature limit, with its repair span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfeasibleVertex {
    pub index: usize,
    pub q: Pose,
    /// Interior angle at `q` between the incident segments, in `[0, pi]`.
    pub alpha: f64,
    /// Distance from `q` to the tangent-circle centre `a`, in pixels.
    pub s: f64,
    pub a: Pose,
    pub q1: Pose,
    pub q2: Pose,
    /// Path indices of `q1` and `q2`.
    pub i1: usize,
    pub i2: usize,
    /// Number of flagged vertices merged into this span.
    pub merged: usize,
}

/// Flags interior vertices whose discrete curvature (turn angle over the
/// incoming segment length) exceeds `k_max`, builds the tangent-circle
/// geometry for each, and merges overlapping or touching spans.
///
/// `q1`/`q2` sit on the path at the tangent-point distance `s cos(alpha/2)`
/// before and after `q`, snapped outwards to path vertices.
pub fn find_infeasible_vertices(path: &PixelPath, model: &KinematicModel) -> Vec<InfeasibleVertex> {
    let pts = path.points();
    let n = pts.len();
    if n < 3 {
        return Vec::new();
    }
    let rho = model.rho_min_px();
    let k_max = model.k_max_px();
    let arc = cumulative_arc(&pts);
    let mut spans: Vec<InfeasibleVertex> = Vec::new();
    for (j, k) in discrete_curvature(&pts).into_iter().enumerate() {
        if k.abs() <= k_max {
            continue;
        }
        let i = j + 1;
        let v = vertex_geometry(&pts, &arc, i, rho);
        match spans.last_mut() {
            Some(last) if v.i1 <= last.i2 => {
                last.i2 = last.i2.max(v.i2);
                last.q2 = anchor_pose(&pts, last.i2);
                last.merged += 1;
            }
            _ => spans.push(v),
        }
    }
    spans
}

pub(crate) fn cumulative_arc(pts: &[Point]) -> Vec<f64> {
    let mut arc = Vec::with_capacity(pts.len());
    let mut s = 0.0;
    arc.push(0.0);
    for w in pts.windows(2) {
        s += w[0].dist(w[1]);
        arc.push(s);
    }
    arc
}

/// Pose at vertex `i` facing along the segment that arrives at it (the
/// first vertex faces along the segment leaving it).
pub(crate) fn anchor_pose(pts: &[Point], i: usize) -> Pose {
    let d = if i > 0 { pts[i] - pts[i - 1] } else { pts[1] - pts[0] };
    Pose::new(pts[i].x, pts[i].y, d.heading())
}

/// Pose at vertex `i` facing along the segment that leaves it.
pub(crate) fn exit_pose(pts: &[Point], i: usize) -> Pose {
    let n = pts.len();
    let d = if i + 1 < n { pts[i + 1] - pts[i] } else { pts[i] - pts[i - 1] };
    Pose::new(pts[i].x, pts[i].y, d.heading())
}

fn vertex_geometry(pts: &[Point], arc: &[f64], i: usize, rho: f64) -> InfeasibleVertex {
    let (p, q, r) = (pts[i - 1], pts[i], pts[i + 1]);
    let (qp, qr) = (p - q, r - q);
    let alpha = qr.cross(qp).atan2(qr.dot(qp)).abs();
    let s = vertex_center_distance(rho, alpha);
    // rotate a length-s vector along QR by alpha/2 towards QP
    let side = if qr.cross(qp) >= 0.0 { 1.0 } else { -1.0 };
    let a = q + qr.unit().unwrap_or(Point::new(1.0, 0.0)).rotate(side * alpha / 2.0) * s;
    let tangent = s * (alpha / 2.0).cos();
    let i1 = arc[..i].iter().rposition(|&x| x <= arc[i] - tangent).unwrap_or(0);
    let i2 = arc[i + 1..]
        .iter()
        .position(|&x| x >= arc[i] + tangent)
        .map_or(pts.len() - 1, |k| k + i + 1);
    InfeasibleVertex {
        index: i,
        q: Pose::new(q.x, q.y, qr.heading()),
        alpha,
        s,
        a: Pose::at(a),
        q1: anchor_pose(pts, i1),
        q2: exit_pose(pts, i2),
        i1,
        i2,
        merged: 1,
    }
}
