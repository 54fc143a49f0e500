//! Oriented map slices around a start/target pair.
//!
//! The oriented rectangle `d1..d4` is cut out on the parent's own grid: the
//! submap is the integer-aligned bounding box of the rectangle, and every
//! cell whose centre falls outside the rectangle (or outside the parent)
//! is an obstacle. Slice and parent coordinates differ by a pure integer
//! offset, so conversions are exact.

use super::{CellClass, IntermediateMap};
use crate::geometry::{GridPos, Point, Pose};

/// Below this start/target separation (pixels) the pair is treated as
/// coincident and an axis-aligned box is used instead.
pub const MIN_SLICE_SEPARATION: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MapSlice {
    /// `d1, d2, d3, d4` in parent pixel coordinates.
    pub corners: [Point; 4],
    /// Parent coordinate of slice cell `(0, 0)`.
    pub origin: GridPos,
    pub submap: IntermediateMap,
    pub d_x: f64,
    pub d_y: f64,
}

impl MapSlice {
    pub fn to_parent(&self, p: Point) -> Point {
        p + self.origin.center()
    }

    pub fn to_slice(&self, p: Point) -> Point {
        p - self.origin.center()
    }

    pub fn pose_to_parent(&self, p: Pose) -> Pose {
        let q = self.to_parent(p.point());
        Pose::new(q.x, q.y, p.theta)
    }

    pub fn pose_to_slice(&self, p: Pose) -> Pose {
        let q = self.to_slice(p.point());
        Pose::new(q.x, q.y, p.theta)
    }

    /// True once the oriented rectangle contains every cell of `parent`.
    pub fn covers_parent(&self, parent: &IntermediateMap) -> bool {
        let (w, h) = (parent.width() as f64 - 1.0, parent.height() as f64 - 1.0);
        [
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, h),
            Point::new(0.0, h),
        ]
        .into_iter()
        .all(|c| in_quad(&self.corners, c))
    }
}

fn in_quad(q: &[Point; 4], p: Point) -> bool {
    // corners wind consistently; accept either orientation
    let mut sign = 0.0;
    for i in 0..4 {
        let c = (q[(i + 1) % 4] - q[i]).cross(p - q[i]);
        if c.abs() <= 1e-9 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

/// Corner points `d1..d4` of the slice rectangle around `s -> t`.
pub fn slice_corners(s: Point, t: Point, d_x: f64, d_y: f64) -> [Point; 4] {
    let delta = t - s;
    match delta.unit() {
        Some(u) if delta.norm() >= MIN_SLICE_SEPARATION => {
            let v = Point::new(-u.y, u.x);
            [
                s + v * d_y - u * d_x,
                s - v * d_y - u * d_x,
                t - v * d_y + u * d_x,
                t + v * d_y + u * d_x,
            ]
        }
        _ => {
            let m = d_x.max(d_y);
            [
                Point::new(s.x - m, s.y + m),
                Point::new(s.x - m, s.y - m),
                Point::new(s.x + m, s.y - m),
                Point::new(s.x + m, s.y + m),
            ]
        }
    }
}

/// Extracts the oriented slice around `s -> t` with offsets `d_x` (along the
/// segment) and `d_y` (across it).
pub fn slice_map(map: &IntermediateMap, s: Pose, t: Pose, d_x: f64, d_y: f64) -> MapSlice {
    let corners = slice_corners(s.point(), t.point(), d_x, d_y);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for c in &corners {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    // clamp to the parent, keeping at least one cell
    let cx0 = (x0.floor() as i64).clamp(0, map.width() as i64 - 1) as i32;
    let cy0 = (y0.floor() as i64).clamp(0, map.height() as i64 - 1) as i32;
    let cx1 = (x1.ceil() as i64).clamp(0, map.width() as i64 - 1) as i32;
    let cy1 = (y1.ceil() as i64).clamp(0, map.height() as i64 - 1) as i32;
    let origin = GridPos::new(cx0, cy0);
    let w = (cx1 - cx0 + 1) as usize;
    let h = (cy1 - cy0 + 1) as usize;
    let mut submap = map.crop(origin, w, h);
    let cells = submap.cells_mut();
    for y in 0..h {
        for x in 0..w {
            let p = Point::new((cx0 + x as i32) as f64, (cy0 + y as i32) as f64);
            if !in_quad(&corners, p) {
                cells[y * w + x] = CellClass::Obstacle;
            }
        }
    }
    MapSlice {
        corners,
        origin,
        submap,
        d_x,
        d_y,
    }
}
