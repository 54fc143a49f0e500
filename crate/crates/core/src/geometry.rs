//! Planar primitives shared by every planning stage.
//!
//! Pixel coordinates put the centre of cell `(i, j)` at the real point
//! `(i, j)`; a cell covers `[i - 0.5, i + 0.5) x [j - 0.5, j + 0.5)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Unit vector, or `None` for a (near) zero vector.
    pub fn unit(self) -> Option<Point> {
        let n = self.norm();
        (n > 1e-12).then(|| self * (1.0 / n))
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Cell whose footprint contains this point.
    pub fn cell(self) -> GridPos {
        GridPos::new(self.x.round() as i32, self.y.round() as i32)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Integer cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
}

impl GridPos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn center(self) -> Point {
        Point::new(self.x as f64, self.y as f64)
    }

    pub fn offset(self, dx: i32, dy: i32) -> GridPos {
        GridPos::new(self.x + dx, self.y + dy)
    }

    /// Octile distance: exact 8-connected path length on an empty grid.
    pub fn octile(self, other: GridPos) -> f64 {
        let dx = (self.x - other.x).unsigned_abs() as f64;
        let dy = (self.y - other.y).unsigned_abs() as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        hi - lo + lo * std::f64::consts::SQRT_2
    }
}

/// Planar position plus heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn at(p: Point) -> Self {
        Self::new(p.x, p.y, 0.0)
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn cell(&self) -> GridPos {
        self.point().cell()
    }
}

/// Ordered pose sequence in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPath {
    pub poses: Vec<Pose>,
}

impl PixelPath {
    pub fn new(poses: Vec<Pose>) -> Self {
        Self { poses }
    }

    /// Builds a path from positions, headings taken from the outgoing segment.
    pub fn from_points(points: &[Point]) -> Self {
        let mut poses: Vec<Pose> = points.iter().map(|&p| Pose::at(p)).collect();
        assign_headings(&mut poses);
        Self { poses }
    }

    pub fn points(&self) -> Vec<Point> {
        self.poses.iter().map(Pose::point).collect()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Sum of Euclidean distances between consecutive points, in pixels.
    pub fn length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].point().dist(w[1].point()))
            .sum()
    }

    /// Largest gap between consecutive points, in pixels.
    pub fn max_gap(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].point().dist(w[1].point()))
            .fold(0.0, f64::max)
    }
}

/// Sets each heading from the segment leaving it; the last pose keeps the
/// heading of the segment arriving at it.
pub fn assign_headings(poses: &mut [Pose]) {
    let n = poses.len();
    for i in 0..n {
        let d = if i + 1 < n {
            poses[i + 1].point() - poses[i].point()
        } else if i > 0 {
            poses[i].point() - poses[i - 1].point()
        } else {
            continue;
        };
        if d.norm() > 1e-12 {
            poses[i].theta = d.heading();
        } else if i > 0 {
            poses[i].theta = poses[i - 1].theta;
        }
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Signed heading change at each interior vertex divided by the length of
/// the segment arriving at it. Entry `i` belongs to vertex `i + 1`; a
/// zero-length incoming segment yields 0.
pub fn discrete_curvature(points: &[Point]) -> Vec<f64> {
    if points.len() < 3 {
        return Vec::new();
    }
    points
        .windows(3)
        .map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            let len = a.norm();
            if len <= 1e-12 || b.norm() <= 1e-12 {
                return 0.0;
            }
            wrap_angle(b.heading() - a.heading()) / len
        })
        .collect()
}

/// Largest absolute value of [`discrete_curvature`], 0 for short paths.
pub fn max_curvature(points: &[Point]) -> f64 {
    discrete_curvature(points).into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Resamples a polyline at uniform arc length no larger than `spacing`,
/// keeping both endpoints. Consecutive duplicates are dropped first.
pub fn resample_uniform(points: &[Point], spacing: f64) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last().is_none_or(|q: &Point| q.dist(p) > 1e-9) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return pts;
    }
    let total: f64 = pts.windows(2).map(|w| w[0].dist(w[1])).sum();
    let n = (total / spacing).ceil().max(1.0) as usize;
    let h = total / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(pts[0]);
    let (mut seg, mut seg_start) = (0usize, 0.0f64);
    for k in 1..n {
        let s = k as f64 * h;
        while seg + 1 < pts.len() - 1 && seg_start + pts[seg].dist(pts[seg + 1]) < s {
            seg_start += pts[seg].dist(pts[seg + 1]);
            seg += 1;
        }
        let len = pts[seg].dist(pts[seg + 1]);
        let t = ((s - seg_start) / len).clamp(0.0, 1.0);
        out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * t);
    }
    out.push(*pts.last().unwrap());
    out
}

/// Winding number of `polygon` around `p`; nonzero means inside.
///
/// The polygon is implicitly closed. Points exactly on an edge may report
/// either side.
pub fn winding_number(p: Point, polygon: &[Point]) -> i32 {
    let n = polygon.len();
    let mut wn = 0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Signed area (shoelace), positive for counter-clockwise rings.
pub fn signed_area(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| polygon[i].cross(polygon[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

/// Distance from `p` to segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Distance between segment `[a, b]` and the footprint of cell `c`
/// (zero when they overlap).
pub fn segment_cell_distance(a: Point, b: Point, c: GridPos) -> f64 {
    let (x0, x1) = (c.x as f64 - 0.5, c.x as f64 + 0.5);
    let (y0, y1) = (c.y as f64 - 0.5, c.y as f64 + 0.5);
    let inside = |p: Point| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    if inside(a) || inside(b) {
        return 0.0;
    }
    let corners = [
        Point::new(x0, y0),
        Point::new(x1, y0),
        Point::new(x1, y1),
        Point::new(x0, y1),
    ];
    for i in 0..4 {
        if segments_intersect(a, b, corners[i], corners[(i + 1) % 4]) {
            return 0.0;
        }
    }
    let box_dist = |p: Point| {
        let dx = (x0 - p.x).max(0.0).max(p.x - x1);
        let dy = (y0 - p.y).max(0.0).max(p.y - y1);
        dx.hypot(dy)
    };
    let mut best = box_dist(a).min(box_dist(b));
    for &k in &corners {
        best = best.min(point_segment_distance(k, a, b));
    }
    best
}
