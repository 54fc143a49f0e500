//! Selection of candidate trail poses near an off-trail goal.

use super::{dbscan, TrailNetwork};
use crate::geometry::{GridPos, Point, Pose};

/// Query for [`find_closest_poses`]. Sizes are half-extents in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalPoseQuery {
    pub g_o: Pose,
    /// Heading of the polygon's main axis (towards the other endpoint).
    pub direction: f64,
    pub poly_md: f64,
    pub poly_sd: f64,
    pub poly_md_max: f64,
    pub poly_sd_max: f64,
    pub md_i: f64,
    pub sd_i: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
}

impl GoalPoseQuery {
    pub fn new(g_o: Pose, direction: f64) -> Self {
        GoalPoseQuery {
            g_o,
            direction,
            poly_md: 50.0,
            poly_sd: 50.0,
            poly_md_max: 800.0,
            poly_sd_max: 800.0,
            md_i: 50.0,
            sd_i: 50.0,
            dbscan_eps: 10.0,
            dbscan_min_pts: 3,
        }
    }

    pub fn is_valid(&self) -> bool {
        0.0 < self.poly_md
            && self.poly_md <= self.poly_md_max
            && 0.0 < self.poly_sd
            && self.poly_sd <= self.poly_sd_max
            && self.md_i > 0.0
            && self.sd_i > 0.0
            && self.dbscan_eps > 0.0
            && self.dbscan_min_pts >= 1
    }
}

/// Rectangle centred at `center` with half-extents along `u` (main) and
/// its left normal (side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point,
    pub u: Point,
    pub half_md: f64,
    pub half_sd: f64,
}

impl OrientedRect {
    pub fn new(center: Point, heading: f64, half_md: f64, half_sd: f64) -> Self {
        OrientedRect {
            center,
            u: Point::new(heading.cos(), heading.sin()),
            half_md,
            half_sd,
        }
    }

    fn v(&self) -> Point {
        Point::new(-self.u.y, self.u.x)
    }

    pub fn corners(&self) -> [Point; 4] {
        let (a, b) = (self.u * self.half_md, self.v() * self.half_sd);
        let c = self.center;
        [c - a - b, c + a - b, c + a + b, c - a + b]
    }

    /// Axis-aligned bounds, padded by `pad`.
    pub fn bounds(&self, pad: f64) -> (Point, Point) {
        let ex = self.half_md * self.u.x.abs() + self.half_sd * self.u.y.abs() + pad;
        let ey = self.half_md * self.u.y.abs() + self.half_sd * self.u.x.abs() + pad;
        (
            Point::new(self.center.x - ex, self.center.y - ey),
            Point::new(self.center.x + ex, self.center.y + ey),
        )
    }

    /// Cell centre strictly inside.
    pub fn covers(&self, c: GridPos) -> bool {
        let d = c.center() - self.center;
        d.dot(self.u).abs() < self.half_md && d.dot(self.v()).abs() < self.half_sd
    }

    /// Cell square touches the rectangle (separating-axis test).
    pub fn intersects(&self, c: GridPos) -> bool {
        let d = c.center() - self.center;
        let (u, v) = (self.u, self.v());
        let sq_u = 0.5 * (u.x.abs() + u.y.abs());
        let sq_v = 0.5 * (v.x.abs() + v.y.abs());
        let rect_x = self.half_md * u.x.abs() + self.half_sd * v.x.abs();
        let rect_y = self.half_md * u.y.abs() + self.half_sd * v.y.abs();
        d.dot(u).abs() <= self.half_md + sq_u
            && d.dot(v).abs() <= self.half_sd + sq_v
            && d.x.abs() <= 0.5 + rect_x
            && d.y.abs() <= 0.5 + rect_y
    }
}

fn query(net: &TrailNetwork, rect: &OrientedRect, test: impl Fn(&OrientedRect, GridPos) -> bool) -> Vec<GridPos> {
    let (lo, hi) = rect.bounds(1.0);
    let mut out: Vec<GridPos> = net.in_box(lo, hi).filter(|&c| test(rect, c)).collect();
    out.sort_unstable_by_key(|p| (p.y, p.x));
    out
}

/// Candidate trail poses near `q.g_o`. Never empty: when nothing is found
/// the goal itself is returned.
///
/// The query rectangle grows by `(md_i, sd_i)` until trail cells are
/// strictly covered; those are clustered and the point nearest the goal
/// is kept per cluster. Failing that, the growth restarts from the initial
/// size testing for cells that merely touch the rectangle, and more than
/// one such cell is returned as is.
pub fn find_closest_poses(net: &TrailNetwork, q: &GoalPoseQuery) -> Vec<Pose> {
    let goal = q.g_o.point();
    let pose_at = |c: GridPos| Pose::new(c.x as f64, c.y as f64, net.local_direction(c, q.direction));
    if net.is_empty() || !q.is_valid() {
        return vec![q.g_o];
    }
    let grow = |test: &dyn Fn(&OrientedRect, GridPos) -> bool| -> Vec<GridPos> {
        let (mut md, mut sd) = (q.poly_md, q.poly_sd);
        while md <= q.poly_md_max && sd <= q.poly_sd_max {
            let rect = OrientedRect::new(goal, q.direction, md, sd);
            let found = query(net, &rect, test);
            if !found.is_empty() {
                return found;
            }
            md += q.md_i;
            sd += q.sd_i;
        }
        Vec::new()
    };
    let covered = grow(&|r, c| r.covers(c));
    if covered.is_empty() {
        let touched = grow(&|r, c| r.intersects(c));
        if touched.len() > 1 {
            return touched.into_iter().map(pose_at).collect();
        }
        return vec![q.g_o];
    }
    let pts: Vec<Point> = covered.iter().map(|c| c.center()).collect();
    dbscan(&pts, q.dbscan_eps, q.dbscan_min_pts)
        .into_iter()
        .map(|cluster| {
            let best = cluster
                .into_iter()
                .min_by(|&a, &b| pts[a].dist(goal).total_cmp(&pts[b].dist(goal)).then(a.cmp(&b)))
                .expect("clusters are non-empty");
            pose_at(covered[best])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::{CellClass, GeoTransform, IntermediateMap};
    use proptest::prelude::*;

    fn net_from(cells: &[GridPos], w: usize, h: usize) -> TrailNetwork {
        let mut m = IntermediateMap::new(w, h, GeoTransform::unit());
        for &c in cells {
            m.set(c, CellClass::Trail);
        }
        TrailNetwork::build(&m, 1.0).unwrap()
    }

    #[test]
    fn goal_on_isolated_point() {
        let net = net_from(&[GridPos::new(40, 40)], 100, 100);
        let r = find_closest_poses(&net, &GoalPoseQuery::new(Pose::new(40.0, 40.0, 0.0), 0.0));
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].x, r[0].y), (40.0, 40.0));
    }

    #[test]
    fn empty_network_returns_goal() {
        let net = net_from(&[], 10, 10);
        let g = Pose::new(3.0, 4.0, 1.0);
        assert_eq!(find_closest_poses(&net, &GoalPoseQuery::new(g, 0.0)), vec![g]);
    }

    #[test]
    fn two_flanking_clusters() {
        // two vertical trail stubs of 10 cells each, left and right of the goal
        let left: Vec<GridPos> = (0..10).map(|i| GridPos::new(80, 95 + i)).collect();
        let right: Vec<GridPos> = (0..10).map(|i| GridPos::new(130, 92 + i)).collect();
        let cells: Vec<GridPos> = left.iter().chain(&right).copied().collect();
        let net = net_from(&cells, 200, 200);
        let g = Point::new(100.0, 100.0);
        let r = find_closest_poses(&net, &GoalPoseQuery::new(Pose::at(g), 0.0));
        assert_eq!(r.len(), 2);
        // brute-force per-cluster argmin
        let argmin = |c: &[GridPos]| *c.iter().min_by(|a, b| a.center().dist(g).total_cmp(&b.center().dist(g))).unwrap();
        let mut want = vec![argmin(&left), argmin(&right)];
        let mut got: Vec<GridPos> = r.iter().map(|p| p.cell()).collect();
        want.sort();
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn polygon_grows_until_points_found() {
        let net = net_from(&[GridPos::new(10, 170)], 200, 200);
        let r = find_closest_poses(&net, &GoalPoseQuery::new(Pose::new(10.0, 10.0, 0.0), 0.0));
        assert_eq!(r[0].cell(), GridPos::new(10, 170));
    }

    #[test]
    fn rect_cover_and_intersect() {
        let r = OrientedRect::new(Point::new(0.0, 0.0), 0.0, 2.0, 1.0);
        assert!(r.covers(GridPos::new(1, 0)));
        assert!(!r.covers(GridPos::new(2, 0)));
        assert!(r.intersects(GridPos::new(2, 0)));
        assert!(r.intersects(GridPos::new(2, 1)));
        assert!(!r.intersects(GridPos::new(3, 0)));
    }

    proptest! {
        #[test]
        fn always_non_empty(
            pts in prop::collection::vec((0i32..300, 0i32..300), 0..40),
            gx in 0.0f64..300.0, gy in 0.0f64..300.0, dir in -3.1f64..3.1,
        ) {
            let cells: Vec<GridPos> = pts.iter().map(|&(x, y)| GridPos::new(x, y)).collect();
            let net = net_from(&cells, 300, 300);
            let r = find_closest_poses(&net, &GoalPoseQuery::new(Pose::new(gx, gy, 0.0), dir));
            prop_assert!(!r.is_empty());
        }

        #[test]
        fn intersect_matches_polygon_clip(cx in -5.0f64..5.0, cy in -5.0f64..5.0, h in -3.2f64..3.2,
                                          md in 0.5f64..6.0, sd in 0.5f64..6.0) {
            // oracle: sample the cell square densely and test containment
            let r = OrientedRect::new(Point::new(cx, cy), h, md, sd);
            for x in -12..=12 {
                for y in -12..=12 {
                    let c = GridPos::new(x, y);
                    let mut hit = false;
                    for i in 0..=20 {
                        for j in 0..=20 {
                            let p = Point::new(x as f64 - 0.5 + i as f64 / 20.0, y as f64 - 0.5 + j as f64 / 20.0) - r.center;
                            if p.dot(r.u).abs() <= md && p.dot(r.v()).abs() <= sd {
                                hit = true;
                            }
                        }
                    }
                    // dense sampling can only miss razor-thin overlaps
                    if hit {
                        prop_assert!(r.intersects(c));
                    }
                }
            }
        }
    }
}
