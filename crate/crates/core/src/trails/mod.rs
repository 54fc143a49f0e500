//! Trail network: indexed trail pixels, goal-pose selection, wavefront
//! distance fields and shortest trail paths.

mod closest;
mod dbscan;
mod field;

pub use closest::{find_closest_poses, GoalPoseQuery, OrientedRect};
pub use dbscan::dbscan;
pub use field::{
    dijkstra_trail_path, select_optimal_pair, upsample_path, wavefront_distance, DistanceField,
    TrailSelection,
};

use crate::geomap::{CellClass, GeoMapError, IntermediateMap};
use crate::geometry::{GridPos, Point};
use rstar::primitives::GeomWithData;
use rstar::{RTree, AABB};
use rustc_hash::FxHashSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrailError {
    #[error("no trail cell within {radius} cells of {at:?}")]
    NoTrailNearStart { at: Point, radius: f64 },
    #[error("no trail path connects any start/target candidate")]
    NoTrailPath,
    #[error("invalid downsampling factor {0}")]
    InvalidFactor(f64),
}

impl From<GeoMapError> for TrailError {
    fn from(e: GeoMapError) -> Self {
        match e {
            GeoMapError::InvalidFactor(f) => TrailError::InvalidFactor(f),
            _ => TrailError::NoTrailPath,
        }
    }
}

type Indexed = GeomWithData<[f64; 2], u32>;

/// Trail pixels of a map, indexed at full and downsampled resolution.
///
/// The downsampled grid is a trail mask: block `floor((p + 0.5) / d_f)` is
/// TRAIL iff some trail pixel falls in it. When `d_f > 1` and two
/// diagonally adjacent trail pixels land in diagonally adjacent blocks, one
/// axial block is marked as well, so thin diagonal trails stay connected
/// under the no-corner-cutting adjacency.
#[derive(Debug, Clone)]
pub struct TrailNetwork {
    width: usize,
    height: usize,
    d_f: f64,
    points: Vec<GridPos>,
    full_index: RTree<Indexed>,
    down: IntermediateMap,
    down_points: Vec<GridPos>,
    down_index: RTree<Indexed>,
}

pub const DEFAULT_DOWNSAMPLE: f64 = 8.0;

impl TrailNetwork {
    pub fn build(map: &IntermediateMap, d_f: f64) -> Result<Self, TrailError> {
        let points = (0..map.cells().len())
            .filter(|&i| map.cells()[i] == CellClass::Trail)
            .map(|i| map.pos(i))
            .collect();
        Self::from_points(map, points, d_f)
    }

    /// Same network with every point that is no longer traversable in
    /// `map` (e.g. after a restricted overlay) removed.
    pub fn restricted_to(&self, map: &IntermediateMap) -> Self {
        let kept: Vec<GridPos> = self.points.iter().copied().filter(|&p| map.is_traversable(p)).collect();
        if kept.len() == self.points.len() {
            return self.clone();
        }
        Self::from_points(map, kept, self.d_f).expect("factor already validated")
    }

    fn from_points(map: &IntermediateMap, points: Vec<GridPos>, d_f: f64) -> Result<Self, TrailError> {
        if !(d_f.is_finite() && d_f >= 1.0) {
            return Err(TrailError::InvalidFactor(d_f));
        }
        let (width, height) = (map.width(), map.height());
        let dw = ((width as f64 / d_f).ceil() as usize).max(1);
        let dh = ((height as f64 / d_f).ceil() as usize).max(1);
        let mut down = IntermediateMap::new(dw, dh, map.transform.scaled(d_f));
        let set: FxHashSet<GridPos> = points.iter().copied().collect();
        let block = |p: GridPos| down_cell_of(p.center(), d_f);
        for &p in &points {
            let b = block(p);
            down.set(b, CellClass::Trail);
            if d_f == 1.0 {
                continue;
            }
            for (dx, dy) in [(1, 1), (1, -1)] {
                let q = p.offset(dx, dy);
                if !set.contains(&q) {
                    continue;
                }
                let c = block(q);
                if c.x != b.x && c.y != b.y {
                    down.set(GridPos::new(c.x, b.y), CellClass::Trail);
                }
            }
        }
        let full_index = RTree::bulk_load(
            points
                .iter()
                .enumerate()
                .map(|(i, p)| Indexed::new([p.x as f64, p.y as f64], i as u32))
                .collect(),
        );
        let down_points: Vec<GridPos> = (0..down.cells().len())
            .filter(|&i| down.cells()[i] == CellClass::Trail)
            .map(|i| down.pos(i))
            .collect();
        let down_index = RTree::bulk_load(
            down_points
                .iter()
                .enumerate()
                .map(|(i, p)| Indexed::new([p.x as f64, p.y as f64], i as u32))
                .collect(),
        );
        Ok(TrailNetwork {
            width,
            height,
            d_f,
            points,
            full_index,
            down,
            down_points,
            down_index,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[GridPos] {
        &self.points
    }

    pub fn d_f(&self) -> f64 {
        self.d_f
    }

    pub fn full_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Downsampled trail mask the distance fields are computed on.
    pub fn down_map(&self) -> &IntermediateMap {
        &self.down
    }

    pub fn down_points(&self) -> &[GridPos] {
        &self.down_points
    }

    /// Full-resolution point to downsampled (continuous) coordinates.
    pub fn to_down(&self, p: Point) -> Point {
        Point::new((p.x + 0.5) / self.d_f - 0.5, (p.y + 0.5) / self.d_f - 0.5)
    }

    /// Centre of a downsampled block in full-resolution coordinates.
    pub fn to_full(&self, b: GridPos) -> Point {
        Point::new((b.x as f64 + 0.5) * self.d_f - 0.5, (b.y as f64 + 0.5) * self.d_f - 0.5)
    }

    pub fn down_cell(&self, p: Point) -> GridPos {
        down_cell_of(p, self.d_f)
    }

    pub fn nearest_full(&self, p: Point) -> Option<GridPos> {
        self.full_index
            .nearest_neighbor(&[p.x, p.y])
            .map(|g| self.points[g.data as usize])
    }

    pub fn nearest_down(&self, p: Point) -> Option<GridPos> {
        self.down_index
            .nearest_neighbor(&[p.x, p.y])
            .map(|g| self.down_points[g.data as usize])
    }

    /// Full-resolution points within the axis-aligned box `[lo, hi]`.
    pub fn in_box(&self, lo: Point, hi: Point) -> impl Iterator<Item = GridPos> + '_ {
        self.full_index
            .locate_in_envelope(&AABB::from_corners([lo.x, lo.y], [hi.x, hi.y]))
            .map(|g| self.points[g.data as usize])
    }

    /// Full-resolution points within `r` of `p`.
    pub fn within(&self, p: Point, r: f64) -> impl Iterator<Item = GridPos> + '_ {
        self.full_index
            .locate_within_distance([p.x, p.y], r * r)
            .map(|g| self.points[g.data as usize])
    }

    /// Heading of the trail through `p` (principal axis of nearby trail
    /// pixels), oriented to agree with `hint`.
    pub fn local_direction(&self, p: GridPos, hint: f64) -> f64 {
        let c = p.center();
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for q in self.within(c, 4.0) {
            let d = q.center() - c;
            sxx += d.x * d.x;
            sxy += d.x * d.y;
            syy += d.y * d.y;
        }
        if sxx + syy == 0.0 {
            return hint;
        }
        let mut a = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        if (a - hint).cos() < 0.0 {
            a += std::f64::consts::PI;
        }
        crate::geometry::wrap_angle(a)
    }
}

fn down_cell_of(p: Point, d_f: f64) -> GridPos {
    GridPos::new(((p.x + 0.5) / d_f).floor() as i32, ((p.y + 0.5) / d_f).floor() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::GeoTransform;

    #[test]
    fn indexes_every_trail_cell() {
        let m = IntermediateMap::from_ascii(&["T..T", ".TT.", "....", "#..T"]);
        let net = TrailNetwork::build(&m, 2.0).unwrap();
        assert_eq!(net.len(), 5);
        for p in net.points() {
            assert_eq!(m.get(*p), Some(CellClass::Trail));
        }
        assert_eq!(net.nearest_full(Point::new(3.2, 2.6)), Some(GridPos::new(3, 3)));
    }

    #[test]
    fn down_point_count_is_deduplicated_blocks() {
        let mut m = IntermediateMap::new(64, 64, GeoTransform::unit());
        for x in 0..64 {
            m.set(GridPos::new(x, 10), CellClass::Trail);
            m.set(GridPos::new(x, 11), CellClass::Trail);
        }
        let net = TrailNetwork::build(&m, 8.0).unwrap();
        let blocks: FxHashSet<GridPos> = net.points().iter().map(|p| GridPos::new(p.x / 8, p.y / 8)).collect();
        assert_eq!(net.down_points().len(), blocks.len());
    }

    #[test]
    fn thin_diagonal_stays_connected_when_downsampled() {
        let mut m = IntermediateMap::new(64, 64, GeoTransform::unit());
        for i in 0..64 {
            m.set(GridPos::new(i, i), CellClass::Trail);
        }
        let net = TrailNetwork::build(&m, 8.0).unwrap();
        let f = wavefront_distance(net.down_map(), crate::geometry::Pose::new(0.0, 0.0, 0.0), 0.0).unwrap();
        assert!(f.value(GridPos::new(7, 7)).is_finite());
    }

    #[test]
    fn restricted_to_drops_blocked_points() {
        let m = IntermediateMap::from_ascii(&["TTTT"]);
        let net = TrailNetwork::build(&m, 1.0).unwrap();
        let mut blocked = m.clone();
        blocked.set(GridPos::new(1, 0), CellClass::Obstacle);
        let r = net.restricted_to(&blocked);
        assert_eq!(r.len(), 3);
        assert!(!r.points().contains(&GridPos::new(1, 0)));
    }

    #[test]
    fn local_direction_follows_trail() {
        let mut m = IntermediateMap::new(20, 20, GeoTransform::unit());
        for i in 0..20 {
            m.set(GridPos::new(i, 5), CellClass::Trail);
        }
        let net = TrailNetwork::build(&m, 1.0).unwrap();
        assert!(net.local_direction(GridPos::new(10, 5), 0.3).abs() < 1e-12);
        let back = net.local_direction(GridPos::new(10, 5), 3.0);
        assert!((back.abs() - std::f64::consts::PI).abs() < 1e-12);
    }
}
