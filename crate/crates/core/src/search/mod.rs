//! Deterministic 8-connected grid planners for the off-trail segments.
//!
//! Both planners forbid corner cutting: a diagonal step needs both axial
//! neighbours passable. Open-list ties are broken by lower `f`, then higher
//! `g`, then lower row-major index.

mod jps;
mod store;

pub use jps::{jps, jps_with};

use crate::geomap::IntermediateMap;
use crate::geometry::{GridPos, Pose};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use store::NodeStore;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("no grid path from {from:?} to {to:?}")]
    NoGridPath { from: GridPos, to: GridPos },
    #[error("cell {0:?} is not traversable")]
    NotTraversable(GridPos),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    /// Every visited cell, consecutive cells 8-adjacent.
    pub points: Vec<GridPos>,
    /// Turning cells only (jump points for JPS).
    pub waypoints: Vec<GridPos>,
    pub cost: f64,
}

impl GridPath {
    fn single(p: GridPos) -> Self {
        GridPath {
            points: vec![p],
            waypoints: vec![p],
            cost: 0.0,
        }
    }
}

/// Passability view handed to the planners.
pub trait Grid {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Must return false outside the grid.
    fn passable(&self, p: GridPos) -> bool;

    /// Diagonal moves need both axial neighbours open.
    fn can_step(&self, from: GridPos, dx: i32, dy: i32) -> bool {
        let to = from.offset(dx, dy);
        if !self.passable(to) {
            return false;
        }
        dx == 0 || dy == 0 || (self.passable(from.offset(dx, 0)) && self.passable(from.offset(0, dy)))
    }
}

impl Grid for IntermediateMap {
    fn width(&self) -> usize {
        IntermediateMap::width(self)
    }
    fn height(&self) -> usize {
        IntermediateMap::height(self)
    }
    fn passable(&self, p: GridPos) -> bool {
        self.is_traversable(p)
    }
}

/// Grid defined by a predicate, optionally clipped to an inclusive window.
pub struct FnGrid<F> {
    pub width: usize,
    pub height: usize,
    pub window: Option<(GridPos, GridPos)>,
    pub f: F,
}

impl<F: Fn(GridPos) -> bool> Grid for FnGrid<F> {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn passable(&self, p: GridPos) -> bool {
        if p.x < 0 || p.y < 0 || p.x >= self.width as i32 || p.y >= self.height as i32 {
            return false;
        }
        if let Some((lo, hi)) = self.window {
            if p.x < lo.x || p.y < lo.y || p.x > hi.x || p.y > hi.y {
                return false;
            }
        }
        (self.f)(p)
    }
}

pub(crate) const DIRS: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

#[derive(Clone, Copy)]
pub(crate) struct OpenEntry {
    pub f: f64,
    pub g: f64,
    pub idx: u32,
}

impl PartialEq for OpenEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: "greater" pops first
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

pub(crate) fn check_endpoints<G: Grid>(grid: &G, s: GridPos, t: GridPos) -> Result<(), SearchError> {
    for p in [s, t] {
        if !grid.passable(p) {
            return Err(SearchError::NotTraversable(p));
        }
    }
    Ok(())
}

/// Optimal 8-connected A* under the octile heuristic.
pub fn astar(map: &IntermediateMap, s: Pose, t: Pose) -> Result<GridPath, SearchError> {
    astar_with(map, s.cell(), t.cell())
}

pub fn astar_with<G: Grid>(grid: &G, s: GridPos, t: GridPos) -> Result<GridPath, SearchError> {
    check_endpoints(grid, s, t)?;
    if s == t {
        return Ok(GridPath::single(s));
    }
    let w = grid.width();
    let idx = |p: GridPos| (p.y as usize * w + p.x as usize) as u32;
    let pos = |i: u32| GridPos::new((i as usize % w) as i32, (i as usize / w) as i32);
    let mut store = NodeStore::new(w, grid.height());
    let mut open = BinaryHeap::new();
    let (si, ti) = (idx(s), idx(t));
    store.set(si, 0.0, si);
    open.push(OpenEntry { f: s.octile(t), g: 0.0, idx: si });
    while let Some(OpenEntry { g, idx: ci, .. }) = open.pop() {
        if store.closed(ci) || g > store.g(ci) {
            continue;
        }
        if ci == ti {
            let points = store.trace(ti, pos);
            return Ok(GridPath {
                waypoints: turning_points(&points),
                points,
                cost: g,
            });
        }
        store.close(ci);
        let c = pos(ci);
        for (dx, dy) in DIRS {
            if !grid.can_step(c, dx, dy) {
                continue;
            }
            let n = c.offset(dx, dy);
            let ni = idx(n);
            if store.closed(ni) {
                continue;
            }
            let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            let ng = g + step;
            if ng < store.g(ni) {
                store.set(ni, ng, ci);
                open.push(OpenEntry { f: ng + n.octile(t), g: ng, idx: ni });
            }
        }
    }
    Err(SearchError::NoGridPath { from: s, to: t })
}

/// Cells where the step direction changes, plus both ends.
pub fn turning_points(points: &[GridPos]) -> Vec<GridPos> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    for i in 1..points.len() - 1 {
        let a = (points[i].x - points[i - 1].x, points[i].y - points[i - 1].y);
        let b = (points[i + 1].x - points[i].x, points[i + 1].y - points[i].y);
        if a != b {
            out.push(points[i]);
        }
    }
    out.push(*points.last().unwrap());
    out
}

/// Cells of an 8-connected Bresenham line from `a` to `b`, inclusive.
pub fn line_cells(a: GridPos, b: GridPos) -> Vec<GridPos> {
    let (dx, dy) = ((b.x - a.x).abs(), -(b.y - a.y).abs());
    let (sx, sy) = ((b.x - a.x).signum(), (b.y - a.y).signum());
    let mut err = dx + dy;
    let mut p = a;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push(p);
        if p == b {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            p.x += sx;
        }
        if e2 <= dx {
            err += dx;
            p.y += sy;
        }
    }
}

/// Sum of Euclidean steps along a cell sequence.
pub fn cell_path_cost(points: &[GridPos]) -> f64 {
    points.windows(2).map(|w| w[0].center().dist(w[1].center())).sum()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geomap::{CellClass, GeoTransform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain Dijkstra over the same move set; the optimality oracle.
    pub fn dijkstra_cost<G: Grid>(grid: &G, s: GridPos, t: GridPos) -> Option<f64> {
        let (w, h) = (grid.width(), grid.height());
        let mut dist = vec![f64::INFINITY; w * h];
        let mut done = vec![false; w * h];
        let id = |p: GridPos| p.y as usize * w + p.x as usize;
        dist[id(s)] = 0.0;
        loop {
            let mut best = None;
            for i in 0..w * h {
                if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                    best = Some(i);
                }
            }
            let b = best?;
            done[b] = true;
            let c = GridPos::new((b % w) as i32, (b / w) as i32);
            if c == t {
                return Some(dist[b]);
            }
            for (dx, dy) in DIRS {
                if grid.can_step(c, dx, dy) {
                    let n = id(c.offset(dx, dy));
                    let nd = dist[b] + ((dx * dx + dy * dy) as f64).sqrt();
                    if nd < dist[n] {
                        dist[n] = nd;
                    }
                }
            }
        }
    }

    pub fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> IntermediateMap {
        let mut m = IntermediateMap::new(w, h, GeoTransform::unit());
        for c in m.cells_mut() {
            if rng.random_bool(density) {
                *c = CellClass::Obstacle;
            }
        }
        m
    }

    pub fn assert_valid_path<G: Grid>(grid: &G, p: &GridPath, s: GridPos, t: GridPos) {
        assert_eq!(p.points.first(), Some(&s));
        assert_eq!(p.points.last(), Some(&t));
        for w in p.points.windows(2) {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            assert!(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0));
            assert!(grid.can_step(w[0], dx, dy), "illegal step {:?}->{:?}", w[0], w[1]);
        }
        assert!((cell_path_cost(&p.points) - p.cost).abs() < 1e-9);
    }

    #[test]
    fn same_cell() {
        let m = IntermediateMap::new(5, 5, GeoTransform::unit());
        let p = astar(&m, Pose::new(2.0, 2.0, 0.0), Pose::new(2.0, 2.0, 0.0)).unwrap();
        assert_eq!(p.points, vec![GridPos::new(2, 2)]);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn open_diagonal() {
        let m = IntermediateMap::new(10, 10, GeoTransform::unit());
        let p = astar(&m, Pose::new(0.0, 0.0, 0.0), Pose::new(9.0, 9.0, 0.0)).unwrap();
        assert!((p.cost - 9.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(p.points.len(), 10);
    }

    #[test]
    fn wall_with_gap() {
        let m = IntermediateMap::from_ascii(&[
            "..........",
            "..........",
            "#########.",
            "..........",
            "..........",
        ]);
        let (s, t) = (GridPos::new(0, 0), GridPos::new(0, 4));
        let p = astar_with(&m, s, t).unwrap();
        assert_valid_path(&m, &p, s, t);
        assert!(p.points.contains(&GridPos::new(9, 2)));
        assert!((p.cost - dijkstra_cost(&m, s, t).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn no_corner_cutting() {
        let m = IntermediateMap::from_ascii(&[".#", "#."]);
        let r = astar_with(&m, GridPos::new(0, 0), GridPos::new(1, 1));
        assert!(matches!(r, Err(SearchError::NoGridPath { .. })));
    }

    #[test]
    fn blocked_endpoint_rejected() {
        let m = IntermediateMap::from_ascii(&["#."]);
        assert_eq!(
            astar_with(&m, GridPos::new(0, 0), GridPos::new(1, 0)),
            Err(SearchError::NotTraversable(GridPos::new(0, 0)))
        );
    }

    #[test]
    fn matches_dijkstra_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut solved = 0;
        while solved < 60 {
            let m = random_map(&mut rng, 32, 32, 0.3);
            let s = GridPos::new(rng.random_range(0..32), rng.random_range(0..32));
            let t = GridPos::new(rng.random_range(0..32), rng.random_range(0..32));
            if !m.is_traversable(s) || !m.is_traversable(t) {
                continue;
            }
            match (astar_with(&m, s, t), dijkstra_cost(&m, s, t)) {
                (Ok(p), Some(c)) => {
                    assert!((p.cost - c).abs() < 1e-9);
                    assert_valid_path(&m, &p, s, t);
                    solved += 1;
                }
                (Err(SearchError::NoGridPath { .. }), None) => {}
                (a, b) => panic!("disagree: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_map(&mut rng, 40, 40, 0.2);
        let (s, t) = (GridPos::new(0, 0), GridPos::new(39, 39));
        let mut m2 = m.clone();
        m2.set(s, CellClass::Free);
        m2.set(t, CellClass::Free);
        assert_eq!(astar_with(&m2, s, t), astar_with(&m2, s, t));
    }

    #[test]
    fn bresenham_endpoints_and_adjacency() {
        let l = line_cells(GridPos::new(0, 0), GridPos::new(7, -3));
        assert_eq!(l.first(), Some(&GridPos::new(0, 0)));
        assert_eq!(l.last(), Some(&GridPos::new(7, -3)));
        assert_eq!(l.len(), 8);
        for w in l.windows(2) {
            assert!((w[1].x - w[0].x).abs() <= 1 && (w[1].y - w[0].y).abs() <= 1);
        }
    }
}
