//! Wavefront distance fields over trail cells and trail path extraction.

use super::{TrailError, TrailNetwork};
use crate::geomap::{CellClass, IntermediateMap};
use crate::geometry::{GridPos, PixelPath, Point, Pose};
use crate::search::{astar_with, line_cells, FnGrid, Grid, DIRS};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

/// Trail distance from `source`, in cells of the map it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub source: Pose,
    pub source_cell: GridPos,
}

impl DistanceField {
    pub fn value(&self, p: GridPos) -> f64 {
        if p.x < 0 || p.y < 0 || p.x >= self.width as i32 || p.y >= self.height as i32 {
            return f64::INFINITY;
        }
        self.values[p.y as usize * self.width + p.x as usize]
    }

    /// Nearest reached cell to `p` within `radius` (ties in row-major order).
    pub fn snap(&self, p: Point, radius: f64) -> Option<GridPos> {
        snap_by(p, radius, |c| self.value(c).is_finite())
    }
}

struct TrailGrid<'a>(&'a IntermediateMap);

impl Grid for TrailGrid<'_> {
    fn width(&self) -> usize {
        self.0.width()
    }
    fn height(&self) -> usize {
        self.0.height()
    }
    fn passable(&self, p: GridPos) -> bool {
        self.0.get(p) == Some(CellClass::Trail)
    }
}

fn snap_by(p: Point, radius: f64, ok: impl Fn(GridPos) -> bool) -> Option<GridPos> {
    let c = p.cell();
    if ok(c) {
        return Some(c);
    }
    let r = radius.ceil() as i32;
    let mut best: Option<(f64, GridPos)> = None;
    for y in c.y - r..=c.y + r {
        for x in c.x - r..=c.x + r {
            let q = GridPos::new(x, y);
            let d = q.center().dist(p);
            if d <= radius && ok(q) && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, q));
            }
        }
    }
    best.map(|(_, q)| q)
}

/// Uniform-cost sweep over the TRAIL cells of `map` from `start`, 8-connected
/// with √2 diagonals and no corner cutting. An off-trail start is snapped to
/// the nearest trail cell within `snap_radius` cells.
pub fn wavefront_distance(map: &IntermediateMap, start: Pose, snap_radius: f64) -> Result<DistanceField, TrailError> {
    let grid = TrailGrid(map);
    let src = snap_by(start.point(), snap_radius, |c| grid.passable(c)).ok_or(TrailError::NoTrailNearStart {
        at: start.point(),
        radius: snap_radius,
    })?;
    let (w, h) = (map.width(), map.height());
    let mut values = vec![f64::INFINITY; w * h];
    let idx = |p: GridPos| p.y as usize * w + p.x as usize;
    values[idx(src)] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Dist(0.0), idx(src))));
    while let Some(Reverse((Dist(d), i))) = heap.pop() {
        if d > values[i] {
            continue;
        }
        let c = map.pos(i);
        for (dx, dy) in DIRS {
            if !grid.can_step(c, dx, dy) {
                continue;
            }
            let n = idx(c.offset(dx, dy));
            let nd = d + if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 };
            if nd < values[n] {
                values[n] = nd;
                heap.push(Reverse((Dist(nd), n)));
            }
        }
    }
    Ok(DistanceField {
        width: w,
        height: h,
        values,
        source: start,
        source_cell: src,
    })
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Dist(f64);
impl Eq for Dist {}
impl Ord for Dist {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Shortest trail path from the field's source to `t`, recovered by
/// descending the field. Length is the sum of Euclidean steps.
pub fn dijkstra_trail_path(
    net: &TrailNetwork,
    field: &DistanceField,
    t: Pose,
    snap_radius: f64,
) -> Result<(PixelPath, f64), TrailError> {
    trail_path_on(net.down_map(), field, t, snap_radius)
}

pub(crate) fn trail_path_on(
    map: &IntermediateMap,
    field: &DistanceField,
    t: Pose,
    snap_radius: f64,
) -> Result<(PixelPath, f64), TrailError> {
    let grid = TrailGrid(map);
    let end = field.snap(t.point(), snap_radius).ok_or(TrailError::NoTrailPath)?;
    let mut cells = vec![end];
    let mut c = end;
    while c != field.source_cell {
        let mut best: Option<(f64, GridPos)> = None;
        for (dx, dy) in DIRS {
            // steps are symmetric, so legality from c equals legality into c
            if !grid.can_step(c, dx, dy) {
                continue;
            }
            let n = c.offset(dx, dy);
            let via = field.value(n) + if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 };
            if best.is_none_or(|(b, _)| via < b) {
                best = Some((via, n));
            }
        }
        let (_, n) = best.expect("finite cells have a finite predecessor");
        c = n;
        cells.push(c);
    }
    cells.reverse();
    let length = cells.windows(2).map(|w| w[0].center().dist(w[1].center())).sum();
    let pts: Vec<Point> = cells.iter().map(|c| c.center()).collect();
    Ok((PixelPath::from_points(&pts), length))
}

/// Chosen trail entry/exit and the connecting trail path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailSelection {
    pub s_bar: Pose,
    pub t_bar: Pose,
    /// Path on the downsampled grid.
    pub down_path: PixelPath,
    /// Trail length in full-resolution pixels (downsampled length · d_f).
    pub trail_length: f64,
    /// Objective value of the chosen pair.
    pub cost: f64,
    /// Full-resolution trail cells from `s_bar` to `t_bar`.
    pub cells: Vec<GridPos>,
}

/// Evaluates every start/target candidate pair on the downsampled trail
/// grid and keeps the cheapest. The objective is the trail length plus,
/// when `ends = Some((s_o, t_o))`, the straight-line legs `s_o -> s̄` and
/// `t̄ -> t_o`. One wavefront is run per start candidate.
pub fn select_optimal_pair(
    net: &TrailNetwork,
    map: &IntermediateMap,
    candidates_s: &[Pose],
    candidates_t: &[Pose],
    ends: Option<(Point, Point)>,
) -> Result<TrailSelection, TrailError> {
    let snap = 3.0;
    let mut best: Option<(f64, usize, usize, DistanceField)> = None;
    for (i, s) in candidates_s.iter().enumerate() {
        let Ok(field) = wavefront_distance(net.down_map(), Pose::at(net.to_down(s.point())), snap) else {
            continue;
        };
        let mut local: Option<(f64, usize)> = None;
        for (j, t) in candidates_t.iter().enumerate() {
            let Some(tc) = field.snap(net.to_down(t.point()), snap) else {
                continue;
            };
            let mut cost = field.value(tc) * net.d_f();
            if let Some((so, to)) = ends {
                cost += so.dist(s.point()) + t.point().dist(to);
            }
            if local.is_none_or(|(b, _)| cost < b) {
                local = Some((cost, j));
            }
        }
        if let Some((cost, j)) = local {
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, i, j, field));
            }
        }
    }
    let (cost, i, j, field) = best.ok_or(TrailError::NoTrailPath)?;
    let (s_bar, t_bar) = (candidates_s[i], candidates_t[j]);
    let (down_path, len) = trail_path_on(net.down_map(), &field, Pose::at(net.to_down(t_bar.point())), snap)?;
    let cells = upsample_path(net, map, &down_path, s_bar.cell(), t_bar.cell());
    Ok(TrailSelection {
        s_bar,
        t_bar,
        down_path,
        trail_length: len * net.d_f(),
        cost,
        cells,
    })
}

/// Every this many downsampled cells an anchor is snapped to the
/// full-resolution trail; anchors are joined by short trail-only searches.
const UPSAMPLE_STRIDE: usize = 4;

/// Maps a downsampled trail path back to full resolution: anchors are the
/// nearest full-resolution trail pixels to block centres, joined by
/// 8-connected searches restricted to trail cells (falling back to any
/// traversable cell, then a straight line).
pub fn upsample_path(
    net: &TrailNetwork,
    map: &IntermediateMap,
    down_path: &PixelPath,
    from: GridPos,
    to: GridPos,
) -> Vec<GridPos> {
    let mut anchors = vec![from];
    let n = down_path.len();
    for (k, p) in down_path.poses.iter().enumerate() {
        if k == 0 || k + 1 == n || k % UPSAMPLE_STRIDE != 0 {
            continue;
        }
        if let Some(a) = net.nearest_full(net.to_full(p.cell())) {
            if anchors.last() != Some(&a) {
                anchors.push(a);
            }
        }
    }
    if anchors.last() != Some(&to) {
        anchors.push(to);
    }
    let mut out = vec![from];
    for w in anchors.windows(2) {
        let leg = bridge(map, w[0], w[1], net.d_f());
        out.extend_from_slice(&leg[1..]);
    }
    out
}

fn bridge(map: &IntermediateMap, a: GridPos, b: GridPos, d_f: f64) -> Vec<GridPos> {
    let line = line_cells(a, b);
    if line.iter().all(|&c| map.get(c) == Some(CellClass::Trail)) && steps_legal(map, &line, true) {
        return line;
    }
    let pad = (2.0 * d_f).ceil() as i32 + 2;
    let window = Some((
        GridPos::new(a.x.min(b.x) - pad, a.y.min(b.y) - pad),
        GridPos::new(a.x.max(b.x) + pad, a.y.max(b.y) + pad),
    ));
    let on_trail = FnGrid {
        width: map.width(),
        height: map.height(),
        window,
        f: |c: GridPos| map.get(c) == Some(CellClass::Trail) || c == a || c == b,
    };
    if let Ok(p) = astar_with(&on_trail, a, b) {
        return p.points;
    }
    let open = FnGrid {
        width: map.width(),
        height: map.height(),
        window,
        f: |c: GridPos| map.is_traversable(c) || c == a || c == b,
    };
    if let Ok(p) = astar_with(&open, a, b) {
        return p.points;
    }
    line
}

fn steps_legal(map: &IntermediateMap, cells: &[GridPos], trail_only: bool) -> bool {
    let g = TrailGrid(map);
    cells.windows(2).all(|w| {
        let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
        if trail_only {
            g.can_step(w[0], dx, dy)
        } else {
            map.can_step(w[0], dx, dy)
        }
    })
}
