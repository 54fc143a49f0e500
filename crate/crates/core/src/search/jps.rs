//! Jump Point Search for 8-connected grids without corner cutting.
//!
//! Straight jumps stop at cells with a forced perpendicular neighbour;
//! diagonal jumps stop where either axial sub-jump finds something. Jumps
//! are loops, not recursion, so long open stretches cannot overflow.

use super::store::NodeStore;
use super::{check_endpoints, Grid, GridPath, OpenEntry, SearchError, DIRS};
use crate::geomap::IntermediateMap;
use crate::geometry::{GridPos, Pose};
use std::collections::BinaryHeap;

pub fn jps(map: &IntermediateMap, s: Pose, t: Pose) -> Result<GridPath, SearchError> {
    jps_with(map, s.cell(), t.cell())
}

pub fn jps_with<G: Grid>(grid: &G, s: GridPos, t: GridPos) -> Result<GridPath, SearchError> {
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
    let mut dirs = Vec::with_capacity(8);
    while let Some(OpenEntry { g, idx: ci, .. }) = open.pop() {
        if store.closed(ci) || g > store.g(ci) {
            continue;
        }
        if ci == ti {
            let waypoints = store.trace(ti, pos);
            let points = interpolate(&waypoints);
            return Ok(GridPath {
                points,
                waypoints,
                cost: g,
            });
        }
        store.close(ci);
        let c = pos(ci);
        pruned_dirs(grid, c, (ci != si).then(|| pos(store.parent(ci))), &mut dirs);
        for &(dx, dy) in &dirs {
            let Some(j) = jump(grid, c, dx, dy, t) else {
                continue;
            };
            let ji = idx(j);
            if store.closed(ji) {
                continue;
            }
            let ng = g + c.octile(j);
            if ng < store.g(ji) {
                store.set(ji, ng, ci);
                open.push(OpenEntry { f: ng + j.octile(t), g: ng, idx: ji });
            }
        }
    }
    Err(SearchError::NoGridPath { from: s, to: t })
}

fn pruned_dirs<G: Grid>(grid: &G, c: GridPos, parent: Option<GridPos>, out: &mut Vec<(i32, i32)>) {
    out.clear();
    let Some(p) = parent else {
        out.extend(DIRS.iter().copied().filter(|&(dx, dy)| grid.can_step(c, dx, dy)));
        return;
    };
    let dx = (c.x - p.x).signum();
    let dy = (c.y - p.y).signum();
    let open = |x: i32, y: i32| grid.passable(c.offset(x, y));
    if dx != 0 && dy != 0 {
        let (ox, oy) = (open(dx, 0), open(0, dy));
        if oy {
            out.push((0, dy));
        }
        if ox {
            out.push((dx, 0));
        }
        if ox && oy && open(dx, dy) {
            out.push((dx, dy));
        }
    } else if dx != 0 {
        let (up, down) = (open(0, 1), open(0, -1));
        if open(dx, 0) {
            out.push((dx, 0));
            if up && open(dx, 1) {
                out.push((dx, 1));
            }
            if down && open(dx, -1) {
                out.push((dx, -1));
            }
        }
        if up {
            out.push((0, 1));
        }
        if down {
            out.push((0, -1));
        }
    } else {
        let (right, left) = (open(1, 0), open(-1, 0));
        if open(0, dy) {
            out.push((0, dy));
            if right && open(1, dy) {
                out.push((1, dy));
            }
            if left && open(-1, dy) {
                out.push((-1, dy));
            }
        }
        if right {
            out.push((1, 0));
        }
        if left {
            out.push((-1, 0));
        }
    }
}

fn jump<G: Grid>(grid: &G, from: GridPos, dx: i32, dy: i32, goal: GridPos) -> Option<GridPos> {
    let mut c = from;
    loop {
        if !grid.can_step(c, dx, dy) {
            return None;
        }
        c = c.offset(dx, dy);
        if c == goal {
            return Some(c);
        }
        if dx != 0 && dy != 0 {
            if straight(grid, c, dx, 0, goal) || straight(grid, c, 0, dy, goal) {
                return Some(c);
            }
        } else if forced(grid, c, dx, dy) {
            return Some(c);
        }
    }
}

fn straight<G: Grid>(grid: &G, from: GridPos, dx: i32, dy: i32, goal: GridPos) -> bool {
    let mut c = from;
    loop {
        if !grid.can_step(c, dx, dy) {
            return false;
        }
        c = c.offset(dx, dy);
        if c == goal || forced(grid, c, dx, dy) {
            return true;
        }
    }
}

fn forced<G: Grid>(grid: &G, c: GridPos, dx: i32, dy: i32) -> bool {
    let open = |x: i32, y: i32| grid.passable(c.offset(x, y));
    if dx != 0 {
        (open(0, -1) && !open(-dx, -1)) || (open(0, 1) && !open(-dx, 1))
    } else {
        (open(-1, 0) && !open(-1, -dy)) || (open(1, 0) && !open(1, -dy))
    }
}

/// Expands straight/diagonal jump legs into consecutive cells.
fn interpolate(waypoints: &[GridPos]) -> Vec<GridPos> {
    let mut out = vec![waypoints[0]];
    for w in waypoints.windows(2) {
        let (dx, dy) = ((w[1].x - w[0].x).signum(), (w[1].y - w[0].y).signum());
        let mut c = w[0];
        while c != w[1] {
            c = c.offset(dx, dy);
            out.push(c);
        }
    }
    out
}
