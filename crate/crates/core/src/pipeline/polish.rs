//! Turning grid cell chains into polylines the repair stage can work with.

use crate::geomap::IntermediateMap;
use crate::geometry::{point_segment_distance, resample_uniform, GridPos, Point};

/// Probe spacing for straight-segment collision checks.
const PROBE: f64 = 0.2;

pub(crate) fn segment_free(map: &IntermediateMap, a: Point, b: Point) -> bool {
    let n = (a.dist(b) / PROBE).ceil().max(1.0) as usize;
    (0..=n).all(|k| map.is_traversable_at(a + (b - a) * (k as f64 / n as f64)))
}

/// Douglas-Peucker that also splits any chord crossing a blocked cell.
pub(crate) fn simplify(points: &[Point], tolerance: f64, map: &IntermediateMap) -> Vec<Point> {
    let n = points.len();
    if n <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut worst, mut at) = (-1.0, a + 1);
        for i in a + 1..b {
            let d = point_segment_distance(points[i], points[a], points[b]);
            if d > worst {
                (worst, at) = (d, i);
            }
        }
        if worst > tolerance || !segment_free(map, points[a], points[b]) {
            keep[at] = true;
            stack.push((a, at));
            stack.push((at, b));
        }
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Simplified and uniformly resampled leg. Falls back to resampling the raw
/// cell chain if a resampled point lands on a blocked cell.
pub(crate) fn polish_leg(cells: &[GridPos], tolerance: f64, spacing: f64, map: &IntermediateMap) -> Vec<Point> {
    let raw: Vec<Point> = cells.iter().map(|c| c.center()).collect();
    if raw.len() < 2 {
        return raw;
    }
    let out = resample_uniform(&simplify(&raw, tolerance, map), spacing);
    if out.iter().all(|&p| map.is_traversable_at(p)) {
        return out;
    }
    resample_uniform(&raw, spacing)
}
