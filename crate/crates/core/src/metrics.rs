//! Path quality metrics and process memory sampling.

use crate::geomap::IntermediateMap;
use crate::geometry::{discrete_curvature, GridPos, PixelPath};
use crate::smooth::{curvature_profile, SmoothError};

/// Population standard deviation of the curvature profile, in 1/pixel.
pub fn csd_px(path: &PixelPath) -> Result<f64, SmoothError> {
    let k = curvature_profile(path)?;
    Ok(population_std(&k))
}

/// [`csd_px`] in 1/metre.
pub fn csd(path: &PixelPath, meters_per_pixel: f64) -> Result<f64, SmoothError> {
    Ok(csd_px(path)? / meters_per_pixel)
}

pub fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Largest |curvature| in 1/pixel, skipping zero-length segments.
pub fn max_abs_curvature_px(path: &PixelPath) -> f64 {
    discrete_curvature(&path.points()).into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Distance from the cells under the path to the nearest blocked cell, in
/// pixels; `None` when the map has no blocked cell.
///
/// Each query is a ring search bounded by the best distance found so far,
/// so no distance transform of the whole map is needed.
pub fn min_obstacle_distance_px(path: &PixelPath, map: &IntermediateMap) -> Option<f64> {
    if !map.has_obstacles() {
        return None;
    }
    let limit = (map.width().max(map.height())) as i32;
    let mut best = f64::INFINITY;
    let mut last: Option<(GridPos, f64)> = None;
    for p in &path.poses {
        let c = p.cell();
        // distance is 1-Lipschitz in the cell position
        if let Some((lc, ld)) = last {
            let dx = (c.x - lc.x) as f64;
            let dy = (c.y - lc.y) as f64;
            if ld - dx.hypot(dy) >= best {
                continue;
            }
        }
        let d = nearest_blocked(map, c, best, limit);
        // a pruned search only proves d >= best
        last = Some((c, d.min(best)));
        best = best.min(d);
        if best == 0.0 {
            break;
        }
    }
    Some(best)
}

/// [`min_obstacle_distance_px`] in metres.
pub fn min_obstacle_distance(path: &PixelPath, map: &IntermediateMap, meters_per_pixel: f64) -> Option<f64> {
    min_obstacle_distance_px(path, map).map(|d| d * meters_per_pixel)
}

fn nearest_blocked(map: &IntermediateMap, c: GridPos, bound: f64, limit: i32) -> f64 {
    let blocked = |q: GridPos| map.in_bounds(q) && !map.is_traversable(q);
    if blocked(c) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let mut r = 1;
    while r <= limit && (r as f64) < best.min(bound) {
        for i in -r..=r {
            for q in [c.offset(i, -r), c.offset(i, r), c.offset(-r, i), c.offset(r, i)] {
                if blocked(q) {
                    let d = ((q.x - c.x) as f64).hypot((q.y - c.y) as f64);
                    best = best.min(d);
                }
            }
        }
        r += 1;
    }
    best
}

/// Peak resident set size of this process in bytes (Linux `VmHWM`).
pub fn peak_rss_bytes() -> Option<u64> {
    proc_status_kb("VmHWM:").map(|kb| kb * 1024)
}

/// Current resident set size in bytes (Linux `VmRSS`).
pub fn current_rss_bytes() -> Option<u64> {
    proc_status_kb("VmRSS:").map(|kb| kb * 1024)
}

/// Resets the peak RSS mark to the current RSS, where the kernel allows it.
pub fn reset_peak_rss() -> bool {
    std::fs::write("/proc/self/clear_refs", "5").is_ok()
}

fn proc_status_kb(key: &str) -> Option<u64> {
    let s = std::fs::read_to_string("/proc/self/status").ok()?;
    s.lines()
        .find(|l| l.starts_with(key))?
        .split_whitespace()
        .nth(1)?
        .parse()
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::{CellClass, GeoTransform};
    use crate::geometry::Point;
    use std::f64::consts::PI;

    #[test]
    fn csd_values() {
        let line = PixelPath::from_points(&(0..10).map(|i| Point::new(i as f64, 0.0)).collect::<Vec<_>>());
        assert_eq!(csd_px(&line).unwrap(), 0.0);
        // a 64-gon arc has a constant profile
        let arc: Vec<Point> = (0..=32)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 64.0;
                Point::new(20.0 * a.cos(), 20.0 * a.sin())
            })
            .collect();
        assert!(csd_px(&PixelPath::from_points(&arc)).unwrap() < 1e-3);
        assert!((population_std(&[0.0, PI / 2.0, 0.0]) - 0.7405).abs() < 1e-4);
        assert!(csd_px(&PixelPath::from_points(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)])).is_err());
    }

    #[test]
    fn mod_values() {
        let mut m = IntermediateMap::new(11, 30, GeoTransform::unit());
        for y in 0..30 {
            m.set(GridPos::new(0, y), CellClass::Obstacle);
            m.set(GridPos::new(10, y), CellClass::Obstacle);
        }
        let mid = PixelPath::from_points(&(0..30).map(|y| Point::new(5.0, y as f64)).collect::<Vec<_>>());
        assert_eq!(min_obstacle_distance_px(&mid, &m), Some(5.0));
        let hug = PixelPath::from_points(&(0..30).map(|y| Point::new(1.0, y as f64)).collect::<Vec<_>>());
        assert_eq!(min_obstacle_distance(&hug, &m, 1.0), Some(1.0));
        let free = IntermediateMap::new(10, 10, GeoTransform::unit());
        assert_eq!(min_obstacle_distance_px(&mid, &free), None);
    }

    #[test]
    fn mod_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let mut m = IntermediateMap::new(40, 40, GeoTransform::unit());
            for _ in 0..rng.random_range(1..15) {
                m.set(GridPos::new(rng.random_range(0..40), rng.random_range(0..40)), CellClass::Water);
            }
            let pts: Vec<Point> =
                (0..20).map(|_| Point::new(rng.random_range(0.0..39.0), rng.random_range(0.0..39.0))).collect();
            let path = PixelPath::from_points(&pts);
            let mut want = f64::INFINITY;
            for p in &pts {
                let c = p.cell();
                for i in 0..m.cells().len() {
                    if !m.cells()[i].is_traversable() {
                        let q = m.pos(i);
                        want = want.min(((q.x - c.x) as f64).hypot((q.y - c.y) as f64));
                    }
                }
            }
            assert_eq!(min_obstacle_distance_px(&path, &m), Some(want));
        }
    }

    #[test]
    fn rss_is_readable() {
        let peak = peak_rss_bytes().unwrap();
        assert!(peak > 0 && peak >= current_rss_bytes().unwrap() / 2);
    }
}
