//! Seeded synthetic terrain for tests, benchmarks and demos.

use crate::geomap::{CellClass, GeoTransform, IntermediateMap};
use crate::geometry::{GridPos, Point};
use crate::search::line_cells;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Trail polylines; the first crosses the map, later ones branch off
    /// existing trails.
    pub trails: usize,
    /// Obstacle blobs per million cells.
    pub obstacle_density: f64,
    pub obstacle_radius: (f64, f64),
    /// Water bodies per million cells.
    pub water_density: f64,
    pub water_radius: (f64, f64),
    /// Trail width in cells.
    pub trail_width: i32,
    /// Cells cleared of obstacles on each side of a trail.
    pub verge: i32,
}

impl SynthConfig {
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        let scale = (width.min(height) as f64 / 2000.0).max(0.05);
        SynthConfig {
            width,
            height,
            seed,
            trails: ((width * height) as f64 / 4e5).clamp(2.0, 120.0) as usize,
            obstacle_density: 60.0,
            obstacle_radius: (4.0 * scale.min(1.0), 18.0 * scale.min(1.0)),
            water_density: 4.0,
            water_radius: (15.0 * scale.min(1.0), 45.0 * scale.min(1.0)),
            trail_width: 2,
            verge: 3,
        }
    }
}

/// North-up transform with pixels of roughly one metre, near 61°N 24°E.
pub fn synth_transform() -> GeoTransform {
    GeoTransform::new(24.0, 61.2, 1.0 / 54_010.0, -1.0 / 111_400.0).expect("constants are valid")
}

/// Random map with blob obstacles, elliptic water bodies and a connected
/// trail network drawn last, each trail clearing a verge on both sides.
pub fn synth_map(cfg: &SynthConfig) -> IntermediateMap {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut map = IntermediateMap::new(cfg.width, cfg.height, synth_transform());
    let mega = (cfg.width * cfg.height) as f64 / 1e6;
    let (w, h) = (cfg.width as f64, cfg.height as f64);

    let water = (cfg.water_density * mega).round() as usize;
    for _ in 0..water {
        let c = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        let rx = rng.random_range(cfg.water_radius.0..=cfg.water_radius.1);
        let ry = rng.random_range(cfg.water_radius.0..=cfg.water_radius.1);
        fill_ellipse(&mut map, c, rx, ry, CellClass::Water);
    }
    let obstacles = (cfg.obstacle_density * mega).round() as usize;
    for _ in 0..obstacles {
        let c = Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        let r = rng.random_range(cfg.obstacle_radius.0..=cfg.obstacle_radius.1);
        // lumpy blob: a few overlapping discs
        for _ in 0..3 {
            let o = Point::new(rng.random_range(-r..=r), rng.random_range(-r..=r)) * 0.6;
            fill_ellipse(&mut map, c + o, r * 0.7, r * 0.7, CellClass::Obstacle);
        }
    }

    let mut drawn: Vec<GridPos> = Vec::new();
    for k in 0..cfg.trails {
        let (start, heading) = if k == 0 || drawn.is_empty() {
            // enter from the middle of the top or left edge region
            if cfg.height >= cfg.width {
                (Point::new(rng.random_range(0.3 * w..0.7 * w), 0.0), std::f64::consts::FRAC_PI_2)
            } else {
                (Point::new(0.0, rng.random_range(0.3 * h..0.7 * h)), 0.0)
            }
        } else {
            let c = drawn[rng.random_range(0..drawn.len())];
            (c.center(), rng.random_range(0.0..std::f64::consts::TAU))
        };
        let len = if k == 0 { w.hypot(h) * 1.5 } else { rng.random_range(0.3..1.2) * w.min(h) };
        let pts = wander(&mut rng, start, heading, len, w, h);
        // trails keep a cleared verge
        for seg in pts.windows(2) {
            for c in line_cells(seg[0].cell(), seg[1].cell()) {
                let m = cfg.verge;
                for dy in -m..cfg.trail_width + m {
                    for dx in -m..cfg.trail_width + m {
                        let q = c.offset(dx, dy);
                        if map.get(q).is_some_and(|k| k != CellClass::Trail) {
                            map.set(q, CellClass::Free);
                        }
                    }
                }
            }
        }
        for seg in pts.windows(2) {
            for c in line_cells(seg[0].cell(), seg[1].cell()) {
                for dx in 0..cfg.trail_width {
                    for dy in 0..cfg.trail_width {
                        let q = c.offset(dx, dy);
                        if map.set(q, CellClass::Trail) && dx == 0 && dy == 0 {
                            drawn.push(q);
                        }
                    }
                }
            }
        }
    }
    map
}

/// Smoothly turning random walk that keeps its initial bearing on
/// average, stopped at the map border.
fn wander(rng: &mut ChaCha8Rng, start: Point, mut heading: f64, len: f64, w: f64, h: f64) -> Vec<Point> {
    let step = 20.0;
    let bearing = heading;
    let mut pts = vec![start];
    let mut p = start;
    let mut turn = 0.0;
    let mut walked = 0.0;
    while walked < len {
        turn = (turn + rng.random_range(-0.08..0.08)) * 0.9 - 0.05 * (heading - bearing);
        heading += turn;
        p = p + Point::new(heading.cos(), heading.sin()) * step;
        if p.x < 0.0 || p.y < 0.0 || p.x > w - 1.0 || p.y > h - 1.0 {
            p = Point::new(p.x.clamp(0.0, w - 1.0), p.y.clamp(0.0, h - 1.0));
            pts.push(p);
            break;
        }
        pts.push(p);
        walked += step;
    }
    pts
}

pub fn fill_ellipse(map: &mut IntermediateMap, c: Point, rx: f64, ry: f64, class: CellClass) {
    let (x0, x1) = ((c.x - rx).floor().max(0.0) as i32, (c.x + rx).ceil() as i32);
    let (y0, y1) = ((c.y - ry).floor().max(0.0) as i32, (c.y + ry).ceil() as i32);
    let (x1, y1) = (x1.min(map.width() as i32 - 1), y1.min(map.height() as i32 - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = ((x as f64 - c.x) / rx, (y as f64 - c.y) / ry);
            if dx * dx + dy * dy <= 1.0 {
                map.set(GridPos::new(x, y), class);
            }
        }
    }
}

/// Draws a straight trail `width` cells wide from `a` to `b`.
pub fn draw_trail(map: &mut IntermediateMap, a: GridPos, b: GridPos, width: i32) {
    for c in line_cells(a, b) {
        for dx in 0..width {
            for dy in 0..width {
                map.set(c.offset(dx, dy), CellClass::Trail);
            }
        }
    }
}

/// Random start/target pairs at least `min_dist` pixels apart, each on a
/// cell whose `(2 * clearance + 1)`-square neighbourhood is traversable.
/// Gives up after `100 * count` draws.
pub fn random_pairs(
    map: &IntermediateMap,
    count: usize,
    min_dist: f64,
    clearance: i32,
    seed: u64,
) -> Vec<(GridPos, GridPos)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let (w, h) = (map.width() as i32, map.height() as i32);
    let draw = |rng: &mut ChaCha8Rng| GridPos::new(rng.random_range(0..w), rng.random_range(0..h));
    let mut tries = 0;
    while out.len() < count && tries < 100 * count.max(1) {
        tries += 1;
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        if !free_around(map, a, clearance) || !free_around(map, b, clearance) {
            continue;
        }
        if a.center().dist(b.center()) >= min_dist {
            out.push((a, b));
        }
    }
    out
}

fn free_around(map: &IntermediateMap, c: GridPos, r: i32) -> bool {
    (-r..=r).all(|dy| (-r..=r).all(|dx| map.is_traversable(c.offset(dx, dy))))
}
