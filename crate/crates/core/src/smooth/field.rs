//! Voronoi field over a (window of an) intermediate map.

use super::edt::edt;
use super::SmoothError;
use crate::geomap::IntermediateMap;
use crate::geometry::{GridPos, Point};
use std::io::{self, Write};

pub const DEFAULT_ALPHA: f64 = 10.0;
pub const DEFAULT_D_O_MAX: f64 = 30.0;

/// Field value from obstacle distance `d_o` and Voronoi-edge distance `d_v`.
/// An infinite `d_v` (no edge in range) drops the edge factor to 1.
pub fn field_value(d_o: f64, d_v: f64, alpha: f64, d_o_max: f64) -> f64 {
    if d_o <= 0.0 {
        return 1.0;
    }
    if d_o >= d_o_max {
        return 0.0;
    }
    let edge = if d_v.is_finite() { d_v / (d_o + d_v) } else { 1.0 };
    alpha / (alpha + d_o) * edge * (d_o - d_o_max).powi(2) / (d_o_max * d_o_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiFieldGrid {
    /// Parent-map cell of field cell `(0, 0)`.
    pub origin: GridPos,
    pub width: usize,
    pub height: usize,
    pub d_o: Vec<f64>,
    pub d_v: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub d_o_max: f64,
}

impl VoronoiFieldGrid {
    /// Field that is zero everywhere (no obstacles in range).
    pub fn zero(origin: GridPos, width: usize, height: usize, alpha: f64, d_o_max: f64) -> Self {
        let n = width * height;
        VoronoiFieldGrid {
            origin,
            width,
            height,
            d_o: vec![f64::INFINITY; n],
            d_v: vec![f64::INFINITY; n],
            v: vec![0.0; n],
            alpha,
            d_o_max,
        }
    }

    fn at(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.v[y * self.width + x]
    }

    /// Bilinear interpolation of `v` at a parent-map point, with its
    /// gradient. Points outside the window use the nearest border cells.
    pub fn sample(&self, p: Point) -> (f64, Point) {
        let lx = p.x - self.origin.x as f64;
        let ly = p.y - self.origin.y as f64;
        let (x0, y0) = (lx.floor(), ly.floor());
        let (fx, fy) = (lx - x0, ly - y0);
        let (xi, yi) = (x0 as i64, y0 as i64);
        let v00 = self.at(xi, yi);
        let v10 = self.at(xi + 1, yi);
        let v01 = self.at(xi, yi + 1);
        let v11 = self.at(xi + 1, yi + 1);
        let top = v00 + (v10 - v00) * fx;
        let bot = v01 + (v11 - v01) * fx;
        let val = top + (bot - top) * fy;
        let gx = (v10 - v00) * (1.0 - fy) + (v11 - v01) * fy;
        let gy = bot - top;
        (val, Point::new(gx, gy))
    }

    pub fn value(&self, p: Point) -> f64 {
        self.sample(p).0
    }

    /// Binary greyscale image, 255 at `v = 1`.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.v.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        w.write_all(&bytes)
    }
}

/// Builds the field over the whole map.
pub fn build_voronoi_field(map: &IntermediateMap, alpha: f64, d_o_max: f64) -> Result<VoronoiFieldGrid, SmoothError> {
    if !(alpha > 0.0 && d_o_max > 0.0) {
        return Err(SmoothError::InvalidFieldParams { alpha, d_o_max });
    }
    let blocked = map.cells().iter().filter(|c| !c.is_traversable()).count();
    if blocked == 0 {
        return Err(SmoothError::NoObstacles);
    }
    if blocked == map.cells().len() {
        return Err(SmoothError::NoFreeSpace);
    }
    Ok(build(map, GridPos::new(0, 0), alpha, d_o_max))
}

/// Field over the parent-map box `[lo, hi]` grown by `d_o_max + 2`,
/// clipped to the map. Obstacles beyond the grown box cannot influence
/// `v` inside the original box except through Voronoi edges.
pub fn build_field_window(
    map: &IntermediateMap,
    lo: Point,
    hi: Point,
    alpha: f64,
    d_o_max: f64,
) -> VoronoiFieldGrid {
    let m = d_o_max + 2.0;
    let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1) as i32;
    let x0 = clamp((lo.x - m).floor(), map.width());
    let y0 = clamp((lo.y - m).floor(), map.height());
    let x1 = clamp((hi.x + m).ceil(), map.width());
    let y1 = clamp((hi.y + m).ceil(), map.height());
    let origin = GridPos::new(x0, y0);
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let sub = map.crop(origin, w, h);
    let blocked = sub.cells().iter().any(|c| !c.is_traversable());
    if !blocked {
        return VoronoiFieldGrid::zero(origin, w, h, alpha, d_o_max);
    }
    build(&sub, origin, alpha, d_o_max)
}

fn build(map: &IntermediateMap, origin: GridPos, alpha: f64, d_o_max: f64) -> VoronoiFieldGrid {
    let (w, h) = (map.width(), map.height());
    let cells = map.cells();
    let blocked = |i: usize| !cells[i].is_traversable();
    let comp = obstacle_components(w, h, &blocked);
    let to = edt(w, h, blocked);
    let d_o: Vec<f64> = to.dist2.iter().map(|d| d.sqrt()).collect();
    let site_xy = |s: usize| Point::new((s % w) as f64, (s / w) as f64);

    // a free cell is on an edge when a 4-neighbour's nearest site belongs to
    // another obstacle and that site is (nearly) as close as its own
    let mut edge = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if blocked(i) || to.site[i] == usize::MAX {
                continue;
            }
            let here = Point::new(x as f64, y as f64);
            let own = comp[to.site[i]];
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                let s = to.site[j];
                if blocked(j) || s == usize::MAX || comp[s] == own {
                    continue;
                }
                if (here.dist(site_xy(s)) - d_o[i]).abs() <= 1.0 {
                    edge[i] = true;
                    break;
                }
            }
        }
    }
    let tv = edt(w, h, |i| edge[i]);
    let d_v: Vec<f64> = tv.dist2.iter().map(|d| d.sqrt()).collect();
    let v = (0..w * h)
        .map(|i| if blocked(i) { 1.0 } else { field_value(d_o[i], d_v[i], alpha, d_o_max) })
        .collect();
    VoronoiFieldGrid {
        origin,
        width: w,
        height: h,
        d_o,
        d_v,
        v,
        alpha,
        d_o_max,
    }
}

/// 8-connected labels of blocked cells (`u32::MAX` for free cells).
fn obstacle_components(w: usize, h: usize, blocked: &impl Fn(usize) -> bool) -> Vec<u32> {
    let mut label = vec![u32::MAX; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !blocked(start) || label[start] != u32::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if blocked(j) && label[j] == u32::MAX {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::{CellClass, GeoTransform};
    use proptest::prelude::*;

    fn corridor() -> IntermediateMap {
        // walls at x = 0 and x = 10
        let mut m = IntermediateMap::new(11, 30, GeoTransform::unit());
        for y in 0..30 {
            m.set(GridPos::new(0, y), CellClass::Obstacle);
            m.set(GridPos::new(10, y), CellClass::Obstacle);
        }
        m
    }

    /// Scalar evaluation written directly from the formula.
    fn reference(d_o: f64, d_v: f64, alpha: f64, d_max: f64) -> f64 {
        (alpha / (alpha + d_o)) * (d_v / (d_o + d_v)) * ((d_o - d_max) * (d_o - d_max) / (d_max * d_max))
    }

    #[test]
    fn corridor_midline_is_edge() {
        let f = build_voronoi_field(&corridor(), 10.0, 30.0).unwrap();
        let i = 15 * 11 + 5;
        assert_eq!(f.d_o[i], 5.0);
        assert_eq!(f.d_v[i], 0.0);
        assert_eq!(f.v[i], 0.0);
        // cell next to the left wall: d_o = 1, d_v = 4
        let j = 15 * 11 + 1;
        assert_eq!((f.d_o[j], f.d_v[j]), (1.0, 4.0));
        assert!((f.v[j] - reference(1.0, 4.0, 10.0, 30.0)).abs() < 1e-12);
    }

    #[test]
    fn obstacle_cells_are_one() {
        let f = build_voronoi_field(&corridor(), 10.0, 30.0).unwrap();
        assert_eq!(f.v[15 * 11], 1.0);
        // the formula itself gives 1 at d_o = 0 whenever d_v > 0
        assert!((reference(0.0, 3.0, 10.0, 30.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_maps() {
        let free = IntermediateMap::new(5, 5, GeoTransform::unit());
        assert_eq!(build_voronoi_field(&free, 10.0, 30.0), Err(SmoothError::NoObstacles));
        let full = IntermediateMap::filled(5, 5, CellClass::Water, GeoTransform::unit());
        assert_eq!(build_voronoi_field(&full, 10.0, 30.0), Err(SmoothError::NoFreeSpace));
    }

    #[test]
    fn bilinear_gradient_matches_differences() {
        let f = build_voronoi_field(&corridor(), 4.0, 8.0).unwrap();
        for &(x, y) in &[(2.3, 7.6), (6.7, 11.2), (8.1, 3.9)] {
            let (_, g) = f.sample(Point::new(x, y));
            let h = 1e-6;
            let gx = (f.value(Point::new(x + h, y)) - f.value(Point::new(x - h, y))) / (2.0 * h);
            let gy = (f.value(Point::new(x, y + h)) - f.value(Point::new(x, y - h))) / (2.0 * h);
            assert!((g.x - gx).abs() < 1e-6 && (g.y - gy).abs() < 1e-6);
        }
    }

    #[test]
    fn window_matches_full_field_near_path() {
        let mut m = IntermediateMap::new(120, 120, GeoTransform::unit());
        for y in 20..100 {
            m.set(GridPos::new(60, y), CellClass::Obstacle);
        }
        let full = build_voronoi_field(&m, 10.0, 15.0).unwrap();
        let win = build_field_window(&m, Point::new(50.0, 40.0), Point::new(70.0, 60.0), 10.0, 15.0);
        for y in 40..=60 {
            for x in 50..=70 {
                let p = Point::new(x as f64, y as f64);
                assert_eq!(full.value(p), win.value(p));
            }
        }
    }

    #[test]
    fn pgm_header_and_size() {
        let f = build_voronoi_field(&corridor(), 10.0, 30.0).unwrap();
        let mut buf = Vec::new();
        f.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n11 30\n255\n"));
        assert_eq!(buf.len(), b"P5\n11 30\n255\n".len() + 11 * 30);
    }

    proptest! {
        #[test]
        fn field_bounds_and_identities(bits in prop::collection::vec(0u8..6, 400), alpha in 0.5f64..20.0, dmax in 1.0f64..40.0) {
            let cells: Vec<CellClass> = bits.iter().map(|&b| if b == 0 { CellClass::Obstacle } else { CellClass::Free }).collect();
            let m = IntermediateMap::from_cells(20, 20, cells, GeoTransform::unit()).unwrap();
            prop_assume!(m.has_obstacles() && m.count(CellClass::Free) > 0);
            let f = build_voronoi_field(&m, alpha, dmax).unwrap();
            for i in 0..400 {
                prop_assert!((0.0..=1.0).contains(&f.v[i]));
                if f.d_o[i] == 0.0 {
                    prop_assert_eq!(f.v[i], 1.0);
                } else if f.d_v[i] == 0.0 || f.d_o[i] >= dmax {
                    prop_assert_eq!(f.v[i], 0.0);
                }
            }
        }
    }
}
