//! Feature rasterisation: polygons by cell-centre membership, lines by a
//! widened corridor.

use super::{CellClass, GeoMapError, IntermediateMap};
use crate::geometry::{segment_cell_distance, Point};
use serde::{Deserialize, Serialize};

/// Feature categories accepted in the GeoJSON `class` property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureClass {
    Trail,
    River,
    Water,
    Building,
    Tree,
    Restricted,
}

impl FeatureClass {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "trail" => Self::Trail,
            "river" => Self::River,
            "water" => Self::Water,
            "building" => Self::Building,
            "tree" => Self::Tree,
            "restricted" => Self::Restricted,
            _ => return None,
        })
    }

    pub fn cell_class(self) -> CellClass {
        match self {
            Self::Trail => CellClass::Trail,
            Self::River | Self::Water => CellClass::Water,
            Self::Building | Self::Tree => CellClass::Obstacle,
            Self::Restricted => CellClass::Restricted,
        }
    }
}

/// Feature geometry. Coordinates are `(x, y)` in whatever space the
/// owning feature lives in (lon/lat for [`GeoFeature`], pixels for
/// [`PixelFeature`]).
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    MultiPoint(Vec<Point>),
    LineString(Vec<Point>),
    MultiLineString(Vec<Vec<Point>>),
    /// Exterior ring followed by holes.
    Polygon(Vec<Vec<Point>>),
    MultiPolygon(Vec<Vec<Vec<Point>>>),
    /// Anything else; rasterising it is an error.
    Unsupported(String),
}

impl Geometry {
    fn map_points(&self, f: &impl Fn(Point) -> Point) -> Geometry {
        let line = |l: &Vec<Point>| l.iter().map(|&p| f(p)).collect::<Vec<_>>();
        match self {
            Geometry::Point(p) => Geometry::Point(f(*p)),
            Geometry::MultiPoint(ps) => Geometry::MultiPoint(line(ps)),
            Geometry::LineString(l) => Geometry::LineString(line(l)),
            Geometry::MultiLineString(ls) => Geometry::MultiLineString(ls.iter().map(line).collect()),
            Geometry::Polygon(rs) => Geometry::Polygon(rs.iter().map(line).collect()),
            Geometry::MultiPolygon(ps) => {
                Geometry::MultiPolygon(ps.iter().map(|rs| rs.iter().map(line).collect()).collect())
            }
            Geometry::Unsupported(k) => Geometry::Unsupported(k.clone()),
        }
    }
}

/// A georeferenced feature (coordinates in lon/lat).
#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeature {
    pub class: FeatureClass,
    pub geometry: Geometry,
    /// Corridor width for line and point geometries, in pixels.
    pub width_px: Option<f64>,
}

/// A feature already expressed in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeature {
    pub class: CellClass,
    pub geometry: Geometry,
    pub width_px: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterOptions {
    pub trail_width_px: f64,
    pub river_width_px: f64,
    /// Used for lines and points of every other class.
    pub default_width_px: f64,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self {
            trail_width_px: 3.0,
            river_width_px: 5.0,
            default_width_px: 1.0,
        }
    }
}

impl RasterOptions {
    fn width_for(&self, class: CellClass) -> f64 {
        match class {
            CellClass::Trail => self.trail_width_px,
            CellClass::Water => self.river_width_px,
            _ => self.default_width_px,
        }
    }
}

/// Burns `features` into a copy of `map` in list order.
pub fn rasterize_features(
    map: &IntermediateMap,
    features: &[GeoFeature],
    opts: &RasterOptions,
) -> Result<IntermediateMap, GeoMapError> {
    let t = map.transform.clone();
    let pixel: Vec<PixelFeature> = features
        .iter()
        .map(|f| PixelFeature {
            class: f.class.cell_class(),
            geometry: f.geometry.map_points(&|p| t.geo_to_pixel(p.x, p.y)),
            width_px: f.width_px,
        })
        .collect();
    let mut out = map.clone();
    rasterize_pixel_features(&mut out, &pixel, opts)?;
    Ok(out)
}

/// In-place variant over pixel-space features.
pub fn rasterize_pixel_features(
    map: &mut IntermediateMap,
    features: &[PixelFeature],
    opts: &RasterOptions,
) -> Result<(), GeoMapError> {
    for (index, f) in features.iter().enumerate() {
        if let Geometry::Unsupported(kind) = &f.geometry {
            return Err(GeoMapError::UnsupportedGeometry {
                index,
                kind: kind.clone(),
            });
        }
    }
    for f in features {
        let width = f.width_px.unwrap_or_else(|| opts.width_for(f.class));
        match &f.geometry {
            Geometry::Point(p) => burn_point(map, *p, width, f.class),
            Geometry::MultiPoint(ps) => ps.iter().for_each(|&p| burn_point(map, p, width, f.class)),
            Geometry::LineString(l) => burn_line(map, l, width, f.class),
            Geometry::MultiLineString(ls) => ls.iter().for_each(|l| burn_line(map, l, width, f.class)),
            Geometry::Polygon(rings) => burn_polygon(map, rings, f.class),
            Geometry::MultiPolygon(ps) => ps.iter().for_each(|rs| burn_polygon(map, rs, f.class)),
            Geometry::Unsupported(_) => unreachable!(),
        }
    }
    Ok(())
}

fn burn_point(map: &mut IntermediateMap, p: Point, width: f64, class: CellClass) {
    let r = width * 0.5;
    let c = p.cell();
    map.set(c, class);
    let reach = r.ceil() as i32 + 1;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let q = c.offset(dx, dy);
            if segment_cell_distance(p, p, q) < r {
                map.set(q, class);
            }
        }
    }
}

/// Marks every cell whose footprint lies closer than `width / 2` to the
/// polyline.
fn burn_line(map: &mut IntermediateMap, line: &[Point], width: f64, class: CellClass) {
    let r = width * 0.5;
    if line.len() == 1 {
        burn_point(map, line[0], width, class);
        return;
    }
    // Cells within r of the segment are within r + 0.25 + sqrt(2)/2 of some
    // sample taken every half cell.
    let reach = (r + 1.0).ceil() as i32;
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.dist(b);
        let steps = (len / 0.5).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let s = a + (b - a) * (k as f64 / steps as f64);
            let c = s.cell();
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let q = c.offset(dx, dy);
                    if !map.in_bounds(q) {
                        continue;
                    }
                    if segment_cell_distance(a, b, q) < r {
                        map.set(q, class);
                    }
                }
            }
        }
    }
}

fn burn_polygon(map: &mut IntermediateMap, rings: &[Vec<Point>], class: CellClass) {
    let w = map.width();
    let cells = map.cells_mut();
    scanline_fill(rings, FillRule::EvenOdd, w, cells.len() / w.max(1), |x, y| {
        cells[y * w + x] = class;
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FillRule {
    EvenOdd,
    NonZero,
}

/// Calls `f(x, y)` for every in-bounds cell whose centre is inside the
/// rings. Edge crossings use the half-open rule of the winding-number test,
/// so results agree with a per-cell [`winding_number`] evaluation.
///
/// [`winding_number`]: crate::geometry::winding_number
pub(crate) fn scanline_fill(
    rings: &[Vec<Point>],
    rule: FillRule,
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize),
) {
    let pts = rings.iter().flatten();
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    if !ymin.is_finite() || width == 0 || height == 0 {
        return;
    }
    let y0 = ymin.ceil().max(0.0) as i64;
    let y1 = ymax.floor().min(height as f64 - 1.0) as i64;
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for y in y0..=y1 {
        let yf = y as f64;
        crossings.clear();
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                let dir = if a.y <= yf && b.y > yf {
                    1
                } else if b.y <= yf && a.y > yf {
                    -1
                } else {
                    continue;
                };
                let xc = a.x + (yf - a.y) * (b.x - a.x) / (b.y - a.y);
                crossings.push((xc, dir));
            }
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
        // A cell centre at x sees the crossings with xc > x.
        let mut wn: i32 = crossings.iter().map(|c| c.1).sum();
        let mut parity = crossings.len() % 2;
        let mut x = 0i64;
        let mut k = 0usize;
        while x < width as i64 {
            while k < crossings.len() && crossings[k].0 <= x as f64 {
                wn -= crossings[k].1;
                parity ^= 1;
                k += 1;
            }
            let next = if k < crossings.len() {
                // first integer strictly above the crossing stays in this span
                (crossings[k].0.ceil() as i64).clamp(x + 1, width as i64)
            } else {
                width as i64
            };
            let inside = match rule {
                FillRule::NonZero => wn != 0,
                FillRule::EvenOdd => parity == 1,
            };
            if inside {
                for xi in x..next {
                    f(xi as usize, y as usize);
                }
            }
            if k >= crossings.len() && !inside {
                break;
            }
            x = next;
        }
    }
}
