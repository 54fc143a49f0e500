//! Pixel-coordinate intermediate map built from georeferenced features.
//!
//! The map is a flattened row-major array of [`CellClass`] values plus the
//! axis-aligned transform that ties pixel coordinates to EPSG:4326.

mod downsample;
mod inflate;
pub mod io;
pub(crate) mod overlay;
mod raster;
mod slice;

pub use downsample::downsample;
pub use inflate::{inflate_obstacles, inflate_within};
pub use overlay::{apply_area_overlay, OverlayKind};
pub use raster::{
    rasterize_features, rasterize_pixel_features, FeatureClass, GeoFeature, Geometry,
    PixelFeature, RasterOptions,
};
pub use slice::{slice_map, MapSlice, MIN_SLICE_SEPARATION};

use crate::geometry::{GridPos, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoMapError {
    #[error("invalid geo-transform: {0}")]
    InvalidTransform(String),
    #[error("cell buffer has {got} entries, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("feature {index}: unsupported geometry kind `{kind}`")]
    UnsupportedGeometry { index: usize, kind: String },
    #[error("feature {index}: {reason}")]
    InvalidFeature { index: usize, reason: String },
    #[error("degenerate polygon (fewer than 3 vertices or zero area)")]
    DegeneratePolygon,
    #[error("downsampling factor {0} must be >= 1")]
    InvalidFactor(f64),
    #[error("downsampling {width}x{height} by {factor} yields an empty map")]
    EmptyDownsample { width: usize, height: usize, factor: f64 },
    #[error("map format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Semantic class of one map cell. The discriminant is the on-disk code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum CellClass {
    #[default]
    Free = 0,
    Obstacle = 1,
    Trail = 2,
    Water = 3,
    Restricted = 4,
    PassableOverride = 5,
}

impl CellClass {
    pub fn is_traversable(self) -> bool {
        matches!(
            self,
            CellClass::Free | CellClass::Trail | CellClass::PassableOverride
        )
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => CellClass::Free,
            1 => CellClass::Obstacle,
            2 => CellClass::Trail,
            3 => CellClass::Water,
            4 => CellClass::Restricted,
            5 => CellClass::PassableOverride,
            _ => return None,
        })
    }
}

/// Axis-aligned raster georeference. `(x_origin, y_origin)` is the
/// longitude/latitude of the centre of cell `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub x_origin: f64,
    pub y_origin: f64,
    pub pixel_width: f64,
    pub pixel_height: f64,
    pub crs_id: String,
}

pub const DEFAULT_CRS: &str = "EPSG:4326";

impl GeoTransform {
    pub fn new(
        x_origin: f64,
        y_origin: f64,
        pixel_width: f64,
        pixel_height: f64,
    ) -> Result<Self, GeoMapError> {
        let t = Self {
            x_origin,
            y_origin,
            pixel_width,
            pixel_height,
            crs_id: DEFAULT_CRS.to_string(),
        };
        t.validate()?;
        Ok(t)
    }

    /// Identity-like transform for maps that live purely in pixel space.
    pub fn unit() -> Self {
        Self {
            x_origin: 0.0,
            y_origin: 0.0,
            pixel_width: 1.0,
            pixel_height: 1.0,
            crs_id: DEFAULT_CRS.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), GeoMapError> {
        let finite = [
            self.x_origin,
            self.y_origin,
            self.pixel_width,
            self.pixel_height,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(GeoMapError::InvalidTransform("non-finite value".into()));
        }
        if self.pixel_width == 0.0 || self.pixel_height == 0.0 {
            return Err(GeoMapError::InvalidTransform("zero pixel size".into()));
        }
        Ok(())
    }

    pub fn geo_to_pixel(&self, lon: f64, lat: f64) -> Point {
        Point::new(
            (lon - self.x_origin) / self.pixel_width,
            (lat - self.y_origin) / self.pixel_height,
        )
    }

    pub fn pixel_to_geo(&self, x_pix: f64, y_pix: f64) -> (f64, f64) {
        (
            self.x_origin + x_pix * self.pixel_width,
            self.y_origin + y_pix * self.pixel_height,
        )
    }

    /// Transform of a sub-grid whose cell `(0, 0)` is `origin` in this grid.
    pub fn shifted(&self, origin: GridPos) -> Self {
        let (lon, lat) = self.pixel_to_geo(origin.x as f64, origin.y as f64);
        Self {
            x_origin: lon,
            y_origin: lat,
            ..self.clone()
        }
    }

    /// Transform of a grid downsampled by `factor`; the new cell `(0, 0)`
    /// is centred on the block it covers.
    pub fn scaled(&self, factor: f64) -> Self {
        let half = 0.5 * (factor - 1.0);
        Self {
            x_origin: self.x_origin + half * self.pixel_width,
            y_origin: self.y_origin + half * self.pixel_height,
            pixel_width: self.pixel_width * factor,
            pixel_height: self.pixel_height * factor,
            ..self.clone()
        }
    }

    /// Ground size of one pixel in metres at latitude `lat`, averaged over
    /// both axes (WGS84 series expansion for metres per degree).
    pub fn meters_per_pixel_at(&self, lat: f64) -> f64 {
        let phi = lat.to_radians();
        let m_per_deg_lat =
            111_132.92 - 559.82 * (2.0 * phi).cos() + 1.175 * (4.0 * phi).cos();
        let m_per_deg_lon = 111_412.84 * phi.cos() - 93.5 * (3.0 * phi).cos();
        0.5 * (self.pixel_width.abs() * m_per_deg_lon + self.pixel_height.abs() * m_per_deg_lat)
    }

    /// [`meters_per_pixel_at`](Self::meters_per_pixel_at) evaluated at the
    /// map's mid-latitude.
    pub fn meters_per_pixel(&self, height: usize) -> f64 {
        let (_, lat) = self.pixel_to_geo(0.0, height as f64 * 0.5);
        self.meters_per_pixel_at(lat)
    }
}

/// Traversability grid stored as a flattened row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateMap {
    width: usize,
    height: usize,
    cells: Vec<CellClass>,
    pub transform: GeoTransform,
}

impl IntermediateMap {
    pub fn new(width: usize, height: usize, transform: GeoTransform) -> Self {
        Self::filled(width, height, CellClass::Free, transform)
    }

    pub fn filled(width: usize, height: usize, class: CellClass, transform: GeoTransform) -> Self {
        Self {
            width,
            height,
            cells: vec![class; width * height],
            transform,
        }
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        cells: Vec<CellClass>,
        transform: GeoTransform,
    ) -> Result<Self, GeoMapError> {
        if cells.len() != width * height {
            return Err(GeoMapError::SizeMismatch {
                expected: width * height,
                got: cells.len(),
            });
        }
        transform.validate()?;
        Ok(Self {
            width,
            height,
            cells,
            transform,
        })
    }

    /// Parses an ASCII picture: `.` free, `#` obstacle, `T` trail, `~` water,
    /// `R` restricted, `P` passable. Handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let cells = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), width, "ragged ascii map");
                r.chars().map(|c| match c {
                    '#' => CellClass::Obstacle,
                    'T' => CellClass::Trail,
                    '~' => CellClass::Water,
                    'R' => CellClass::Restricted,
                    'P' => CellClass::PassableOverride,
                    _ => CellClass::Free,
                })
            })
            .collect();
        Self {
            width,
            height,
            cells,
            transform: GeoTransform::unit(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[CellClass] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [CellClass] {
        &mut self.cells
    }

    pub fn in_bounds(&self, p: GridPos) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    /// Flat index `y * width + x`; `None` out of bounds.
    pub fn index(&self, p: GridPos) -> Option<usize> {
        self.in_bounds(p)
            .then(|| p.y as usize * self.width + p.x as usize)
    }

    pub fn pos(&self, index: usize) -> GridPos {
        GridPos::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn get(&self, p: GridPos) -> Option<CellClass> {
        self.index(p).map(|i| self.cells[i])
    }

    /// Out-of-bounds cells are not traversable.
    pub fn is_traversable(&self, p: GridPos) -> bool {
        self.get(p).is_some_and(CellClass::is_traversable)
    }

    pub fn is_traversable_at(&self, p: Point) -> bool {
        self.is_traversable(p.cell())
    }

    pub fn set(&mut self, p: GridPos, class: CellClass) -> bool {
        match self.index(p) {
            Some(i) => {
                self.cells[i] = class;
                true
            }
            None => false,
        }
    }

    /// Copies the `w x h` window at `origin`; cells outside the parent are
    /// obstacles.
    pub fn crop(&self, origin: GridPos, w: usize, h: usize) -> IntermediateMap {
        let mut out = IntermediateMap::filled(w, h, CellClass::Obstacle, self.transform.shifted(origin));
        for y in 0..h {
            let py = origin.y + y as i32;
            if py < 0 || py as usize >= self.height {
                continue;
            }
            for x in 0..w {
                let px = origin.x + x as i32;
                if px < 0 || px as usize >= self.width {
                    continue;
                }
                out.cells[y * w + x] = self.cells[py as usize * self.width + px as usize];
            }
        }
        out
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cells.iter().filter(|&&c| c == class).count()
    }

    pub fn has_obstacles(&self) -> bool {
        self.cells.iter().any(|c| !c.is_traversable())
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.transform.meters_per_pixel(self.height)
    }
}
