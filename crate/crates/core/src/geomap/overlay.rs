use super::raster::{scanline_fill, FillRule};
use super::{CellClass, GeoMapError, IntermediateMap};
use crate::geometry::{signed_area, Point};
use serde::{Deserialize, Serialize};

/// User-drawn area kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlayKind {
    Restricted,
    Passable,
}

impl OverlayKind {
    pub fn cell_class(self) -> CellClass {
        match self {
            OverlayKind::Restricted => CellClass::Obstacle,
            OverlayKind::Passable => CellClass::PassableOverride,
        }
    }
}

/// Marks every cell with a nonzero winding number around `polygon`
/// (convex or concave, pixel coordinates).
pub fn apply_area_overlay(
    map: &IntermediateMap,
    polygon: &[Point],
    kind: OverlayKind,
) -> Result<IntermediateMap, GeoMapError> {
    let mut out = map.clone();
    apply_area_overlay_in_place(&mut out, polygon, kind)?;
    Ok(out)
}

pub(crate) fn apply_area_overlay_in_place(
    map: &mut IntermediateMap,
    polygon: &[Point],
    kind: OverlayKind,
) -> Result<(), GeoMapError> {
    validate_polygon(polygon)?;
    let class = kind.cell_class();
    let w = map.width();
    let h = map.height();
    let cells = map.cells_mut();
    scanline_fill(&[polygon.to_vec()], FillRule::NonZero, w, h, |x, y| {
        cells[y * w + x] = class;
    });
    Ok(())
}

pub(crate) fn validate_polygon(polygon: &[Point]) -> Result<(), GeoMapError> {
    if polygon.len() < 3
        || polygon.iter().any(|p| !p.x.is_finite() || !p.y.is_finite())
        || signed_area(polygon).abs() < 1e-9
    {
        return Err(GeoMapError::DegeneratePolygon);
    }
    Ok(())
}
