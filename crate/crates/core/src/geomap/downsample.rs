use super::{CellClass, GeoMapError, IntermediateMap};

/// Conservative block reduction by a real factor `d_f >= 1`.
///
/// Output cell `(i, j)` covers input columns
/// `floor(i * d_f) .. ceil((i + 1) * d_f)` (likewise rows). It is an
/// obstacle if any covered cell is non-traversable, otherwise a trail if
/// any covered cell is a trail.
pub fn downsample(map: &IntermediateMap, d_f: f64) -> Result<IntermediateMap, GeoMapError> {
    if !(d_f >= 1.0) || !d_f.is_finite() {
        return Err(GeoMapError::InvalidFactor(d_f));
    }
    let w = (map.width() as f64 / d_f).floor() as usize;
    let h = (map.height() as f64 / d_f).floor() as usize;
    if w == 0 || h == 0 {
        return Err(GeoMapError::EmptyDownsample {
            width: map.width(),
            height: map.height(),
            factor: d_f,
        });
    }
    if d_f == 1.0 {
        return Ok(map.clone());
    }
    let span = |i: usize, limit: usize| {
        let lo = (i as f64 * d_f).floor() as usize;
        let hi = (((i + 1) as f64 * d_f).ceil() as usize).min(limit);
        lo..hi
    };
    let src = map.cells();
    let sw = map.width();
    let mut cells = vec![CellClass::Free; w * h];
    for j in 0..h {
        let rows = span(j, map.height());
        for i in 0..w {
            let cols = span(i, sw);
            let mut blocked = false;
            let mut trail = false;
            let mut passable = false;
            'scan: for y in rows.clone() {
                for &c in &src[y * sw + cols.start..y * sw + cols.end] {
                    match c {
                        CellClass::Trail => trail = true,
                        CellClass::PassableOverride => passable = true,
                        CellClass::Free => {}
                        _ => {
                            blocked = true;
                            break 'scan;
                        }
                    }
                }
            }
            cells[j * w + i] = if blocked {
                CellClass::Obstacle
            } else if trail {
                CellClass::Trail
            } else if passable {
                CellClass::PassableOverride
            } else {
                CellClass::Free
            };
        }
    }
    IntermediateMap::from_cells(w, h, cells, map.transform.scaled(d_f))
}
