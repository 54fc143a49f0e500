//! Map ingestion and the binary map cache.
//!
//! Cache layout (all little-endian):
//!
//! ```text
//! "OFRM" | u32 width | u32 height | 8 x f64 transform | width*height u8 cell codes
//! ```
//!
//! The eight transform values are `x_origin, pixel_width, 0, y_origin, 0,
//! pixel_height` (GDAL order, centre-of-cell origin) followed by the EPSG
//! code and a reserved zero.

use super::raster::{FeatureClass, GeoFeature, Geometry};
use super::{CellClass, GeoMapError, GeoTransform, IntermediateMap};
use crate::geometry::Point;
use byteorder::{BigEndian, ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CACHE_MAGIC: &[u8; 4] = b"OFRM";

pub fn write_cache(map: &IntermediateMap, mut w: impl Write) -> Result<(), GeoMapError> {
    let t = &map.transform;
    let epsg = t
        .crs_id
        .strip_prefix("EPSG:")
        .and_then(|c| c.parse::<f64>().ok())
        .unwrap_or(4326.0);
    w.write_all(CACHE_MAGIC)?;
    w.write_u32::<LittleEndian>(map.width() as u32)?;
    w.write_u32::<LittleEndian>(map.height() as u32)?;
    for v in [t.x_origin, t.pixel_width, 0.0, t.y_origin, 0.0, t.pixel_height, epsg, 0.0] {
        w.write_f64::<LittleEndian>(v)?;
    }
    // CellClass is repr(u8) with the on-disk codes as discriminants
    let bytes: Vec<u8> = map.cells().iter().map(|c| c.code()).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_cache(mut r: impl Read) -> Result<IntermediateMap, GeoMapError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(GeoMapError::Format("bad cache magic".into()));
    }
    let width = r.read_u32::<LittleEndian>()? as usize;
    let height = r.read_u32::<LittleEndian>()? as usize;
    let mut v = [0f64; 8];
    for x in v.iter_mut() {
        *x = r.read_f64::<LittleEndian>()?;
    }
    if v[2] != 0.0 || v[4] != 0.0 {
        return Err(GeoMapError::Format("rotated transforms are not supported".into()));
    }
    let mut t = GeoTransform::new(v[0], v[3], v[1], v[5])?;
    if v[6] > 0.0 {
        t.crs_id = format!("EPSG:{}", v[6] as u32);
    }
    let mut bytes = vec![0u8; width * height];
    r.read_exact(&mut bytes)?;
    let cells = bytes
        .iter()
        .map(|&b| CellClass::from_code(b).ok_or_else(|| GeoMapError::Format(format!("bad cell code {b}"))))
        .collect::<Result<Vec<_>, _>>()?;
    IntermediateMap::from_cells(width, height, cells, t)
}

pub fn save_cache(map: &IntermediateMap, path: &Path) -> Result<(), GeoMapError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cache(map, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<IntermediateMap, GeoMapError> {
    read_cache(BufReader::new(File::open(path)?))
}

/// Parses a six-line world file (`A D B E C F`). `C, F` already give the
/// centre of the upper-left pixel.
pub fn parse_world_file(text: &str) -> Result<GeoTransform, GeoMapError> {
    let vals = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|e| GeoMapError::Format(format!("world file: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() != 6 {
        return Err(GeoMapError::Format(format!("world file has {} values, expected 6", vals.len())));
    }
    if vals[1] != 0.0 || vals[2] != 0.0 {
        return Err(GeoMapError::Format("rotated world files are not supported".into()));
    }
    GeoTransform::new(vals[4], vals[5], vals[0], vals[3])
}

/// Reads only the dimensions and georeference tags of a (classic) GeoTIFF:
/// ImageWidth, ImageLength, ModelPixelScale and ModelTiepoint. Pixel data
/// is never decoded.
pub fn read_geotiff_header(mut r: impl Read) -> Result<(usize, usize, GeoTransform), GeoMapError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let bad = |m: &str| GeoMapError::Format(format!("tiff: {m}"));
    if buf.len() < 8 {
        return Err(bad("truncated header"));
    }
    let big = match &buf[0..2] {
        b"II" => false,
        b"MM" => true,
        _ => return Err(bad("not a TIFF")),
    };
    let u16_at = |o: usize| -> Result<u16, GeoMapError> {
        let s = buf.get(o..o + 2).ok_or_else(|| bad("truncated"))?;
        Ok(if big { BigEndian::read_u16(s) } else { LittleEndian::read_u16(s) })
    };
    let u32_at = |o: usize| -> Result<u32, GeoMapError> {
        let s = buf.get(o..o + 4).ok_or_else(|| bad("truncated"))?;
        Ok(if big { BigEndian::read_u32(s) } else { LittleEndian::read_u32(s) })
    };
    let f64_at = |o: usize| -> Result<f64, GeoMapError> {
        let s = buf.get(o..o + 8).ok_or_else(|| bad("truncated"))?;
        Ok(if big { BigEndian::read_f64(s) } else { LittleEndian::read_f64(s) })
    };
    if u16_at(2)? != 42 {
        return Err(bad("unsupported TIFF variant (BigTIFF?)"));
    }
    let ifd = u32_at(4)? as usize;
    let n = u16_at(ifd)? as usize;
    let (mut width, mut height) = (None, None);
    let (mut scale, mut tie) = (None, None);
    for k in 0..n {
        let e = ifd + 2 + 12 * k;
        let tag = u16_at(e)?;
        let typ = u16_at(e + 2)?;
        let count = u32_at(e + 4)? as usize;
        let int_value = || -> Result<usize, GeoMapError> {
            Ok(match typ {
                3 => u16_at(e + 8)? as usize,
                4 => u32_at(e + 8)? as usize,
                _ => return Err(bad("unexpected dimension type")),
            })
        };
        let doubles = |min: usize| -> Result<Vec<f64>, GeoMapError> {
            if typ != 12 || count < min {
                return Err(bad("georeference tag must hold doubles"));
            }
            let off = u32_at(e + 8)? as usize;
            (0..count).map(|i| f64_at(off + 8 * i)).collect()
        };
        match tag {
            256 => width = Some(int_value()?),
            257 => height = Some(int_value()?),
            33550 => scale = Some(doubles(2)?),
            33922 => tie = Some(doubles(6)?),
            _ => {}
        }
    }
    let (width, height) = (width.ok_or_else(|| bad("no width"))?, height.ok_or_else(|| bad("no height"))?);
    let scale = scale.ok_or_else(|| bad("no ModelPixelScale tag"))?;
    let tie = tie.ok_or_else(|| bad("no ModelTiepoint tag"))?;
    // tiepoint raster (i, j) refers to the pixel corner; shift to the centre
    let (sx, sy) = (scale[0], -scale[1]);
    let x0 = tie[3] - tie[0] * sx + 0.5 * sx;
    let y0 = tie[4] - tie[1] * sy + 0.5 * sy;
    Ok((width, height, GeoTransform::new(x0, y0, sx, sy)?))
}

/// Parses a GeoJSON FeatureCollection (or single Feature). The `class`
/// property selects the cell class; an optional numeric `width_px` sets
/// the corridor width of line/point features.
pub fn parse_geojson(text: &str) -> Result<Vec<GeoFeature>, GeoMapError> {
    use geojson::{GeoJson, Value};
    let gj: GeoJson = text
        .parse()
        .map_err(|e: geojson::Error| GeoMapError::Format(format!("geojson: {e}")))?;
    let features = match gj {
        GeoJson::FeatureCollection(fc) => fc.features,
        GeoJson::Feature(f) => vec![f],
        GeoJson::Geometry(_) => {
            return Err(GeoMapError::Format("expected a Feature or FeatureCollection".into()))
        }
    };
    let pos = |p: &Vec<f64>| Point::new(p[0], p[1]);
    let line = |l: &Vec<Vec<f64>>| l.iter().map(pos).collect::<Vec<_>>();
    let ring = |r: &Vec<Vec<f64>>| {
        let mut pts = line(r);
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        pts
    };
    let mut out = Vec::with_capacity(features.len());
    for (index, f) in features.iter().enumerate() {
        let class = f
            .property("class")
            .and_then(|v| v.as_str())
            .and_then(FeatureClass::parse)
            .ok_or_else(|| GeoMapError::InvalidFeature {
                index,
                reason: "missing or unknown `class` property".into(),
            })?;
        let width_px = f.property("width_px").and_then(|v| v.as_f64());
        let geometry = match f.geometry.as_ref().map(|g| &g.value) {
            Some(Value::Point(p)) => Geometry::Point(pos(p)),
            Some(Value::MultiPoint(ps)) => Geometry::MultiPoint(line(ps)),
            Some(Value::LineString(l)) => Geometry::LineString(line(l)),
            Some(Value::MultiLineString(ls)) => Geometry::MultiLineString(ls.iter().map(line).collect()),
            Some(Value::Polygon(rs)) => Geometry::Polygon(rs.iter().map(ring).collect()),
            Some(Value::MultiPolygon(ps)) => {
                Geometry::MultiPolygon(ps.iter().map(|rs| rs.iter().map(ring).collect()).collect())
            }
            Some(Value::GeometryCollection(_)) => Geometry::Unsupported("GeometryCollection".into()),
            None => Geometry::Unsupported("null".into()),
        };
        out.push(GeoFeature {
            class,
            geometry,
            width_px,
        });
    }
    Ok(out)
}
