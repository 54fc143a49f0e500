//! HTTP service and command-line front end for the planner.

pub mod service;
pub mod session;

use offroad_core::geomap::io::{load_cache, parse_geojson};
use offroad_core::geomap::{rasterize_features, RasterOptions};
use offroad_core::trails::DEFAULT_DOWNSAMPLE;
use offroad_core::{GeoMapError, GeoPose, IntermediateMap, Planner, TrailError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("map {path}: {source}")]
    Map { path: String, source: GeoMapError },
    #[error("trails {path}: {source}")]
    Trails { path: String, source: GeoMapError },
    #[error("trail network: {0}")]
    Network(#[from] TrailError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Loads a map cache, burns in an optional GeoJSON feature file and builds
/// the trail index.
pub fn load_planner(map: &Path, trails: Option<&Path>) -> Result<Planner, LoadError> {
    let mut m: IntermediateMap = load_cache(map).map_err(|source| LoadError::Map {
        path: map.display().to_string(),
        source,
    })?;
    if let Some(t) = trails {
        let err = |source| LoadError::Trails {
            path: t.display().to_string(),
            source,
        };
        let feats = parse_geojson(&std::fs::read_to_string(t)?).map_err(err)?;
        m = rasterize_features(&m, &feats, &RasterOptions::default()).map_err(err)?;
    }
    Ok(Planner::from_map(m, DEFAULT_DOWNSAMPLE)?)
}

/// Parses `lon,lat`.
pub fn parse_lon_lat(s: &str) -> Result<GeoPose, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lon,lat, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let (lon, lat) = (num(a)?, num(b)?);
    if !(lon.is_finite() && lat.is_finite()) {
        return Err(format!("non-finite coordinate in `{s}`"));
    }
    Ok(GeoPose::new(lon, lat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lon_lat_parsing() {
        let p = parse_lon_lat("24.1, 61.25").unwrap();
        assert_eq!((p.lon, p.lat), (24.1, 61.25));
        assert!(parse_lon_lat("24.1").is_err());
        assert!(parse_lon_lat("a,1").is_err());
        assert!(parse_lon_lat("inf,1").is_err());
    }
}
