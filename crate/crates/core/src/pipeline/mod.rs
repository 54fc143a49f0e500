//! End-to-end planning: overlays, trail entry/exit selection, off-trail grid
//! legs, kinematic repair, smoothing and geographic projection.

mod polish;

use crate::geomap::overlay::{apply_area_overlay_in_place, validate_polygon};
use crate::geomap::{GeoMapError, IntermediateMap, OverlayKind};
use crate::geometry::{GridPos, PixelPath, Point, Pose};
use crate::kino::{repair_path_with, KinematicModel, RepairConfig};
use crate::metrics::{csd_px, max_abs_curvature_px, min_obstacle_distance_px, peak_rss_bytes, reset_peak_rss};
use crate::search::{astar, jps, GridPath, SearchError};
use crate::smooth::{densify, smooth_path_windowed_indexed, SmoothingParams};
use crate::trails::{find_closest_poses, select_optimal_pair, GoalPoseQuery, TrailError, TrailNetwork};
use polish::polish_leg;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPose {
    pub lon: f64,
    pub lat: f64,
    /// Radians, counter-clockwise from the +x pixel axis.
    #[serde(default)]
    pub heading: f64,
}

impl GeoPose {
    pub fn new(lon: f64, lat: f64) -> Self {
        GeoPose { lon, lat, heading: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    #[default]
    TrailPreferred,
    /// Ignore the trail network: one grid search from start to target.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPlanner {
    Astar,
    #[default]
    Jps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordSpace {
    /// `[lon, lat]` vertices.
    #[default]
    Geo,
    /// `[x, y]` pixel vertices.
    Pixel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaOverlay {
    pub polygon: Vec<[f64; 2]>,
    pub kind: OverlayKind,
    #[serde(default)]
    pub space: CoordSpace,
}

impl AreaOverlay {
    pub fn pixel(polygon: &[Point], kind: OverlayKind) -> Self {
        AreaOverlay {
            polygon: polygon.iter().map(|p| [p.x, p.y]).collect(),
            kind,
            space: CoordSpace::Pixel,
        }
    }

    pub fn pixel_polygon(&self, map: &IntermediateMap) -> Vec<Point> {
        self.polygon
            .iter()
            .map(|&[a, b]| match self.space {
                CoordSpace::Geo => map.transform.geo_to_pixel(a, b),
                CoordSpace::Pixel => Point::new(a, b),
            })
            .collect()
    }

    /// Rejects polygons with fewer than 3 vertices, non-finite coordinates
    /// or zero area once projected onto `map`.
    pub fn validate(&self, map: &IntermediateMap) -> Result<(), GeoMapError> {
        validate_polygon(&self.pixel_polygon(map))
    }
}

/// Bicycle-model parameters; the pixel scale comes from the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Metres.
    pub wheelbase: f64,
    /// Radians.
    pub phi_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 2.5,
            phi_max: 0.5,
        }
    }
}

/// Half-extents and growth of the candidate search rectangle, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    pub poly_md: f64,
    pub poly_sd: f64,
    pub poly_md_max: f64,
    pub poly_sd_max: f64,
    pub md_i: f64,
    pub sd_i: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
}

impl Default for QueryParams {
    fn default() -> Self {
        let q = GoalPoseQuery::new(Pose::default(), 0.0);
        QueryParams {
            poly_md: q.poly_md,
            poly_sd: q.poly_sd,
            poly_md_max: q.poly_md_max,
            poly_sd_max: q.poly_sd_max,
            md_i: q.md_i,
            sd_i: q.sd_i,
            dbscan_eps: q.dbscan_eps,
            dbscan_min_pts: q.dbscan_min_pts,
        }
    }
}

impl QueryParams {
    fn query(&self, g_o: Pose, direction: f64) -> GoalPoseQuery {
        GoalPoseQuery {
            g_o,
            direction,
            poly_md: self.poly_md,
            poly_sd: self.poly_sd,
            poly_md_max: self.poly_md_max,
            poly_sd_max: self.poly_sd_max,
            md_i: self.md_i,
            sd_i: self.sd_i,
            dbscan_eps: self.dbscan_eps,
            dbscan_min_pts: self.dbscan_min_pts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    pub query: QueryParams,
    /// Douglas-Peucker tolerance applied to grid legs, pixels.
    pub simplify_tolerance: f64,
    /// Upper bound on polyline spacing before repair, pixels.
    pub max_spacing: f64,
    pub repair: bool,
    pub smooth: bool,
    /// `k_max` is always taken from the vehicle.
    pub smoothing: SmoothingParams,
    pub initial_slice_offset: f64,
    /// Overrides the map's own ground resolution.
    pub meters_per_pixel: Option<f64>,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            query: QueryParams::default(),
            simplify_tolerance: 1.2,
            max_spacing: 2.0,
            repair: true,
            smooth: true,
            smoothing: SmoothingParams::default(),
            initial_slice_offset: 100.0,
            meters_per_pixel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub start: GeoPose,
    pub target: GeoPose,
    #[serde(default)]
    pub mode: PlanMode,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub overlays: Vec<AreaOverlay>,
    #[serde(default)]
    pub planner: GridPlanner,
    #[serde(default)]
    pub params: PlanParams,
}

impl PlanRequest {
    pub fn new(start: GeoPose, target: GeoPose) -> Self {
        PlanRequest {
            start,
            target,
            mode: PlanMode::default(),
            vehicle: VehicleParams::default(),
            overlays: Vec::new(),
            planner: GridPlanner::default(),
            params: PlanParams::default(),
        }
    }

    /// Request between two pixel positions of `map`.
    pub fn between_pixels(map: &IntermediateMap, s: Point, t: Point) -> Self {
        let geo = |p: Point| {
            let (lon, lat) = map.transform.pixel_to_geo(p.x, p.y);
            GeoPose::new(lon, lat)
        };
        Self::new(geo(s), geo(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    OffroadStart,
    Trail,
    OffroadEnd,
    /// The whole path when no trail was used.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub path: PixelPath,
}

/// Wall time per stage in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub overlays: f64,
    pub closest_poses: f64,
    pub trail: f64,
    pub grid_search: f64,
    pub polish: f64,
    pub repair: f64,
    pub smoothing: f64,
    pub projection: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub length_m: f64,
    /// Largest |curvature|, 1/m.
    pub max_curvature: f64,
    /// Curvature standard deviation, 1/m; absent for paths under 3 points.
    pub csd: Option<f64>,
    /// Minimum obstacle distance, m; absent (unbounded) on obstacle-free maps.
    pub mod_m: Option<f64>,
    pub timings_ms: StageTimings,
    /// Process resident-set high-water mark after planning.
    pub peak_memory_bytes: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Trail entry and exit in pixels.
    pub s_bar: Option<Pose>,
    pub t_bar: Option<Pose>,
    pub repaired_segments: usize,
    /// Infeasible intervals that could not be replanned and were kept.
    pub failed_segments: usize,
    pub mode_used: PlanMode,
    /// True when a trail-preferred request fell back to a direct search.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub segments: Vec<Segment>,
    pub path: PixelPath,
    /// `[lon, lat]` of every pose of `path`.
    pub geo_path: Vec<[f64; 2]>,
    pub metrics: PlanMetrics,
    pub diagnostics: Diagnostics,
}

impl PlanResult {
    /// Equality ignoring timings and memory.
    pub fn same_route(&self, other: &PlanResult) -> bool {
        let strip = |r: &PlanResult| {
            let mut r = r.clone();
            r.metrics.timings_ms = StageTimings::default();
            r.metrics.peak_memory_bytes = None;
            r
        };
        strip(self) == strip(other)
    }

    /// GeoJSON Feature with a LineString geometry.
    pub fn to_geojson(&self) -> geojson::Feature {
        let line: Vec<Vec<f64>> = self.geo_path.iter().map(|c| c.to_vec()).collect();
        let mut props = serde_json::Map::new();
        props.insert("length_m".into(), self.metrics.length_m.into());
        props.insert("max_curvature".into(), self.metrics.max_curvature.into());
        props.insert("csd".into(), self.metrics.csd.into());
        props.insert("mod_m".into(), self.metrics.mod_m.into());
        props.insert(
            "mode".into(),
            serde_json::to_value(self.diagnostics.mode_used).expect("enum serializes"),
        );
        geojson::Feature {
            bbox: None,
            geometry: Some(geojson::Geometry::new(geojson::Value::LineString(line))),
            id: None,
            properties: Some(props),
            foreign_members: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Overlays,
    Trail,
    GridSearch,
    Repair,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Overlays => "overlays",
            Stage::Trail => "trail",
            Stage::GridSearch => "grid_search",
            Stage::Repair => "repair",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{which} ({lon}, {lat}) is outside the map")]
    OutOfBounds { which: &'static str, lon: f64, lat: f64 },
    #[error("unreachable at stage {stage}: {detail}")]
    Unreachable { stage: Stage, detail: String },
}

/// Shared, immutable planning context.
#[derive(Debug, Clone)]
pub struct Planner {
    pub map: Arc<IntermediateMap>,
    pub net: Arc<TrailNetwork>,
}

impl Planner {
    pub fn new(map: IntermediateMap, net: TrailNetwork) -> Self {
        Planner {
            map: Arc::new(map),
            net: Arc::new(net),
        }
    }

    /// Builds the trail network with downsampling factor `d_f`.
    pub fn from_map(map: IntermediateMap, d_f: f64) -> Result<Self, TrailError> {
        let net = TrailNetwork::build(&map, d_f)?;
        Ok(Self::new(map, net))
    }

    pub fn plan(&self, request: &PlanRequest) -> Result<PlanResult, PlanError> {
        plan(request, &self.map, &self.net)
    }

    /// Plans `previous` again under a new overlay list. Nothing is cached
    /// between calls, so this equals a fresh [`plan`] of the new request.
    pub fn replan_with_overlays(
        &self,
        previous: &PlanRequest,
        overlays: Vec<AreaOverlay>,
    ) -> Result<PlanResult, PlanError> {
        let req = PlanRequest {
            overlays,
            ..previous.clone()
        };
        self.plan(&req)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Applies overlays to a copy of `map`: passable areas first, restricted
/// areas last so they win where both overlap.
pub fn apply_overlays<'a>(
    map: &'a IntermediateMap,
    overlays: &[AreaOverlay],
) -> Result<Cow<'a, IntermediateMap>, PlanError> {
    if overlays.is_empty() {
        return Ok(Cow::Borrowed(map));
    }
    let mut out = map.clone();
    for kind in [OverlayKind::Passable, OverlayKind::Restricted] {
        for o in overlays.iter().filter(|o| o.kind == kind) {
            let poly = o.pixel_polygon(map);
            validate_polygon(&poly).map_err(|e| PlanError::InvalidRequest(format!("overlay: {e}")))?;
            apply_area_overlay_in_place(&mut out, &poly, kind)
                .map_err(|e| PlanError::InvalidRequest(format!("overlay: {e}")))?;
        }
    }
    Ok(Cow::Owned(out))
}

/// Candidate trail entries near `s` and exits near `t`.
pub fn candidate_poses(net: &TrailNetwork, s: Pose, t: Pose, q: &QueryParams) -> (Vec<Pose>, Vec<Pose>) {
    let dir = (t.point() - s.point()).heading();
    let cs = find_closest_poses(net, &q.query(s, dir));
    let ct = find_closest_poses(net, &q.query(t, dir + PI));
    (cs, ct)
}

fn endpoint(map: &IntermediateMap, g: &GeoPose, which: &'static str) -> Result<Pose, PlanError> {
    if !(g.lon.is_finite() && g.lat.is_finite() && g.heading.is_finite()) {
        return Err(PlanError::InvalidRequest(format!("{which} has non-finite coordinates")));
    }
    let c = map.transform.geo_to_pixel(g.lon, g.lat).cell();
    if !map.in_bounds(c) {
        return Err(PlanError::OutOfBounds {
            which,
            lon: g.lon,
            lat: g.lat,
        });
    }
    Ok(Pose::new(c.x as f64, c.y as f64, g.heading))
}

fn grid_leg(map: &IntermediateMap, planner: GridPlanner, s: Pose, t: Pose) -> Result<GridPath, SearchError> {
    match planner {
        GridPlanner::Astar => astar(map, s, t),
        GridPlanner::Jps => jps(map, s, t),
    }
}

fn unreachable(stage: Stage, e: impl std::fmt::Display) -> PlanError {
    PlanError::Unreachable {
        stage,
        detail: e.to_string(),
    }
}

/// Trail route: the two off-trail legs and the trail cells between them.
struct TrailRoute {
    s_bar: Pose,
    t_bar: Pose,
    legs: [Vec<GridPos>; 3],
}

fn trail_route(
    map: &IntermediateMap,
    net: &TrailNetwork,
    s: Pose,
    t: Pose,
    req: &PlanRequest,
    timings: &mut StageTimings,
) -> Option<TrailRoute> {
    if net.is_empty() {
        return None;
    }
    let t0 = Instant::now();
    let (cs, ct) = candidate_poses(net, s, t, &req.params.query);
    timings.closest_poses = ms(t0);
    let t0 = Instant::now();
    let sel = select_optimal_pair(net, map, &cs, &ct, Some((s.point(), t.point())));
    timings.trail = ms(t0);
    let sel = sel.ok()?;
    let t0 = Instant::now();
    let a = grid_leg(map, req.planner, s, Pose::at(sel.s_bar.point()));
    let b = grid_leg(map, req.planner, Pose::at(sel.t_bar.point()), t);
    timings.grid_search = ms(t0);
    let (a, b) = (a.ok()?, b.ok()?);
    Some(TrailRoute {
        s_bar: sel.s_bar,
        t_bar: sel.t_bar,
        legs: [a.points, sel.cells, b.points],
    })
}

/// Runs the whole planning flow for one request.
pub fn plan(req: &PlanRequest, base: &IntermediateMap, base_net: &TrailNetwork) -> Result<PlanResult, PlanError> {
    let total = Instant::now();
    reset_peak_rss();
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let map = apply_overlays(base, &req.overlays)?;
    let map: &IntermediateMap = &map;
    let restricted = req.overlays.iter().any(|o| o.kind == OverlayKind::Restricted);
    let net: Cow<TrailNetwork> = if restricted {
        Cow::Owned(base_net.restricted_to(map))
    } else {
        Cow::Borrowed(base_net)
    };
    timings.overlays = ms(t0);

    let s = endpoint(map, &req.start, "start")?;
    let t = endpoint(map, &req.target, "target")?;
    if s.cell() == t.cell() {
        return Err(PlanError::InvalidRequest("start and target fall in the same cell".into()));
    }
    for (p, which) in [(s, "start"), (t, "target")] {
        if !map.is_traversable(p.cell()) {
            return Err(unreachable(Stage::GridSearch, format!("{which} cell is not traversable")));
        }
    }
    let mpp = req.params.meters_per_pixel.unwrap_or_else(|| map.meters_per_pixel());
    let model = KinematicModel::new(req.vehicle.wheelbase, req.vehicle.phi_max, mpp)
        .map_err(|e| PlanError::InvalidRequest(e.to_string()))?;

    let route = match req.mode {
        PlanMode::TrailPreferred => trail_route(map, &net, s, t, req, &mut timings),
        PlanMode::Direct => None,
    };
    let fallback = route.is_none() && req.mode == PlanMode::TrailPreferred;
    let (legs, s_bar, t_bar) = match route {
        Some(r) => (r.legs.to_vec(), Some(r.s_bar), Some(r.t_bar)),
        None => {
            let t0 = Instant::now();
            let g = grid_leg(map, req.planner, s, t).map_err(|e| unreachable(Stage::GridSearch, e));
            timings.grid_search += ms(t0);
            (vec![g?.points], None, None)
        }
    };

    // polish each leg separately so trail joints stay exact vertices
    let t0 = Instant::now();
    let spacing = req.params.max_spacing.min(0.5 * model.rho_min_px()).max(0.1);
    let mut pts: Vec<Point> = Vec::new();
    let mut joints = vec![0usize];
    for leg in &legs {
        let p = polish_leg(leg, req.params.simplify_tolerance, spacing, map);
        let skip = usize::from(!pts.is_empty());
        pts.extend_from_slice(&p[skip.min(p.len())..]);
        joints.push(pts.len() - 1);
    }
    let mut path = PixelPath::from_points(&pts);
    timings.polish = ms(t0);

    let t0 = Instant::now();
    let mut diag = Diagnostics {
        s_bar,
        t_bar,
        repaired_segments: 0,
        failed_segments: 0,
        mode_used: if legs.len() == 3 { PlanMode::TrailPreferred } else { PlanMode::Direct },
        fallback,
    };
    let mut frozen_ranges: Vec<(usize, usize)> = Vec::new();
    if req.params.repair && path.len() >= 3 {
        let cfg = RepairConfig {
            initial_offset: req.params.initial_slice_offset,
            keep_failed: true,
            ..RepairConfig::default()
        };
        let r = repair_path_with(&path, map, &model, &cfg).map_err(|e| unreachable(Stage::Repair, e))?;
        diag.repaired_segments = r.repaired.len();
        diag.failed_segments = r.failed.len();
        for j in joints.iter_mut() {
            *j = r.index_map[*j];
        }
        frozen_ranges = r.repaired;
        path = r.path;
    }
    timings.repair = ms(t0);

    let t0 = Instant::now();
    if req.params.smooth && path.len() >= 3 {
        let mut frozen: Vec<usize> = joints.clone();
        for &(a, b) in &frozen_ranges {
            frozen.extend(a..=b);
        }
        if legs.len() == 3 {
            frozen.extend(joints[1]..=joints[2]);
        }
        let params = SmoothingParams {
            k_max: model.k_max_px(),
            ..req.params.smoothing
        };
        let (p, index_map) = smooth_path_windowed_indexed(&path, map, &params, &frozen);
        for j in joints.iter_mut() {
            *j = index_map[*j];
        }
        path = p;
    }
    if path.max_gap() > 2.0 * SQRT_2 {
        let (p, index_map) = densify(&path.points(), 2.0);
        for j in joints.iter_mut() {
            *j = index_map[*j];
        }
        let mut poses: Vec<Pose> = p.into_iter().map(Pose::at).collect();
        crate::geometry::assign_headings(&mut poses);
        path = PixelPath::new(poses);
    }
    timings.smoothing = ms(t0);

    let t0 = Instant::now();
    let kinds: &[SegmentKind] = if legs.len() == 3 {
        &[SegmentKind::OffroadStart, SegmentKind::Trail, SegmentKind::OffroadEnd]
    } else {
        &[SegmentKind::Direct]
    };
    let segments = kinds
        .iter()
        .zip(joints.windows(2))
        .filter(|(_, w)| w[1] > w[0])
        .map(|(&kind, w)| Segment {
            kind,
            path: PixelPath::new(path.poses[w[0]..=w[1]].to_vec()),
        })
        .collect();
    let geo_path = path
        .poses
        .iter()
        .map(|p| {
            let (lon, lat) = map.transform.pixel_to_geo(p.x, p.y);
            [lon, lat]
        })
        .collect();
    timings.projection = ms(t0);

    let metrics = PlanMetrics {
        length_m: path.length() * mpp,
        max_curvature: max_abs_curvature_px(&path) / mpp,
        csd: csd_px(&path).ok().map(|c| c / mpp),
        mod_m: min_obstacle_distance_px(&path, map).map(|d| d * mpp),
        timings_ms: StageTimings {
            total: ms(total),
            ..timings
        },
        peak_memory_bytes: peak_rss_bytes(),
    };
    Ok(PlanResult {
        segments,
        path,
        geo_path,
        metrics,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests;
