//! JSON API over a loaded map: planning, user-drawn areas, map tiles and
//! field rasters.

use crate::session::{SessionStore, StoredArea, DEFAULT_SESSION};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use offroad_core::pipeline::apply_overlays;
use offroad_core::smooth::{build_voronoi_field, VoronoiFieldGrid};
use offroad_core::trails::wavefront_distance;
use offroad_core::{AreaOverlay, GridPos, IntermediateMap, PlanError, PlanRequest, Planner, Pose};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::borrow::Cow;
use std::sync::Arc;
use std::time::Duration;

pub const SESSION_HEADER: &str = "x-session-id";
pub const DEFAULT_PLAN_TIMEOUT: Duration = Duration::from_secs(30);
/// Largest field raster served in one response.
pub const MAX_FIELD_CELLS: usize = 16_000_000;

pub struct AppState {
    pub map_id: String,
    pub planner: Planner,
    pub sessions: SessionStore,
    pub plan_timeout: Duration,
}

impl AppState {
    pub fn new(map_id: impl Into<String>, planner: Planner) -> Self {
        AppState {
            map_id: map_id.into(),
            planner,
            sessions: SessionStore::in_memory(),
            plan_timeout: DEFAULT_PLAN_TIMEOUT,
        }
    }
}

type Shared = Arc<AppState>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/plan", post(plan))
        .route("/areas", post(add_area).get(list_areas))
        .route("/areas/{id}", get(get_area).delete(delete_area))
        .route("/map/meta", get(meta))
        .route("/map/tile", get(tile))
        .route("/fields/{name}", get(field))
        .with_state(Arc::new(state))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, msg: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            body: json!({ "error": msg.to_string() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        match &e {
            PlanError::InvalidRequest(_) | PlanError::OutOfBounds { .. } => ApiError::new(StatusCode::BAD_REQUEST, e),
            PlanError::Unreachable { stage, detail } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": e.to_string(), "stage": stage, "detail": detail }),
            },
        }
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct SessionQuery {
    session: Option<String>,
    map: Option<String>,
}

/// Session from the `x-session-id` header, then the `session` query
/// parameter, else the shared default session.
fn session_id(headers: &HeaderMap, q: &SessionQuery) -> String {
    headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .or_else(|| q.session.clone())
        .unwrap_or_else(|| DEFAULT_SESSION.to_string())
}

fn check_map(st: &AppState, q: &SessionQuery) -> Result<(), ApiError> {
    match &q.map {
        Some(m) if *m != st.map_id => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown map `{m}`"))),
        _ => Ok(()),
    }
}

fn bad_json(e: serde_json::Error) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, format!("invalid body: {e}"))
}

fn persist(st: &AppState) {
    if let Err(e) = st.sessions.persist() {
        tracing::warn!("session snapshot failed: {e}");
    }
}

async fn plan(
    State(st): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<SessionQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    check_map(&st, &q)?;
    let mut req: PlanRequest = serde_json::from_slice(&body).map_err(bad_json)?;
    let session = st.sessions.get(&session_id(&headers, &q));
    let stored = session.lock().expect("session poisoned").overlays();
    req.overlays = stored.into_iter().chain(req.overlays).collect();
    let job = {
        let (st, req) = (st.clone(), req.clone());
        tokio::task::spawn_blocking(move || st.planner.plan(&req))
    };
    let result = match tokio::time::timeout(st.plan_timeout, job).await {
        Err(_) => {
            return Err(ApiError::new(
                StatusCode::GATEWAY_TIMEOUT,
                format!("planning exceeded {} s", st.plan_timeout.as_secs_f64()),
            ))
        }
        Ok(Err(e)) => return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e)),
        Ok(Ok(r)) => r?,
    };
    tracing::info!(
        length_m = result.metrics.length_m,
        total_ms = result.metrics.timings_ms.total,
        "planned"
    );
    let body = Json(&result).into_response();
    let mut s = session.lock().expect("session poisoned");
    s.last_request = Some(req);
    s.last_result = Some(result);
    Ok(body)
}

#[derive(Serialize)]
struct AreaId {
    id: String,
}

async fn add_area(
    State(st): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<SessionQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let area: AreaOverlay = serde_json::from_slice(&body).map_err(bad_json)?;
    area.validate(&st.planner.map)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let id = st.sessions.get(&session_id(&headers, &q)).lock().expect("session poisoned").add(area);
    persist(&st);
    Ok((StatusCode::CREATED, Json(AreaId { id })).into_response())
}

async fn list_areas(State(st): State<Shared>, headers: HeaderMap, Query(q): Query<SessionQuery>) -> Json<Vec<StoredArea>> {
    let s = st.sessions.get(&session_id(&headers, &q));
    let areas = s.lock().expect("session poisoned").areas.clone();
    Json(areas)
}

async fn get_area(
    State(st): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Query(q): Query<SessionQuery>,
) -> Result<Json<StoredArea>, ApiError> {
    let s = st.sessions.get(&session_id(&headers, &q));
    let found = s.lock().expect("session poisoned").areas.iter().find(|a| a.id == id).cloned();
    found
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown area `{id}`")))
}

async fn delete_area(
    State(st): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Query(q): Query<SessionQuery>,
) -> Result<StatusCode, ApiError> {
    let removed = st.sessions.get(&session_id(&headers, &q)).lock().expect("session poisoned").remove(&id);
    if !removed {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown area `{id}`")));
    }
    persist(&st);
    Ok(StatusCode::NO_CONTENT)
}

async fn meta(State(st): State<Shared>) -> Response {
    let map = &st.planner.map;
    let net = &st.planner.net;
    Json(json!({
        "id": st.map_id,
        "width": map.width(),
        "height": map.height(),
        "transform": map.transform,
        "meters_per_pixel": map.meters_per_pixel(),
        "trail_points": net.len(),
        "trail_downsample": net.d_f(),
    }))
    .into_response()
}

#[derive(Debug, Deserialize)]
pub struct Window {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

fn check_window(map: &IntermediateMap, win: &Window) -> Result<(), ApiError> {
    let inside = win.x >= 0
        && win.y >= 0
        && win.w > 0
        && win.h > 0
        && win.x + win.w <= map.width() as i64
        && win.y + win.h <= map.height() as i64;
    if !inside {
        return Err(ApiError::new(
            StatusCode::RANGE_NOT_SATISFIABLE,
            format!("window {win:?} outside {}x{} map", map.width(), map.height()),
        ));
    }
    Ok(())
}

/// Raw cell class codes of a window, row-major.
async fn tile(State(st): State<Shared>, Query(win): Query<Window>) -> Result<Response, ApiError> {
    let map = &st.planner.map;
    check_window(map, &win)?;
    let mut bytes = Vec::with_capacity((win.w * win.h) as usize);
    for y in win.y..win.y + win.h {
        let row = y as usize * map.width();
        bytes.extend(map.cells()[row + win.x as usize..row + (win.x + win.w) as usize].iter().map(|c| c.code()));
    }
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (header::HeaderName::from_static("x-tile-width"), win.w.to_string()),
            (header::HeaderName::from_static("x-tile-height"), win.h.to_string()),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct FieldQuery {
    session: Option<String>,
    x: Option<i64>,
    y: Option<i64>,
    w: Option<i64>,
    h: Option<i64>,
}

fn pgm(width: usize, height: usize, pixels: Vec<u8>) -> Response {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels);
    ([(header::CONTENT_TYPE, "image/x-portable-graymap")], out).into_response()
}

/// Trail wavefront distance from the trail point nearest to pixel `(x, y)`
/// (default: the first trail point), at trail-index resolution. 0 is the source, 255 is
/// unreachable, everything else scales linearly up to 254.
fn distance_pgm(st: &AppState, q: &FieldQuery) -> Result<Response, ApiError> {
    let net = &st.planner.net;
    let src = match (q.x, q.y) {
        (Some(x), Some(y)) => GridPos::new(x as i32, y as i32),
        (None, None) => *net
            .points()
            .first()
            .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "map has no trails"))?,
        _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, "pass both x and y")),
    };
    if !st.planner.map.in_bounds(src) {
        return Err(ApiError::new(StatusCode::RANGE_NOT_SATISFIABLE, format!("source {src:?} outside the map")));
    }
    let down = net.down_map();
    let snapped = net
        .nearest_down(src.center())
        .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "map has no trails"))?;
    let field = wavefront_distance(down, Pose::at(snapped.center()), 0.0)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;
    let values: Vec<f64> = (0..down.width() * down.height()).map(|i| field.value(down.pos(i))).collect();
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let px = values
        .iter()
        .map(|&v| match v {
            v if !v.is_finite() => 255,
            _ if max == 0.0 => 0,
            v => (v / max * 254.0).round() as u8,
        })
        .collect();
    Ok(pgm(down.width(), down.height(), px))
}

/// Voronoi field of a window (default: the whole map) including the
/// session's areas.
fn voronoi_pgm(st: &AppState, q: &FieldQuery, overlays: &[AreaOverlay]) -> Result<Response, ApiError> {
    let map = &st.planner.map;
    let win = match (q.x, q.y, q.w, q.h) {
        (None, None, None, None) => Window {
            x: 0,
            y: 0,
            w: map.width() as i64,
            h: map.height() as i64,
        },
        (Some(x), Some(y), Some(w), Some(h)) => Window { x, y, w, h },
        _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, "pass all of x, y, w, h or none")),
    };
    check_window(map, &win)?;
    if (win.w * win.h) as usize > MAX_FIELD_CELLS {
        return Err(ApiError::new(
            StatusCode::RANGE_NOT_SATISFIABLE,
            format!("window exceeds {MAX_FIELD_CELLS} cells; pass x, y, w, h"),
        ));
    }
    let with_areas: Cow<IntermediateMap> = apply_overlays(map, overlays)?;
    let sub = with_areas.crop(GridPos::new(win.x as i32, win.y as i32), win.w as usize, win.h as usize);
    let p = offroad_core::SmoothingParams::default();
    let field = match build_voronoi_field(&sub, p.alpha, p.d_o_max) {
        Ok(f) => f,
        Err(_) => VoronoiFieldGrid::zero(GridPos::new(0, 0), sub.width(), sub.height(), p.alpha, p.d_o_max),
    };
    let mut bytes = Vec::new();
    field.write_pgm(&mut bytes).expect("writing to a Vec cannot fail");
    Ok(([(header::CONTENT_TYPE, "image/x-portable-graymap")], bytes).into_response())
}

async fn field(
    State(st): State<Shared>,
    Path(name): Path<String>,
    headers: HeaderMap,
    Query(q): Query<FieldQuery>,
) -> Result<Response, ApiError> {
    let sq = SessionQuery {
        session: q.session.clone(),
        map: None,
    };
    let overlays = st.sessions.get(&session_id(&headers, &sq)).lock().expect("session poisoned").overlays();
    let st2 = st.clone();
    let job = tokio::task::spawn_blocking(move || match name.as_str() {
        "distance.pgm" => distance_pgm(&st2, &q),
        "voronoi.pgm" => voronoi_pgm(&st2, &q, &overlays),
        other => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown field `{other}`"))),
    });
    job.await.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?
}
