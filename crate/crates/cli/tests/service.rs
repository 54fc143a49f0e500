use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use offroad_cli::load_planner;
use offroad_cli::service::{router, AppState};
use offroad_core::geomap::io::{load_cache, save_cache};
use offroad_core::geometry::winding_number;
use offroad_core::synth::{random_pairs, synth_map, SynthConfig};
use offroad_core::{CellClass, GridPos, PixelPath, PlanRequest, PlanResult, Planner, Point};
use serde_json::{json, Value};
use std::sync::OnceLock;
use std::time::Duration;
use tower::ServiceExt;

fn planner() -> Planner {
    static P: OnceLock<Planner> = OnceLock::new();
    P.get_or_init(|| Planner::from_map(synth_map(&SynthConfig::new(400, 400, 21)), 4.0).unwrap())
        .clone()
}

fn app() -> Router {
    router(AppState::new("demo", planner()))
}

/// A start/target pair the planner solves, in pixels.
fn pair() -> (Point, Point) {
    let p = planner();
    random_pairs(&p.map, 10, 200.0, 3, 2)
        .into_iter()
        .map(|(a, b)| (a.center(), b.center()))
        .find(|&(a, b)| p.plan(&PlanRequest::between_pixels(&p.map, a, b)).is_ok())
        .expect("a solvable pair")
}

fn plan_body(a: Point, b: Point) -> Value {
    serde_json::to_value(PlanRequest::between_pixels(&planner().map, a, b)).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, session: Option<&str>, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(s) = session {
        req = req.header("x-session-id", s);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn json_of(b: &[u8]) -> Value {
    serde_json::from_slice(b).unwrap()
}

fn square(c: Point, r: f64) -> Vec<[f64; 2]> {
    vec![[c.x - r, c.y - r], [c.x + r, c.y - r], [c.x + r, c.y + r], [c.x - r, c.y + r]]
}

fn cells_on(path: &PixelPath) -> Vec<GridPos> {
    let pts = path.points();
    let mut out = vec![];
    for w in pts.windows(2) {
        let n = (w[0].dist(w[1]) / 0.1).ceil().max(1.0) as usize;
        for k in 0..=n {
            out.push((w[0] + (w[1] - w[0]) * (k as f64 / n as f64)).cell());
        }
    }
    out.dedup();
    out
}

#[tokio::test]
async fn meta_matches_cache_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.ofrm");
    save_cache(&synth_map(&SynthConfig::new(120, 90, 3)), &path).unwrap();
    let cached = load_cache(&path).unwrap();
    let app = router(AppState::new("demo", load_planner(&path, None).unwrap()));
    let (s, b) = call(&app, "GET", "/map/meta", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let m = json_of(&b);
    assert_eq!(m["width"], 120);
    assert_eq!(m["height"], 90);
    assert_eq!((cached.width(), cached.height()), (120, 90));
    assert_eq!(m["transform"], serde_json::to_value(&cached.transform).unwrap());
}

#[tokio::test]
async fn tiles() {
    let app = app();
    let (s, b) = call(&app, "GET", "/map/tile?x=0&y=0&w=400&h=400", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b.len(), 400 * 400);
    let codes: Vec<u8> = planner().map.cells().iter().map(|c| c.code()).collect();
    assert_eq!(b, codes);
    let (s, b) = call(&app, "GET", "/map/tile?x=10&y=20&w=3&h=2", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let m = &planner().map;
    assert_eq!(b[4], m.get(GridPos::new(11, 21)).unwrap().code());
    for uri in ["/map/tile?x=398&y=0&w=3&h=1", "/map/tile?x=-1&y=0&w=2&h=2", "/map/tile?x=0&y=0&w=0&h=1"] {
        assert_eq!(call(&app, "GET", uri, None, None).await.0, StatusCode::RANGE_NOT_SATISFIABLE, "{uri}");
    }
    assert_eq!(call(&app, "GET", "/map/tile?x=0", None, None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn plan_is_deterministic() {
    let app = app();
    let (a, b) = pair();
    let (s, first) = call(&app, "POST", "/plan", None, Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&first));
    let r1: PlanResult = serde_json::from_slice(&first).unwrap();
    assert!(!r1.segments.is_empty());
    assert!(json_of(&first)["metrics"]["timings_ms"]["total"].as_f64().unwrap() > 0.0);
    let (_, second) = call(&app, "POST", "/plan", None, Some(plan_body(a, b))).await;
    let r2: PlanResult = serde_json::from_slice(&second).unwrap();
    assert!(r1.same_route(&r2));
}

#[tokio::test]
async fn bad_requests() {
    let app = app();
    let (a, b) = pair();
    let mut body = plan_body(a, b);
    body["start"]["lon"] = json!("east");
    assert_eq!(call(&app, "POST", "/plan", None, Some(body)).await.0, StatusCode::BAD_REQUEST);
    let mut body = plan_body(a, b);
    body["target"]["lat"] = json!(89.0);
    assert_eq!(call(&app, "POST", "/plan", None, Some(body)).await.0, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/plan?map=elsewhere", None, Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/plan?map=demo", None, Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn restricted_target_is_unprocessable() {
    let app = app();
    let (a, b) = pair();
    let area = json!({ "polygon": square(b, 6.0), "kind": "restricted", "space": "pixel" });
    let (s, _) = call(&app, "POST", "/areas", Some("t"), Some(area)).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, body) = call(&app, "POST", "/plan", Some("t"), Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["stage"], "grid_search");
    // other sessions are unaffected
    let (s, _) = call(&app, "POST", "/plan", Some("u"), Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn area_lifecycle() {
    let app = app();
    let (a, b) = pair();
    let (_, base) = call(&app, "POST", "/plan?session=s1", None, Some(plan_body(a, b))).await;
    let base: PlanResult = serde_json::from_slice(&base).unwrap();

    let tri = json!({ "polygon": [[10.0, 10.0], [30.0, 10.0], [10.0, 40.0]], "kind": "passable", "space": "pixel" });
    let (s, b1) = call(&app, "POST", "/areas?session=s1", None, Some(tri.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = json_of(&b1)["id"].as_str().unwrap().to_string();
    let (s, list) = call(&app, "GET", "/areas?session=s1", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let list = json_of(&list);
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["id"], id.as_str());
    assert_eq!(list[0]["polygon"], tri["polygon"]);
    let (s, one) = call(&app, "GET", &format!("/areas/{id}?session=s1"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(json_of(&one)["kind"], "passable");
    // the header names the same session as the query parameter
    assert_eq!(call(&app, "GET", &format!("/areas/{id}"), Some("s1"), None).await.0, StatusCode::OK);
    assert_eq!(call(&app, "GET", &format!("/areas/{id}"), None, None).await.0, StatusCode::NOT_FOUND);

    let mid = base.path.poses[base.path.len() / 2].point();
    let block = json!({ "polygon": square(mid, 8.0), "kind": "restricted", "space": "pixel" });
    let (_, b2) = call(&app, "POST", "/areas?session=s1", None, Some(block)).await;
    let id2 = json_of(&b2)["id"].as_str().unwrap().to_string();
    assert_ne!(id, id2);
    let (s, _) = call(&app, "POST", "/plan?session=s1", None, Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::OK);

    for i in [&id, &id2] {
        assert_eq!(call(&app, "DELETE", &format!("/areas/{i}?session=s1"), None, None).await.0, StatusCode::NO_CONTENT);
    }
    assert_eq!(call(&app, "DELETE", &format!("/areas/{id}?session=s1"), None, None).await.0, StatusCode::NOT_FOUND);
    let (_, after) = call(&app, "POST", "/plan?session=s1", None, Some(plan_body(a, b))).await;
    let after: PlanResult = serde_json::from_slice(&after).unwrap();
    assert!(after.same_route(&base));
}

#[tokio::test]
async fn degenerate_areas_rejected() {
    let app = app();
    for poly in [
        json!([[0.0, 0.0], [5.0, 5.0]]),
        json!([[0.0, 0.0], [5.0, 5.0], [10.0, 10.0]]),
        json!([[0.0, 0.0], [4.0, 4.0], [4.0, 0.0], [0.0, 4.0]]),
    ] {
        let (s, _) = call(&app, "POST", "/areas", None, Some(json!({ "polygon": poly, "kind": "restricted", "space": "pixel" }))).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{poly}");
    }
    let (s, _) = call(&app, "POST", "/areas", None, Some(json!({ "polygon": square(Point::new(9.0, 9.0), 3.0), "kind": "forest" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn restricted_wins_over_passable() {
    let app = app();
    let (a, b) = pair();
    let (_, base) = call(&app, "POST", "/plan", Some("o"), Some(plan_body(a, b))).await;
    let base: PlanResult = serde_json::from_slice(&base).unwrap();
    let mid = base.path.poses[base.path.len() / 2].point();
    let restricted = square(mid, 8.0);
    for (poly, kind) in [(square(mid, 20.0), "passable"), (restricted.clone(), "restricted")] {
        let (s, _) = call(&app, "POST", "/areas", Some("o"), Some(json!({ "polygon": poly, "kind": kind, "space": "pixel" }))).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let (s, body) = call(&app, "POST", "/plan", Some("o"), Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let res: PlanResult = serde_json::from_slice(&body).unwrap();
    let poly: Vec<Point> = restricted.iter().map(|&[x, y]| Point::new(x, y)).collect();
    for c in cells_on(&res.path) {
        assert_eq!(winding_number(c.center(), &poly), 0, "{c:?} inside the restricted square");
    }
}

#[tokio::test]
async fn field_rasters() {
    let app = app();
    let net = planner().net.clone();
    let src = net.points()[net.len() / 2];
    let (s, pgm) = call(&app, "GET", &format!("/fields/distance.pgm?x={}&y={}", src.x, src.y), None, None).await;
    assert_eq!(s, StatusCode::OK);
    let header = format!("P5\n{} {}\n255\n", net.down_map().width(), net.down_map().height());
    assert!(pgm.starts_with(header.as_bytes()));
    let px = &pgm[header.len()..];
    assert_eq!(px.len(), net.down_map().width() * net.down_map().height());
    let d = net.nearest_down(src.center()).unwrap();
    assert_eq!(px[d.y as usize * net.down_map().width() + d.x as usize], 0);
    assert!(px.iter().any(|&v| v == 255), "non-trail cells are unreachable");

    let (s, pgm) = call(&app, "GET", "/fields/voronoi.pgm?x=50&y=60&w=120&h=80", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(pgm.starts_with(b"P5\n120 80\n255\n"));
    assert_eq!(pgm.len(), "P5\n120 80\n255\n".len() + 120 * 80);
    let (s, full) = call(&app, "GET", "/fields/voronoi.pgm", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let head = b"P5\n400 400\n255\n";
    assert!(full.starts_with(head));
    // obstacles are 255
    let m = &planner().map;
    let i = m.cells().iter().position(|c| *c == CellClass::Obstacle).unwrap();
    assert_eq!(full[head.len() + i], 255);

    assert_eq!(call(&app, "GET", "/fields/voronoi.pgm?x=390&y=0&w=20&h=20", None, None).await.0, StatusCode::RANGE_NOT_SATISFIABLE);
    assert_eq!(call(&app, "GET", "/fields/voronoi.pgm?x=3", None, None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "GET", "/fields/slope.pgm", None, None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn slow_plan_times_out() {
    let mut st = AppState::new("demo", planner());
    st.plan_timeout = Duration::from_nanos(1);
    let app = router(st);
    let (a, b) = pair();
    let (s, _) = call(&app, "POST", "/plan", None, Some(plan_body(a, b))).await;
    assert_eq!(s, StatusCode::GATEWAY_TIMEOUT);
}

#[tokio::test]
async fn replayed_calls_reproduce_results() {
    let (a, b) = pair();
    let script = |app: Router| async move {
        let mut out = vec![];
        let (_, r) = call(&app, "POST", "/plan", None, Some(plan_body(a, b))).await;
        out.push(serde_json::from_slice::<PlanResult>(&r).unwrap());
        let mid = out[0].path.poses[out[0].path.len() / 2].point();
        call(&app, "POST", "/areas", None, Some(json!({ "polygon": square(mid, 8.0), "kind": "restricted", "space": "pixel" }))).await;
        let (_, r) = call(&app, "POST", "/plan", None, Some(plan_body(a, b))).await;
        out.push(serde_json::from_slice::<PlanResult>(&r).unwrap());
        out
    };
    let first = script(app()).await;
    let again = script(app()).await;
    assert_ne!(first[0].path, first[1].path, "the area forces a detour");
    for (x, y) in first.iter().zip(&again) {
        assert!(x.same_route(y));
    }
}
