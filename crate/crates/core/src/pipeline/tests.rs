use super::*;
use crate::geomap::CellClass;
use crate::geometry::{max_curvature, winding_number};
use crate::search::line_cells;
use crate::synth::{draw_trail, fill_ellipse, random_pairs, synth_map, synth_transform, SynthConfig};
use std::collections::BinaryHeap;

fn blank(w: usize, h: usize) -> IntermediateMap {
    IntermediateMap::new(w, h, synth_transform())
}

fn req(map: &IntermediateMap, s: (f64, f64), t: (f64, f64)) -> PlanRequest {
    PlanRequest::between_pixels(map, Point::new(s.0, s.1), Point::new(t.0, t.1))
}

fn planner(map: IntermediateMap, d_f: f64) -> Planner {
    Planner::from_map(map, d_f).unwrap()
}

fn check_invariants(p: &Planner, r: &PlanRequest, res: &PlanResult) {
    let map = apply_overlays(&p.map, &r.overlays).unwrap();
    assert!(res.path.max_gap() <= 2.0 * SQRT_2 + 1e-9, "gap {}", res.path.max_gap());
    for q in &res.path.poses {
        assert!(map.is_traversable(q.cell()), "{q:?}");
    }
    for w in res.segments.windows(2) {
        assert_eq!(w[0].path.poses.last(), w[1].path.poses.first());
    }
    assert_eq!(res.segments.first().unwrap().path.poses[0], res.path.poses[0]);
    assert_eq!(res.segments.last().unwrap().path.poses.last(), res.path.poses.last());
    for (q, g) in res.path.poses.iter().zip(&res.geo_path) {
        let (lon, lat) = map.transform.pixel_to_geo(q.x, q.y);
        assert_eq!([lon, lat], *g);
    }
    if res.diagnostics.failed_segments == 0 {
        let mpp = map.meters_per_pixel();
        let k = KinematicModel::new(r.vehicle.wheelbase, r.vehicle.phi_max, mpp).unwrap().k_max_px();
        let got = max_curvature(&res.path.points());
        assert!(got <= 1.05 * k, "curvature {got} > {}", 1.05 * k);
    }
}

#[test]
fn same_trail_gives_trail_only() {
    let mut m = blank(200, 100);
    draw_trail(&mut m, GridPos::new(10, 50), GridPos::new(190, 50), 1);
    let p = planner(m, 4.0);
    let r = req(&p.map, (30.0, 50.0), (170.0, 50.0));
    let res = p.plan(&r).unwrap();
    assert_eq!(res.segments.len(), 1);
    assert_eq!(res.segments[0].kind, SegmentKind::Trail);
    assert!(res.path.poses.iter().all(|q| q.y == 50.0));
    assert!((res.path.length() - 140.0).abs() < 1e-9);
    assert!(!res.diagnostics.fallback);
    check_invariants(&p, &r, &res);
}

/// Trail B runs straight along y = 100. Trail A ends just above the start
/// but only reaches B by a long loop through the top and right edges.
fn u_map() -> IntermediateMap {
    let mut m = blank(300, 200);
    let t = |m: &mut IntermediateMap, a: (i32, i32), b: (i32, i32)| {
        draw_trail(m, GridPos::new(a.0, a.1), GridPos::new(b.0, b.1), 1)
    };
    t(&mut m, (20, 100), (295, 100));
    t(&mut m, (40, 55), (40, 5));
    t(&mut m, (40, 5), (295, 5));
    t(&mut m, (295, 5), (295, 100));
    m
}

/// Exhaustive shortest trail distances (8-connected, no corner cutting).
fn trail_dijkstra(m: &IntermediateMap, src: GridPos) -> Vec<f64> {
    let w = m.width();
    let trail = |c: GridPos| m.get(c) == Some(CellClass::Trail);
    let mut d = vec![f64::INFINITY; w * m.height()];
    let id = |c: GridPos| c.y as usize * w + c.x as usize;
    d[id(src)] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push((std::cmp::Reverse(0u64), src.x, src.y));
    while let Some((std::cmp::Reverse(k), x, y)) = heap.pop() {
        let c = GridPos::new(x, y);
        let dc = f64::from_bits(k);
        if dc > d[id(c)] {
            continue;
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                let n = c.offset(dx, dy);
                if (dx, dy) == (0, 0) || !trail(n) {
                    continue;
                }
                if dx != 0 && dy != 0 && !(trail(c.offset(dx, 0)) && trail(c.offset(0, dy))) {
                    continue;
                }
                let nd = dc + if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 };
                if nd < d[id(n)] {
                    d[id(n)] = nd;
                    heap.push((std::cmp::Reverse(nd.to_bits()), n.x, n.y));
                }
            }
        }
    }
    d
}

#[test]
fn u_map_picks_pair_minimising_total_distance() {
    let m = u_map();
    let p = planner(m.clone(), 1.0);
    let (s, t) = (Pose::new(40.0, 70.0, 0.0), Pose::new(260.0, 70.0, 0.0));
    let (cs, ct) = candidate_poses(&p.net, s, t, &QueryParams::default());
    assert!(cs.len() >= 2, "{cs:?}");
    let mut best: Option<(f64, GridPos, GridPos)> = None;
    for a in &cs {
        let d = trail_dijkstra(&m, a.cell());
        for b in &ct {
            let cost = s.point().dist(a.point()) + d[b.cell().y as usize * 300 + b.cell().x as usize] + b.point().dist(t.point());
            if best.is_none_or(|x| cost < x.0) {
                best = Some((cost, a.cell(), b.cell()));
            }
        }
    }
    let (_, want_s, want_t) = best.unwrap();
    let nearest = cs.iter().min_by(|a, b| a.point().dist(s.point()).total_cmp(&b.point().dist(s.point()))).unwrap();
    assert_ne!(nearest.cell(), want_s, "oracle pair should not be the nearest entry");

    let r = req(&p.map, (40.0, 70.0), (260.0, 70.0));
    let res = p.plan(&r).unwrap();
    assert_eq!(res.segments.len(), 3);
    assert_eq!(
        res.segments.iter().map(|s| s.kind).collect::<Vec<_>>(),
        [SegmentKind::OffroadStart, SegmentKind::Trail, SegmentKind::OffroadEnd]
    );
    assert_eq!(res.diagnostics.s_bar.unwrap().cell(), want_s);
    assert_eq!(res.diagnostics.t_bar.unwrap().cell(), want_t);
    check_invariants(&p, &r, &res);
}

fn cluttered() -> IntermediateMap {
    let mut m = blank(240, 160);
    for (x, y, r) in [(60.0, 40.0, 12.0), (120.0, 110.0, 15.0), (180.0, 50.0, 10.0), (90.0, 80.0, 6.0)] {
        fill_ellipse(&mut m, Point::new(x, y), r, r, CellClass::Obstacle);
    }
    m
}

fn cells_along(path: &PixelPath) -> Vec<GridPos> {
    let mut out = Vec::new();
    for w in path.poses.windows(2) {
        out.extend(line_cells(w[0].cell(), w[1].cell()));
    }
    out
}

#[test]
fn restricted_polygon_is_avoided_and_removal_restores() {
    let p = planner(cluttered(), 4.0);
    let r = req(&p.map, (10.0, 80.0), (230.0, 80.0));
    let before = p.plan(&r).unwrap();
    check_invariants(&p, &r, &before);
    // block a band across the middle of the first path
    let mid = before.path.poses[before.path.len() / 2].point();
    let poly = [
        Point::new(mid.x - 8.0, mid.y - 25.0),
        Point::new(mid.x + 8.0, mid.y - 25.0),
        Point::new(mid.x + 8.0, mid.y + 25.0),
        Point::new(mid.x - 8.0, mid.y + 25.0),
    ];
    let overlays = vec![AreaOverlay::pixel(&poly, OverlayKind::Restricted)];
    let after = p.replan_with_overlays(&r, overlays.clone()).unwrap();
    let r2 = PlanRequest { overlays, ..r.clone() };
    check_invariants(&p, &r2, &after);
    for c in cells_along(&after.path) {
        assert_eq!(winding_number(c.center(), &poly), 0, "{c:?} inside restricted area");
    }
    assert!(after.metrics.length_m > before.metrics.length_m);
    let restored = p.replan_with_overlays(&r2, Vec::new()).unwrap();
    assert_eq!(restored.path, before.path);
    assert!(restored.same_route(&before));
}

#[test]
fn empty_overlay_delta_is_identical() {
    let p = planner(cluttered(), 4.0);
    let r = req(&p.map, (10.0, 10.0), (230.0, 150.0));
    let a = p.plan(&r).unwrap();
    let b = p.replan_with_overlays(&r, Vec::new()).unwrap();
    assert!(a.same_route(&b));
}

fn river() -> IntermediateMap {
    let mut m = blank(200, 200);
    for y in 12..200 {
        for x in 95..=105 {
            m.set(GridPos::new(x, y), CellClass::Water);
        }
    }
    m
}

#[test]
fn passable_bridge_shortens_path() {
    let p = planner(river(), 4.0);
    let r = req(&p.map, (50.0, 150.0), (150.0, 150.0));
    let before = p.plan(&r).unwrap();
    assert!(before.diagnostics.fallback);
    assert_eq!(before.diagnostics.mode_used, PlanMode::Direct);
    let bridge = [
        Point::new(90.0, 140.0),
        Point::new(110.0, 140.0),
        Point::new(110.0, 160.0),
        Point::new(90.0, 160.0),
    ];
    let after = p.replan_with_overlays(&r, vec![AreaOverlay::pixel(&bridge, OverlayKind::Passable)]).unwrap();
    assert!(after.metrics.length_m < before.metrics.length_m * 0.6);
    // restricted wins where both overlap
    let both = vec![
        AreaOverlay::pixel(&bridge, OverlayKind::Restricted),
        AreaOverlay::pixel(&bridge, OverlayKind::Passable),
    ];
    let blocked = p.replan_with_overlays(&r, both).unwrap();
    assert!(blocked.path.poses.iter().all(|q| winding_number(q.point(), &bridge) == 0));
}

#[test]
fn restricted_target_is_unreachable() {
    let p = planner(cluttered(), 4.0);
    let mut r = req(&p.map, (10.0, 80.0), (230.0, 80.0));
    let poly = [Point::new(220.0, 70.0), Point::new(239.0, 70.0), Point::new(239.0, 90.0), Point::new(220.0, 90.0)];
    r.overlays.push(AreaOverlay::pixel(&poly, OverlayKind::Restricted));
    match p.plan(&r) {
        Err(PlanError::Unreachable { stage, .. }) => assert_eq!(stage, Stage::GridSearch),
        other => panic!("{other:?}"),
    }
}

#[test]
fn enclosed_target_reports_grid_search() {
    let mut m = cluttered();
    for i in 200..=220 {
        for j in [70, 90] {
            m.set(GridPos::new(i, j), CellClass::Obstacle);
        }
    }
    for j in 70..=90 {
        m.set(GridPos::new(200, j), CellClass::Obstacle);
        m.set(GridPos::new(220, j), CellClass::Obstacle);
    }
    let p = planner(m, 4.0);
    let r = req(&p.map, (10.0, 80.0), (210.0, 80.0));
    assert!(matches!(p.plan(&r), Err(PlanError::Unreachable { stage: Stage::GridSearch, .. })));
}

#[test]
fn request_validation() {
    let p = planner(cluttered(), 4.0);
    let r = req(&p.map, (10.0, 80.0), (10.2, 80.1));
    assert!(matches!(p.plan(&r), Err(PlanError::InvalidRequest(_))));
    let r = req(&p.map, (10.0, 80.0), (500.0, 80.0));
    assert!(matches!(p.plan(&r), Err(PlanError::OutOfBounds { which: "target", .. })));
    let mut r = req(&p.map, (10.0, 80.0), (100.0, 80.0));
    r.start.lon = f64::NAN;
    assert!(matches!(p.plan(&r), Err(PlanError::InvalidRequest(_))));
    let mut r = req(&p.map, (10.0, 80.0), (100.0, 80.0));
    r.overlays.push(AreaOverlay::pixel(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0)], OverlayKind::Restricted));
    assert!(matches!(p.plan(&r), Err(PlanError::InvalidRequest(_))));
}

#[test]
fn request_json_defaults() {
    let r: PlanRequest =
        serde_json::from_str(r#"{"start":{"lon":24.0,"lat":61.0},"target":{"lon":24.01,"lat":61.0,"heading":1.0}}"#)
            .unwrap();
    assert_eq!(r.mode, PlanMode::TrailPreferred);
    assert_eq!(r.planner, GridPlanner::Jps);
    assert_eq!(r.params, PlanParams::default());
    let back: PlanRequest = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn synthetic_map_invariants_and_determinism() {
    let m = synth_map(&SynthConfig::new(500, 500, 11));
    let p = planner(m, 4.0);
    let pairs = random_pairs(&p.map, 6, 250.0, 2, 5);
    for (i, (a, b)) in pairs.into_iter().enumerate() {
        let mut r = req(&p.map, (a.x as f64, a.y as f64), (b.x as f64, b.y as f64));
        if i % 2 == 1 {
            r.planner = GridPlanner::Astar;
        }
        let res = p.plan(&r).unwrap();
        check_invariants(&p, &r, &res);
        assert!(res.same_route(&p.plan(&r).unwrap()));
        assert!(res.metrics.mod_m.is_some());
        let f = res.to_geojson();
        assert!(matches!(f.geometry.unwrap().value, geojson::Value::LineString(ref l) if l.len() == res.path.len()));
    }
}

#[test]
fn direct_mode_skips_trails() {
    let mut m = cluttered();
    draw_trail(&mut m, GridPos::new(0, 150), GridPos::new(239, 150), 1);
    let p = planner(m, 4.0);
    let mut r = req(&p.map, (10.0, 80.0), (230.0, 80.0));
    r.mode = PlanMode::Direct;
    let res = p.plan(&r).unwrap();
    assert_eq!(res.segments.len(), 1);
    assert_eq!(res.segments[0].kind, SegmentKind::Direct);
    assert!(!res.diagnostics.fallback);
    assert!(res.diagnostics.s_bar.is_none());
}
