//! Hybrid A* over a map slice: lattice search in `(x, y, theta)` with
//! constant-curvature primitives, closed by a collision-free Dubins shot.

use super::dubins::{dubins_candidates, dubins_length, Curve, CurvePiece};
use super::{KinematicModel, KinoError};
use crate::geomap::{IntermediateMap, MapSlice};
use crate::geometry::{PixelPath, Point, Pose};
use rustc_hash::FxHashMap;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    pub theta_bins: usize,
    /// Arc length of each motion primitive, in pixels.
    pub step: f64,
    /// Spatial bin size of the closed set, in pixels.
    pub xy_resolution: f64,
    /// Collision probe spacing along primitives.
    pub probe: f64,
    pub max_nodes: usize,
    pub allow_reverse: bool,
    pub reverse_penalty: f64,
    /// Extra cost factor on arc primitives.
    pub turn_penalty: f64,
    /// Radius used by the search is `rho_min * rho_margin`, leaving
    /// headroom for polyline sampling.
    pub rho_margin: f64,
    /// An analytic shot is tried every this many expansions, and at every
    /// expansion once the goal is within a few turning radii.
    pub shot_every: usize,
    /// Spacing of the returned polyline; its vertices are collision checked.
    pub sample_spacing: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            theta_bins: 72,
            step: 2.0,
            xy_resolution: 1.0,
            probe: 0.5,
            max_nodes: 100_000,
            allow_reverse: false,
            reverse_penalty: 2.0,
            turn_penalty: 0.05,
            rho_margin: 1.02,
            shot_every: 8,
            sample_spacing: 1.0,
        }
    }
}

struct Node {
    piece: Option<CurvePiece>,
    pose: Pose,
    parent: u32,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: u32,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, o: &Self) -> Ordering {
        // max-heap: lower f first, then higher g, then older node
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn free(map: &IntermediateMap, p: Point) -> bool {
    map.is_traversable(p.cell())
}

fn piece_free(map: &IntermediateMap, piece: &CurvePiece, probe: f64) -> bool {
    let n = (piece.length.abs() / probe).ceil().max(1.0) as usize;
    (1..=n).all(|i| free(map, piece.at(piece.length * i as f64 / n as f64).point()))
}

fn curve_free(map: &IntermediateMap, curve: &Curve, cfg: &HybridConfig) -> bool {
    curve.pieces.iter().all(|p| piece_free(map, p, cfg.probe))
        && curve.sample(cfg.sample_spacing).iter().all(|p| free(map, p.point()))
}

type Key = (i32, i32, u16);

fn key(p: Pose, cfg: &HybridConfig) -> Key {
    let t = p.theta.rem_euclid(2.0 * PI) / (2.0 * PI) * cfg.theta_bins as f64;
    (
        (p.x / cfg.xy_resolution).floor() as i32,
        (p.y / cfg.xy_resolution).floor() as i32,
        (t.floor() as usize % cfg.theta_bins) as u16,
    )
}

/// Searches the slice for a path from `q1` to `q2` (parent coordinates) and
/// returns it as a curve in parent coordinates. The curve reaches `q2`
/// exactly, since every success goes through an analytic Dubins shot.
pub fn hybrid_astar_curve(
    slice: &MapSlice,
    q1: Pose,
    q2: Pose,
    model: &KinematicModel,
    cfg: &HybridConfig,
) -> Result<Curve, KinoError> {
    let map = &slice.submap;
    let (s, t) = (slice.pose_to_slice(q1), slice.pose_to_slice(q2));
    if !free(map, s.point()) || !free(map, t.point()) {
        return Err(KinoError::BlockedEndpoint);
    }
    let rho = model.rho_min_px() * cfg.rho_margin;
    let k = 1.0 / rho;
    let heuristic = |p: Pose| p.point().dist(t.point()).max(dubins_length(p, t, rho));

    let mut prims: Vec<(f64, f64, f64)> = [0.0, k, -k]
        .into_iter()
        .map(|kappa| (kappa, cfg.step, if kappa == 0.0 { 1.0 } else { 1.0 + cfg.turn_penalty }))
        .collect();
    if cfg.allow_reverse {
        let fwd = prims.clone();
        prims.extend(fwd.into_iter().map(|(kappa, len, c)| (kappa, -len, c * cfg.reverse_penalty)));
    }

    let mut nodes = vec![Node {
        piece: None,
        pose: s,
        parent: u32::MAX,
    }];
    let mut best: FxHashMap<Key, f64> = FxHashMap::default();
    best.insert(key(s, cfg), 0.0);
    let mut heap = BinaryHeap::new();
    heap.push(Open {
        f: heuristic(s),
        g: 0.0,
        idx: 0,
    });
    let mut expanded = 0usize;

    while let Some(Open { g, idx, .. }) = heap.pop() {
        let pose = nodes[idx as usize].pose;
        if g > best[&key(pose, cfg)] + 1e-9 {
            continue;
        }
        expanded += 1;
        if expanded > cfg.max_nodes {
            break;
        }
        let near = pose.point().dist(t.point()) < 4.0 * rho;
        if near || expanded % cfg.shot_every == 1 {
            for (_, shot) in dubins_candidates(pose, t, rho) {
                if !curve_free(map, &shot, cfg) {
                    continue;
                }
                let mut pieces = Vec::new();
                let mut i = idx;
                while let Some(p) = nodes[i as usize].piece {
                    pieces.push(p);
                    i = nodes[i as usize].parent;
                }
                pieces.reverse();
                pieces.extend(shot.pieces);
                let local = Curve { pieces };
                // joints between primitives and the shot can still clip a cell
                if !local.sample(cfg.sample_spacing).iter().all(|p| free(map, p.point())) {
                    continue;
                }
                let pieces = local
                    .pieces
                    .into_iter()
                    .map(|p| CurvePiece {
                        start: slice.pose_to_parent(p.start),
                        ..p
                    })
                    .collect();
                return Ok(Curve { pieces });
            }
        }
        for &(kappa, len, cost) in &prims {
            let piece = CurvePiece {
                start: pose,
                kappa,
                length: len,
            };
            if !piece_free(map, &piece, cfg.probe) {
                continue;
            }
            let child = piece.end();
            let g2 = g + len.abs() * cost;
            let kc = key(child, cfg);
            if best.get(&kc).is_some_and(|&b| b <= g2 + 1e-9) {
                continue;
            }
            best.insert(kc, g2);
            let ci = nodes.len() as u32;
            nodes.push(Node {
                piece: Some(piece),
                pose: child,
                parent: idx,
            });
            heap.push(Open {
                f: g2 + heuristic(child),
                g: g2,
                idx: ci,
            });
        }
    }
    if expanded > cfg.max_nodes {
        return Err(KinoError::NodeLimit(cfg.max_nodes));
    }
    Err(KinoError::SliceExhausted { segment: 0 })
}

/// [`hybrid_astar_curve`] sampled at `cfg.sample_spacing`.
pub fn hybrid_astar(
    slice: &MapSlice,
    q1: Pose,
    q2: Pose,
    model: &KinematicModel,
    cfg: &HybridConfig,
) -> Result<PixelPath, KinoError> {
    let curve = hybrid_astar_curve(slice, q1, q2, model, cfg)?;
    if curve.pieces.is_empty() {
        return Ok(PixelPath::new(vec![q1, q2]));
    }
    Ok(PixelPath::new(curve.sample(cfg.sample_spacing)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::{slice_map, CellClass, GeoTransform};
    use crate::geometry::{discrete_curvature, wrap_angle, GridPos};

    fn model(rho: f64) -> KinematicModel {
        KinematicModel::from_turning_radius(rho, 1.0).unwrap()
    }

    fn max_curv(p: &PixelPath) -> f64 {
        discrete_curvature(&p.points()).into_iter().map(f64::abs).fold(0.0, f64::max)
    }

    #[test]
    fn straight_in_empty_slice() {
        let map = IntermediateMap::new(60, 60, GeoTransform::unit());
        let (a, b) = (Pose::new(10.0, 30.0, 0.0), Pose::new(40.0, 30.0, 0.0));
        let sl = slice_map(&map, a, b, 10.0, 10.0);
        let p = hybrid_astar(&sl, a, b, &model(5.0), &HybridConfig::default()).unwrap();
        assert!(max_curv(&p) < 1e-9);
        assert!((p.length() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn right_angle_needs_quarter_arc() {
        let map = IntermediateMap::new(60, 60, GeoTransform::unit());
        let rho = 5.0;
        let (a, b) = (Pose::new(10.0, 10.0, 0.0), Pose::new(30.0, 30.0, PI / 2.0));
        let sl = slice_map(&map, a, b, 20.0, 20.0);
        let cfg = HybridConfig::default();
        let p = hybrid_astar(&sl, a, b, &model(rho), &cfg).unwrap();
        assert!(p.length() >= PI / 2.0 * rho);
        assert!(max_curv(&p) <= 1.05 / rho);
        let end = p.poses.last().unwrap();
        assert!(end.point().dist(b.point()) <= 1.0);
        assert!(wrap_angle(end.theta - b.theta).abs() <= 2.0 * PI / cfg.theta_bins as f64);
    }

    #[test]
    fn detours_around_wall() {
        // wall across the direct line with a gap at the top
        let mut map = IntermediateMap::new(80, 80, GeoTransform::unit());
        for y in 0..60 {
            map.set(GridPos::new(40, y), CellClass::Obstacle);
        }
        let (a, b) = (Pose::new(10.0, 20.0, 0.0), Pose::new(70.0, 20.0, 0.0));
        let sl = slice_map(&map, a, b, 60.0, 60.0);
        let p = hybrid_astar(&sl, a, b, &model(4.0), &HybridConfig::default()).unwrap();
        for q in &p.poses {
            assert!(map.is_traversable(q.cell()), "{q:?}");
        }
        assert!(max_curv(&p) <= 1.05 / 4.0);
        assert!(p.poses.iter().any(|q| q.cell().y >= 60));
    }

    #[test]
    fn enclosed_goal_is_exhausted() {
        let mut map = IntermediateMap::new(40, 40, GeoTransform::unit());
        for i in 25..=35 {
            for j in [25, 35] {
                map.set(GridPos::new(i, j), CellClass::Obstacle);
                map.set(GridPos::new(j, i), CellClass::Obstacle);
            }
        }
        let (a, b) = (Pose::new(5.0, 5.0, 0.0), Pose::new(30.0, 30.0, 0.0));
        let sl = slice_map(&map, a, b, 100.0, 100.0);
        assert!(sl.covers_parent(&map));
        let r = hybrid_astar(&sl, a, b, &model(3.0), &HybridConfig::default());
        assert!(matches!(r, Err(KinoError::SliceExhausted { .. })));
    }

    #[test]
    fn blocked_endpoint_rejected() {
        let mut map = IntermediateMap::new(20, 20, GeoTransform::unit());
        map.set(GridPos::new(15, 10), CellClass::Water);
        let (a, b) = (Pose::new(2.0, 10.0, 0.0), Pose::new(15.0, 10.0, 0.0));
        let sl = slice_map(&map, a, b, 5.0, 5.0);
        let r = hybrid_astar(&sl, a, b, &model(3.0), &HybridConfig::default());
        assert_eq!(r, Err(KinoError::BlockedEndpoint));
    }
}
