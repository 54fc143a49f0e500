//! Splicing Hybrid A* replans into a path at its infeasible vertices.

use super::dubins::Curve;
use super::hybrid::{hybrid_astar_curve, HybridConfig};
use super::{anchor_pose, cumulative_arc, exit_pose, find_infeasible_vertices, KinematicModel, KinoError};
use crate::geomap::{slice_map, IntermediateMap};
use crate::geometry::{wrap_angle, PixelPath, Pose};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairConfig {
    pub hybrid: HybridConfig,
    /// Initial slice offsets `d_x = d_y`, in pixels; doubled on failure.
    pub initial_offset: f64,
    /// How many times the anchors may be pushed outwards by one turning
    /// radius when the replan loops or fails.
    pub max_widen: usize,
    /// Upper bound on the spacing of spliced samples.
    pub max_spacing: f64,
    /// Leave unrepairable spans in place instead of failing.
    pub keep_failed: bool,
    /// Stop widening a span after this many searches hit the node cap.
    pub max_capped: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            // repairs are local: they succeed within a few expansions or not at all
            hybrid: HybridConfig {
                max_nodes: 30_000,
                ..HybridConfig::default()
            },
            initial_offset: 100.0,
            max_widen: 3,
            max_spacing: 1.0,
            keep_failed: false,
            max_capped: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RepairResult {
    pub path: PixelPath,
    /// Inclusive index ranges of spliced samples in `path`, anchors included.
    pub repaired: Vec<(usize, usize)>,
    /// Indices (in the merged interval list) of spans left unrepaired.
    pub failed: Vec<usize>,
    /// Number of merged infeasible intervals found in the input.
    pub intervals: usize,
    /// Index in `path` of every input vertex. Vertices replaced by a splice
    /// map to the sample at the same fraction of the spliced arc length.
    pub index_map: Vec<usize>,
}

/// Replans every merged infeasible interval with Hybrid A* and splices the
/// result; everything outside the replanned spans is kept verbatim.
pub fn repair_path(path: &PixelPath, map: &IntermediateMap, model: &KinematicModel) -> Result<PixelPath, KinoError> {
    repair_path_with(path, map, model, &RepairConfig::default()).map(|r| r.path)
}

pub fn repair_path_with(
    path: &PixelPath,
    map: &IntermediateMap,
    model: &KinematicModel,
    cfg: &RepairConfig,
) -> Result<RepairResult, KinoError> {
    let spans = find_infeasible_vertices(path, model);
    let mut out = RepairResult {
        intervals: spans.len(),
        ..Default::default()
    };
    if spans.is_empty() {
        out.path = path.clone();
        out.index_map = (0..path.len()).collect();
        return Ok(out);
    }
    let pts = path.points();
    let arc = cumulative_arc(&pts);
    let rho = model.rho_min_px();
    let last = pts.len() - 1;
    let mut poses: Vec<Pose> = Vec::with_capacity(path.len());
    let mut index_map = Vec::with_capacity(path.len());
    // next original index still to copy
    let mut cursor = 0usize;
    let mut k = 0;
    while k < spans.len() {
        let (mut i1, mut i2) = (spans[k].i1.max(cursor), spans[k].i2);
        let mut absorbed = k;
        let mut found: Option<(Curve, usize, usize)> = None;
        let mut capped = 0;
        for widen in 0..=cfg.max_widen {
            if widen > 0 {
                let w = widen as f64 * rho;
                i1 = arc[..=i1].iter().rposition(|&x| x <= arc[i1] - w).unwrap_or(0).max(cursor);
                i2 = arc[i2..].iter().position(|&x| x >= arc[i2] + w).map_or(last, |j| j + i2);
            }
            while absorbed + 1 < spans.len() && spans[absorbed + 1].i1 <= i2 {
                absorbed += 1;
                i2 = i2.max(spans[absorbed].i2);
            }
            if i1 == i2 {
                break;
            }
            let q1 = if i1 == 0 { exit_pose(&pts, 0) } else { anchor_pose(&pts, i1) };
            let q2 = exit_pose(&pts, i2);
            let spacing = sample_spacing(&arc, i1, cfg.max_spacing);
            match replan(map, q1, q2, model, cfg, spacing) {
                Ok(c) => {
                    let looped = c.total_turning() > wrap_angle(q2.theta - q1.theta).abs() + 1.5 * PI;
                    found = Some((c, i1, i2));
                    if !looped {
                        break;
                    }
                }
                Err(KinoError::BlockedEndpoint) => break,
                Err(KinoError::NodeLimit(_)) => {
                    capped += 1;
                    if capped >= cfg.max_capped {
                        break;
                    }
                }
                Err(_) => {}
            }
            if i1 == cursor && i2 == last {
                break;
            }
        }
        match found {
            Some((curve, i1, i2)) => {
                index_map.extend(poses.len()..poses.len() + (i1 - cursor));
                poses.extend_from_slice(&path.poses[cursor..i1]);
                let start = poses.len();
                let spacing = sample_spacing(&arc, i1, cfg.max_spacing);
                let samples = curve.sample(spacing);
                if samples.is_empty() {
                    poses.push(path.poses[i1]);
                } else {
                    poses.extend(samples);
                }
                // anchors keep their exact original positions
                let s = &mut poses[start];
                (s.x, s.y) = (pts[i1].x, pts[i1].y);
                let e = poses.last_mut().unwrap();
                (e.x, e.y) = (pts[i2].x, pts[i2].y);
                let end = poses.len() - 1;
                let span = (arc[i2] - arc[i1]).max(1e-12);
                index_map.extend(
                    (i1..=i2).map(|i| start + ((arc[i] - arc[i1]) / span * (end - start) as f64).round() as usize),
                );
                out.repaired.push((start, end));
                cursor = i2 + 1;
            }
            None if cfg.keep_failed => out.failed.extend(k..=absorbed),
            None => return Err(KinoError::SliceExhausted { segment: k }),
        }
        k = absorbed + 1;
    }
    if cursor <= last {
        index_map.extend(poses.len()..poses.len() + (last + 1 - cursor));
        poses.extend_from_slice(&path.poses[cursor..]);
    }
    out.path = PixelPath::new(poses);
    out.index_map = index_map;
    Ok(out)
}

/// Spliced samples are no longer than the segment entering the first
/// anchor, so the joint turn stays within the curvature bound.
fn sample_spacing(arc: &[f64], i1: usize, max_spacing: f64) -> f64 {
    let incoming = if i1 > 0 { arc[i1] - arc[i1 - 1] } else { f64::INFINITY };
    max_spacing.min(incoming).max(0.05)
}

/// Hybrid A* in slices of growing size until one covers the whole map.
/// A search stopped by its node cap is not retried in a larger slice.
fn replan(
    map: &IntermediateMap,
    q1: Pose,
    q2: Pose,
    model: &KinematicModel,
    cfg: &RepairConfig,
    spacing: f64,
) -> Result<Curve, KinoError> {
    let hcfg = HybridConfig {
        sample_spacing: spacing,
        ..cfg.hybrid
    };
    let mut d = cfg.initial_offset;
    loop {
        let slice = slice_map(map, q1, q2, d, d);
        match hybrid_astar_curve(&slice, q1, q2, model, &hcfg) {
            Ok(c) => return Ok(c),
            Err(KinoError::SliceExhausted { .. }) if !slice.covers_parent(map) => d *= 2.0,
            Err(e) => return Err(e),
        }
    }
}
