//! Path smoothing by gradient descent on obstacle, curvature and spacing
//! costs.

mod edt;
mod field;

pub use edt::{edt, Edt};
pub use field::{
    build_field_window, build_voronoi_field, field_value, VoronoiFieldGrid, DEFAULT_ALPHA, DEFAULT_D_O_MAX,
};

use crate::geomap::IntermediateMap;
use crate::geometry::{assign_headings, wrap_angle, PixelPath, Point, Pose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error("path has {0} points, curvature needs at least 3")]
    TooShort(usize),
    #[error("point {0} coincides with its successor")]
    RepeatedPoint(usize),
    #[error("map has no obstacle cells")]
    NoObstacles,
    #[error("map has no free cells")]
    NoFreeSpace,
    #[error("field parameters must be positive (alpha {alpha}, d_o_max {d_o_max})")]
    InvalidFieldParams { alpha: f64, d_o_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingParams {
    pub lambda_o: f64,
    pub lambda_k: f64,
    pub lambda_s: f64,
    /// Curvature bound in 1/pixel.
    pub k_max: f64,
    pub alpha: f64,
    pub d_o_max: f64,
    pub max_iters: usize,
    /// Stop once the relative decrease of J falls below this.
    pub tolerance: f64,
    pub armijo_c: f64,
    /// Largest displacement of any vertex in one step, in pixels.
    pub max_step: f64,
    /// Densification bound on consecutive spacing.
    pub max_spacing: f64,
    /// Vertices per optimisation window in [`smooth_path_windowed`].
    pub window: usize,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        SmoothingParams {
            lambda_o: 0.3,
            lambda_k: 0.4,
            lambda_s: 0.3,
            k_max: 0.2,
            alpha: DEFAULT_ALPHA,
            d_o_max: DEFAULT_D_O_MAX,
            max_iters: 500,
            tolerance: 1e-6,
            armijo_c: 1e-4,
            max_step: 0.5,
            max_spacing: 2.0,
            window: 400,
        }
    }
}

impl SmoothingParams {
    pub fn with_k_max(k_max: f64) -> Self {
        SmoothingParams {
            k_max,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub j_o: f64,
    pub j_k: f64,
    pub j_s: f64,
    pub j: f64,
}

/// Signed curvature `k_i = dtheta_i / |p_{i+1} - p_i|` at every interior
/// vertex `i + 1`.
pub fn curvature_profile(path: &PixelPath) -> Result<Vec<f64>, SmoothError> {
    let pts = path.points();
    if pts.len() < 3 {
        return Err(SmoothError::TooShort(pts.len()));
    }
    if let Some(i) = pts.windows(2).position(|w| w[0] == w[1]) {
        return Err(SmoothError::RepeatedPoint(i));
    }
    Ok(crate::geometry::discrete_curvature(&pts))
}

fn hinge(k: f64, k_max: f64) -> f64 {
    if k.abs() > k_max {
        k - k.signum() * k_max
    } else {
        0.0
    }
}

fn turn(a: Point, b: Point) -> f64 {
    wrap_angle(b.heading() - a.heading())
}

pub fn cost_terms(points: &[Point], field: &VoronoiFieldGrid, params: &SmoothingParams) -> CostTerms {
    let j_o: f64 = points.iter().map(|&p| field.value(p)).sum();
    let mut j_k = 0.0;
    let mut j_s = 0.0;
    for w in points.windows(3) {
        let (a, b) = (w[1] - w[0], w[2] - w[1]);
        let len = a.norm();
        if len > 1e-12 && b.norm() > 1e-12 {
            j_k += hinge(turn(a, b) / len, params.k_max).powi(2);
        }
        let s = b - a;
        j_s += s.dot(s);
    }
    CostTerms {
        j_o,
        j_k,
        j_s,
        j: params.lambda_o * j_o + params.lambda_k * j_k + params.lambda_s * j_s,
    }
}

/// Analytic gradient of `J` with respect to every point.
pub fn cost_gradient(points: &[Point], field: &VoronoiFieldGrid, params: &SmoothingParams) -> Vec<Point> {
    let n = points.len();
    let mut g = vec![Point::default(); n];
    for (i, &p) in points.iter().enumerate() {
        g[i] = field.sample(p).1 * params.lambda_o;
    }
    let normal = |u: Point| Point::new(-u.y, u.x) * (1.0 / u.dot(u));
    for i in 1..n.saturating_sub(1) {
        let (a, b) = (points[i] - points[i - 1], points[i + 1] - points[i]);
        let len = a.norm();
        if len > 1e-12 && b.norm() > 1e-12 {
            let d = turn(a, b);
            let e = hinge(d / len, params.k_max);
            if e != 0.0 {
                let (na, nb) = (normal(a), normal(b));
                let da = a * (1.0 / len);
                let w = 2.0 * params.lambda_k * e;
                // dk = ddelta / L - delta / L^2 dL
                let c = d / (len * len);
                g[i + 1] = g[i + 1] + nb * (w / len);
                g[i] = g[i] + ((nb + na) * (-1.0 / len) - da * c) * w;
                g[i - 1] = g[i - 1] + (na * (1.0 / len) + da * c) * w;
            }
        }
        let s = (b - a) * (2.0 * params.lambda_s);
        g[i - 1] = g[i - 1] + s;
        g[i] = g[i] - s * 2.0;
        g[i + 1] = g[i + 1] + s;
    }
    g
}

/// Inserts evenly spaced points so no gap exceeds `max_spacing`. Returns
/// the new points and the new index of every original point.
pub fn densify(points: &[Point], max_spacing: f64) -> (Vec<Point>, Vec<usize>) {
    let mut out = Vec::with_capacity(points.len());
    let mut map = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        if i > 0 {
            let q = points[i - 1];
            let n = (q.dist(p) / max_spacing).ceil() as usize;
            out.extend((1..n).map(|k| q + (p - q) * (k as f64 / n as f64)));
        }
        map.push(out.len());
        out.push(p);
    }
    (out, map)
}

fn segment_clear(map: &IntermediateMap, a: Point, b: Point) -> bool {
    let n = (a.dist(b) / 0.5).ceil().max(1.0) as usize;
    (0..=n).all(|k| map.is_traversable_at(a + (b - a) * (k as f64 / n as f64)))
}

/// Gradient descent with Armijo backtracking on the vertices not marked in
/// `fixed`. A trial step that would leave traversable space, or push a
/// vertex's curvature above `max(k_max, its current value)`, pins the
/// vertices involved and is retried before the step is shortened. Returns
/// the number of accepted steps.
fn descend(
    points: &mut [Point],
    fixed: &[bool],
    map: &IntermediateMap,
    field: &VoronoiFieldGrid,
    params: &SmoothingParams,
) -> usize {
    let n = points.len();
    if n < 3 || fixed.iter().all(|&f| f) {
        return 0;
    }
    let mut j = cost_terms(points, field, params).j;
    let mut t = f64::INFINITY;
    let mut cand = points.to_vec();
    let mut accepted = 0;
    for _ in 0..params.max_iters {
        let g = cost_gradient(points, field, params);
        let gmax = (0..n).filter(|&i| !fixed[i]).map(|i| g[i].norm()).fold(0.0, f64::max);
        if gmax < 1e-12 {
            break;
        }
        let k_old = vertex_curvature(points);
        let mut step = (2.0 * t).min(params.max_step / gmax);
        let mut next_j = None;
        'search: while step * gmax > 1e-9 {
            let mut active: Vec<bool> = fixed.iter().map(|f| !f).collect();
            for _ in 0..8 {
                let mut g2 = 0.0;
                for i in 0..n {
                    cand[i] = if active[i] {
                        g2 += g[i].dot(g[i]);
                        points[i] - g[i] * step
                    } else {
                        points[i]
                    };
                }
                if g2 == 0.0 {
                    break;
                }
                let bad = violations(&cand, &active, map, &k_old, params.k_max);
                if bad.is_empty() {
                    let jc = cost_terms(&cand, field, params).j;
                    if jc <= j - params.armijo_c * step * g2 {
                        next_j = Some(jc);
                        break 'search;
                    }
                    break;
                }
                for i in bad {
                    for k in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                        active[k] = false;
                    }
                }
            }
            step *= 0.5;
        }
        let Some(jn) = next_j else { break };
        points.copy_from_slice(&cand);
        accepted += 1;
        t = step;
        let done = j - jn <= params.tolerance * j.abs().max(1e-12);
        j = jn;
        if done {
            break;
        }
    }
    accepted
}

/// `|k|` per vertex, 0 at the endpoints.
fn vertex_curvature(pts: &[Point]) -> Vec<f64> {
    let mut k = vec![0.0; pts.len()];
    for (i, v) in crate::geometry::discrete_curvature(pts).into_iter().enumerate() {
        k[i + 1] = v.abs();
    }
    k
}

/// Vertices whose trial position breaks a constraint.
fn violations(pts: &[Point], moved: &[bool], map: &IntermediateMap, k_old: &[f64], k_max: f64) -> Vec<usize> {
    let n = pts.len();
    let mut bad = Vec::new();
    for i in 0..n {
        if !moved[i] {
            continue;
        }
        let clear = (i == 0 || segment_clear(map, pts[i - 1], pts[i]))
            && (i + 1 == n || segment_clear(map, pts[i], pts[i + 1]));
        if !clear {
            bad.push(i);
        }
    }
    let k_new = vertex_curvature(pts);
    for i in 1..n - 1 {
        let touched = moved[i - 1] || moved[i] || moved[i + 1];
        if touched && k_new[i] > k_max.max(k_old[i]) {
            bad.push(i);
        }
    }
    bad
}

fn fixed_mask(n: usize, frozen: &[usize]) -> Vec<bool> {
    let mut fixed = vec![false; n];
    for &i in frozen {
        if i < n {
            fixed[i] = true;
        }
    }
    if n > 0 {
        fixed[0] = true;
        fixed[n - 1] = true;
    }
    fixed
}

fn rebuild(points: Vec<Point>, original: &PixelPath, index_map: &[usize], fixed: &[bool]) -> PixelPath {
    let mut poses: Vec<Pose> = points.into_iter().map(Pose::at).collect();
    assign_headings(&mut poses);
    // frozen vertices are returned exactly as given
    for (orig, &new) in index_map.iter().enumerate() {
        if fixed[new] {
            poses[new] = original.poses[orig];
        }
    }
    PixelPath::new(poses)
}

/// Densifies `path` and minimises J over its free vertices using `field`.
/// Endpoints and the vertices in `frozen` (indices into `path`) do not move.
pub fn smooth_path(
    path: &PixelPath,
    map: &IntermediateMap,
    field: &VoronoiFieldGrid,
    params: &SmoothingParams,
    frozen: &[usize],
) -> PixelPath {
    if path.len() < 3 {
        return path.clone();
    }
    let (mut pts, index_map) = densify(&path.points(), params.max_spacing);
    let frozen_new: Vec<usize> = frozen.iter().filter_map(|&i| index_map.get(i).copied()).collect();
    let fixed = fixed_mask(pts.len(), &frozen_new);
    descend(&mut pts, &fixed, map, field, params);
    rebuild(pts, path, &index_map, &fixed)
}

/// [`smooth_path`] for long paths: the path is optimised in overlapping
/// windows of `params.window` vertices, each with its own local field.
pub fn smooth_path_windowed(
    path: &PixelPath,
    map: &IntermediateMap,
    params: &SmoothingParams,
    frozen: &[usize],
) -> PixelPath {
    smooth_path_windowed_indexed(path, map, params, frozen).0
}

/// [`smooth_path_windowed`], also returning the output index of every
/// input vertex.
pub fn smooth_path_windowed_indexed(
    path: &PixelPath,
    map: &IntermediateMap,
    params: &SmoothingParams,
    frozen: &[usize],
) -> (PixelPath, Vec<usize>) {
    if path.len() < 3 {
        return (path.clone(), (0..path.len()).collect());
    }
    let (mut pts, index_map) = densify(&path.points(), params.max_spacing);
    let frozen_new: Vec<usize> = frozen.iter().filter_map(|&i| index_map.get(i).copied()).collect();
    let fixed = fixed_mask(pts.len(), &frozen_new);
    let n = pts.len();
    let w = params.window.max(8);
    for offset in [0, w / 2] {
        let mut a = offset;
        while a < n {
            let b = (a + w).min(n - 1);
            // one extra fixed vertex on each side keeps the window's border
            // curvature inside its objective
            let lo = a.saturating_sub(1);
            let hi = (b + 1).min(n - 1);
            let mut local_fixed = fixed[lo..=hi].to_vec();
            local_fixed[0] = true;
            local_fixed[a - lo] = true;
            let last = local_fixed.len() - 1;
            local_fixed[last] = true;
            local_fixed[b - lo] = true;
            if local_fixed.iter().any(|f| !f) {
                let sub = &mut pts[lo..=hi];
                let (mut bl, mut bh) = (sub[0], sub[0]);
                for p in sub.iter() {
                    bl = Point::new(bl.x.min(p.x), bl.y.min(p.y));
                    bh = Point::new(bh.x.max(p.x), bh.y.max(p.y));
                }
                let field = build_field_window(map, bl, bh, params.alpha, params.d_o_max);
                descend(sub, &local_fixed, map, &field, params);
            }
            if b == n - 1 {
                break;
            }
            a = b;
        }
    }
    let out = rebuild(pts, path, &index_map, &fixed);
    (out, index_map)
}
