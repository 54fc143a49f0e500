//! Batch evaluation of planners over random start/target pairs: wall time,
//! memory high-water delta, curvature standard deviation and minimum
//! obstacle distance per method.

use offroad_core::geomap::io::load_cache;
use offroad_core::metrics::{csd_px, current_rss_bytes, min_obstacle_distance_px, peak_rss_bytes, reset_peak_rss};
use offroad_core::search::{astar, jps};
use offroad_core::synth::{random_pairs, synth_map, SynthConfig};
use offroad_core::{
    CellClass, GeoMapError, GridPos, IntermediateMap, PixelPath, PlanMode, PlanRequest, Planner, Pose, TrailError,
    TrailNetwork, VehicleParams,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("map `{id}` not found at {path}")]
    MissingMap { id: String, path: PathBuf },
    #[error("map `{0}`: {1}")]
    Map(String, GeoMapError),
    #[error("trail network: {0}")]
    Trails(#[from] TrailError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Astar,
    Jps,
    Proposed,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Astar => "ASTAR",
            Method::Jps => "JPS",
            Method::Proposed => "PROPOSED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Synthetic(SynthConfig),
    /// Binary map cache written by the planner tooling.
    Cache { path: PathBuf },
}

fn default_timeout() -> f64 {
    10.0
}
fn default_clearance() -> i32 {
    2
}
fn default_downsample() -> f64 {
    offroad_core::trails::DEFAULT_DOWNSAMPLE
}
fn default_networks() -> Vec<bool> {
    vec![true]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    /// Map id used in reports.
    pub map: String,
    pub source: MapSource,
    pub pairs: usize,
    /// Minimum start/target separation in pixels.
    pub min_displacement: f64,
    pub methods: Vec<Method>,
    /// Run with the trail network (`true`) and/or with trails erased (`false`).
    #[serde(default = "default_networks")]
    pub road_network: Vec<bool>,
    pub seed: u64,
    /// Instances slower than this are recorded as `inf`.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Endpoint cells need this many free cells around them.
    #[serde(default = "default_clearance")]
    pub clearance: i32,
    #[serde(default = "default_downsample")]
    pub downsample: f64,
    #[serde(default)]
    pub vehicle: VehicleParams,
}

impl BenchScenario {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.methods.is_empty() {
            return Err(BenchError::Invalid("no methods".into()));
        }
        if !(self.min_displacement >= 0.0 && self.timeout_s > 0.0) {
            return Err(BenchError::Invalid("min_displacement and timeout_s must be positive".into()));
        }
        Ok(())
    }

    pub fn load_map(&self) -> Result<IntermediateMap, BenchError> {
        match &self.source {
            MapSource::Synthetic(cfg) => Ok(synth_map(cfg)),
            MapSource::Cache { path } => {
                if !path.exists() {
                    return Err(BenchError::MissingMap {
                        id: self.map.clone(),
                        path: path.clone(),
                    });
                }
                load_cache(path).map_err(|e| BenchError::Map(self.map.clone(), e))
            }
        }
    }
}

/// One planning instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub map: String,
    pub road_network: bool,
    pub pair: usize,
    /// `inf` when over the timeout.
    pub time_s: f64,
    pub memory_gb: f64,
    pub csd: f64,
    /// Metres; `inf` on obstacle-free maps.
    pub r#mod: f64,
    pub success: bool,
}

/// Per-method aggregate. Means skip failed and timed-out instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub map: String,
    pub road_network: bool,
    pub time_s: f64,
    /// Largest per-instance high-water delta.
    pub memory_gb: f64,
    pub csd: f64,
    pub r#mod: f64,
    /// Success rate in [0, 1].
    pub success: f64,
    /// Trail index build time, excluded from `time_s`.
    pub setup_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchReport {
    pub fn summary_for(&self, method: Method, road_network: bool) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.method == method.name() && s.road_network == road_network)
    }

    /// Writes `runs.csv` and `summary.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
        w.write_record(["method", "map", "road_network", "time_s", "memory_gb", "csd", "mod", "success", "pair"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.map.clone(),
                r.road_network.to_string(),
                fmt_f(r.time_s),
                fmt_f(r.memory_gb),
                fmt_f(r.csd),
                fmt_f(r.r#mod),
                r.success.to_string(),
                r.pair.to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["method", "map", "road_network", "time_s", "memory_gb", "csd", "mod", "success", "setup_s"])?;
        for s in &self.summary {
            w.write_record([
                s.method.clone(),
                s.map.clone(),
                s.road_network.to_string(),
                fmt_f(s.time_s),
                fmt_f(s.memory_gb),
                fmt_f(s.csd),
                fmt_f(s.r#mod),
                fmt_f(s.success),
                fmt_f(s.setup_s),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<9} {:<12} {:<5} {:>9} {:>9} {:>9} {:>9} {:>7}",
            "method", "map", "trail", "time_s", "mem_gb", "csd", "mod_m", "success"
        );
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<9} {:<12} {:<5} {:>9} {:>9} {:>9} {:>9} {:>7.2}",
                s.method,
                s.map,
                s.road_network,
                fmt_f(s.time_s),
                fmt_f(s.memory_gb),
                fmt_f(s.csd),
                fmt_f(s.r#mod),
                s.success
            );
        }
        out
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

/// Same map with every TRAIL cell turned into plain terrain.
pub fn without_trails(map: &IntermediateMap) -> IntermediateMap {
    let mut m = map.clone();
    for c in m.cells_mut() {
        if *c == CellClass::Trail {
            *c = CellClass::Free;
        }
    }
    m
}

struct Outcome {
    path: Option<PixelPath>,
    secs: f64,
    mem: u64,
}

fn measure(f: impl FnOnce() -> Option<PixelPath>) -> Outcome {
    reset_peak_rss();
    let before = current_rss_bytes().unwrap_or(0);
    let t = Instant::now();
    let path = f();
    let secs = t.elapsed().as_secs_f64();
    let mem = peak_rss_bytes().unwrap_or(0).saturating_sub(before);
    Outcome { path, secs, mem }
}

fn cell_path(cells: &[GridPos]) -> PixelPath {
    PixelPath::from_points(&cells.iter().map(|c| c.center()).collect::<Vec<_>>())
}

/// Runs every method on every pair, sequentially, for each requested
/// trail-network setting.
pub fn run_benchmark(scenario: &BenchScenario) -> Result<BenchReport, BenchError> {
    scenario.validate()?;
    let base = scenario.load_map()?;
    let mut report = BenchReport::default();
    if scenario.pairs == 0 {
        return Ok(report);
    }
    let pairs = random_pairs(&base, scenario.pairs, scenario.min_displacement, scenario.clearance, scenario.seed);
    for &with_trails in &scenario.road_network {
        let setup = Instant::now();
        let map = if with_trails { base.clone() } else { without_trails(&base) };
        let net = TrailNetwork::build(&map, scenario.downsample)?;
        let planner = Planner::new(map, net);
        let setup_s = setup.elapsed().as_secs_f64();
        let map = &planner.map;
        let mpp = map.meters_per_pixel();
        for &method in &scenario.methods {
            let first = report.rows.len();
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let (s, t) = (Pose::at(a.center()), Pose::at(b.center()));
                let out = measure(|| match method {
                    Method::Astar => astar(map, s, t).ok().map(|p| cell_path(&p.points)),
                    Method::Jps => jps(map, s, t).ok().map(|p| cell_path(&p.points)),
                    Method::Proposed => {
                        let mut r = PlanRequest::between_pixels(map, s.point(), t.point());
                        r.vehicle = scenario.vehicle;
                        if !with_trails {
                            r.mode = PlanMode::Direct;
                        }
                        planner.plan(&r).ok().map(|res| res.path)
                    }
                });
                let timed_out = out.secs > scenario.timeout_s;
                let (csd, md) = match &out.path {
                    Some(p) => (
                        csd_px(p).map_or(f64::NAN, |c| c / mpp),
                        min_obstacle_distance_px(p, map).map_or(f64::INFINITY, |d| d * mpp),
                    ),
                    None => (f64::NAN, f64::NAN),
                };
                report.rows.push(BenchRow {
                    method: method.name().into(),
                    map: scenario.map.clone(),
                    road_network: with_trails,
                    pair: i,
                    time_s: if timed_out { f64::INFINITY } else { out.secs },
                    memory_gb: out.mem as f64 / 1e9,
                    csd,
                    r#mod: md,
                    success: out.path.is_some() && !timed_out,
                });
            }
            report.summary.push(summarize(&report.rows[first..], method, scenario, with_trails, setup_s));
        }
    }
    Ok(report)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn summarize(rows: &[BenchRow], method: Method, sc: &BenchScenario, with_trails: bool, setup_s: f64) -> SummaryRow {
    let ok = || rows.iter().filter(|r| r.success && r.time_s.is_finite());
    SummaryRow {
        method: method.name().into(),
        map: sc.map.clone(),
        road_network: with_trails,
        time_s: mean(ok().map(|r| r.time_s)),
        memory_gb: rows.iter().map(|r| r.memory_gb).fold(0.0, f64::max),
        csd: mean(ok().map(|r| r.csd).filter(|c| c.is_finite())),
        r#mod: mean(ok().map(|r| r.r#mod)),
        success: if rows.is_empty() { 0.0 } else { ok().count() as f64 / rows.len() as f64 },
        setup_s,
    }
}
