//! Global path planning for off-road vehicles over rasterised vector maps.

pub mod geomap;
pub mod geometry;
pub mod kino;
pub mod metrics;
pub mod pipeline;
pub mod search;
pub mod smooth;
pub mod synth;
pub mod trails;

pub use geomap::{CellClass, GeoMapError, GeoTransform, IntermediateMap, OverlayKind};
pub use geometry::{GridPos, PixelPath, Point, Pose};
pub use kino::{KinematicModel, KinoError};
pub use pipeline::{
    plan, AreaOverlay, CoordSpace, GeoPose, GridPlanner, PlanError, PlanMode, PlanParams, PlanRequest, PlanResult,
    Planner, Segment, SegmentKind, Stage, VehicleParams,
};
pub use smooth::{SmoothError, SmoothingParams};
pub use trails::{TrailError, TrailNetwork};
