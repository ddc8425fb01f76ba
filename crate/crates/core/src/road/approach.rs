use serde::{Deserialize, Serialize};

use super::graph::to_vec;
use super::{Intersection, NodeId, RoadError, WayId};
use crate::geo::{GeoRaster, PixelWindow, ProjectedPoint};
use crate::geom::{polyline_length, Rect, Vec2};

/// Clipped centerlines shorter than this are not worth a sample.
pub const MIN_CENTERLINE_PX: f64 = 32.0;

/// Incident directions closer than this are treated as one.
pub const DUPLICATE_DIRECTION_RAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthLabel {
    Crosswalk,
    NotCrosswalk,
}

impl TruthLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TruthLabel::Crosswalk => "crosswalk",
            TruthLabel::NotCrosswalk => "not-crosswalk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthSource {
    OsmTag,
    ManualOverride,
    Unlabeled,
}

/// One road direction at one intersection: a single classification sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approach {
    pub intersection: NodeId,
    pub way_id: WayId,
    pub toward: NodeId,
    pub orientation: Vec2,
    /// From the window edge (or arm end) to the intersection; the last vertex
    /// is the intersection location.
    pub centerline: Vec<ProjectedPoint>,
    pub truth_label: Option<TruthLabel>,
    pub truth_source: TruthSource,
}

impl Approach {
    pub fn location(&self) -> ProjectedPoint {
        *self.centerline.last().expect("centerline is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachSet {
    pub approaches: Vec<Approach>,
    /// Incident directions merged into an earlier one.
    pub merged: usize,
    /// Directions dropped by the minimum-length rule.
    pub too_short: usize,
}

/// One approach per incident direction, clipped to `window`.
pub fn enumerate_approaches(
    i: &Intersection,
    window: &PixelWindow,
    raster: &GeoRaster,
) -> Result<ApproachSet, RoadError> {
    let (px, py) = raster.projected_to_pixel(i.location)?;
    if !window.contains(px, py) {
        return Err(RoadError::OutsideWindow { node: i.node_id });
    }
    let nw = raster.pixel_to_projected(window.x0 as f64, window.y0 as f64);
    let se = raster.pixel_to_projected((window.x0 + window.size) as f64, (window.y0 + window.size) as f64);
    let rect = Rect {
        min: Vec2::new(nw.easting, se.northing),
        max: Vec2::new(se.easting, nw.northing),
    };
    let size = raster.pixel_size();
    let epsg = i.location.epsg;

    let mut set = ApproachSet {
        approaches: Vec::new(),
        merged: 0,
        too_short: 0,
    };
    for inc in &i.incident {
        if set
            .approaches
            .iter()
            .any(|a| a.orientation.angle_to(inc.direction) < DUPLICATE_DIRECTION_RAD)
        {
            set.merged += 1;
            continue;
        }
        let arm: Vec<Vec2> = inc.arm.iter().map(to_vec).collect();
        let clipped = rect.clip_from_start(&arm);
        let in_pixels: Vec<Vec2> = clipped
            .iter()
            .map(|p| Vec2::new(p.x / size.x, p.y / size.y))
            .collect();
        if polyline_length(&in_pixels) < MIN_CENTERLINE_PX {
            set.too_short += 1;
            continue;
        }
        let mut centerline: Vec<ProjectedPoint> = clipped
            .iter()
            .rev()
            .map(|p| ProjectedPoint {
                easting: p.x,
                northing: p.y,
                epsg,
            })
            .collect();
        *centerline.last_mut().expect("clip keeps the start") = i.location;
        set.approaches.push(Approach {
            intersection: i.node_id,
            way_id: inc.way_id,
            toward: inc.toward,
            orientation: inc.direction,
            centerline,
            truth_label: None,
            truth_source: TruthSource::Unlabeled,
        });
    }
    Ok(set)
}
