//! OpenStreetMap road graphs, intersections, per-direction approaches and
//! ground-truth crosswalk labels.

mod approach;
mod graph;
mod osm;
mod truth;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, GeoPoint};

pub use approach::{
    enumerate_approaches, Approach, ApproachSet, TruthLabel, TruthSource, DUPLICATE_DIRECTION_RAD, MIN_CENTERLINE_PX,
};
pub use graph::{find_intersections, Incident, Intersection};
pub use osm::parse_osm;
pub use truth::{derive_truth, load_overrides, Override, TruthOutcome, CROSSING_TOLERANCE_M};

/// Vehicular highway classes that form intersections.
pub const ROAD_CLASSES: &[&str] = &[
    "motorway",
    "motorway_link",
    "trunk",
    "trunk_link",
    "primary",
    "primary_link",
    "secondary",
    "secondary_link",
    "tertiary",
    "tertiary_link",
    "residential",
    "service",
    "unclassified",
];

/// Pedestrian classes kept only when mapped as crossings.
pub const CROSSING_WAY_CLASSES: &[&str] = &["footway", "path"];

#[derive(Debug, Error)]
pub enum RoadError {
    #[error("malformed OSM XML: {0}")]
    MalformedXml(String),
    #[error("way {way} references missing node {node}")]
    DanglingReference { way: WayId, node: NodeId },
    #[error("intersection {node} lies outside the window")]
    OutsideWindow { node: NodeId },
    #[error("invalid override manifest: {0}")]
    InvalidOverrides(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WayId(pub i64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for WayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

pub type Tags = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct Way {
    pub id: WayId,
    pub highway: String,
    pub nodes: Vec<NodeId>,
    pub tags: Tags,
}

impl Way {
    /// A pedestrian way mapped as a street crossing (`footway=crossing`).
    pub fn is_crossing(&self) -> bool {
        CROSSING_WAY_CLASSES.contains(&self.highway.as_str())
            && (self.tags.get("footway").map(String::as_str) == Some("crossing")
                || self.tags.get("path").map(String::as_str) == Some("crossing"))
    }
}

/// Highway ways with the nodes they reference, in WGS 84.
///
/// Tagged nodes (for example standalone `highway=crossing` points) are kept
/// even when no retained way references them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoadGraph {
    nodes: BTreeMap<NodeId, GeoPoint>,
    node_tags: BTreeMap<NodeId, Tags>,
    ways: Vec<Way>,
}

impl RoadGraph {
    pub fn nodes(&self) -> &BTreeMap<NodeId, GeoPoint> {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<GeoPoint> {
        self.nodes.get(&id).copied()
    }

    pub fn node_tags(&self, id: NodeId) -> Option<&Tags> {
        self.node_tags.get(&id)
    }

    pub fn ways(&self) -> &[Way] {
        &self.ways
    }

    /// Ways that take part in intersections (everything but crossing footways).
    pub fn road_ways(&self) -> impl Iterator<Item = &Way> {
        self.ways.iter().filter(|w| !w.is_crossing())
    }

    pub fn crossing_ways(&self) -> impl Iterator<Item = &Way> {
        self.ways.iter().filter(|w| w.is_crossing())
    }

    /// Nodes tagged `highway=crossing`.
    pub fn crossing_nodes(&self) -> impl Iterator<Item = (NodeId, GeoPoint)> + '_ {
        self.node_tags
            .iter()
            .filter(|(_, t)| t.get("highway").map(String::as_str) == Some("crossing"))
            .filter_map(|(id, _)| self.nodes.get(id).map(|g| (*id, *g)))
    }
}
