use std::io::Read;

use serde::{Deserialize, Serialize};

use super::approach::{TruthLabel, TruthSource};
use super::graph::to_vec;
use super::{Approach, NodeId, RoadError, RoadGraph, WayId};
use crate::geo::UtmCrs;
use crate::geom::{point_polyline_distance, polyline_distance, Vec2};

/// A mapped crossing counts for an approach when it lies this close to the
/// approach centerline.
pub const CROSSING_TOLERANCE_M: f64 = 5.0;

/// Manual label for the approaches of one way at one intersection.
///
/// Without `toward_node_id` the label applies to both directions of the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub intersection_node_id: NodeId,
    pub way_id: WayId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toward_node_id: Option<NodeId>,
    pub label: TruthLabel,
}

impl Override {
    fn matches(&self, a: &Approach) -> bool {
        self.intersection_node_id == a.intersection
            && self.way_id == a.way_id
            && self.toward_node_id.is_none_or(|t| t == a.toward)
    }
}

pub fn load_overrides<R: Read>(reader: R) -> Result<Vec<Override>, RoadError> {
    serde_json::from_reader(reader).map_err(|e| RoadError::InvalidOverrides(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthOutcome {
    pub approaches: Vec<Approach>,
    /// Override entries that matched no approach.
    pub ignored_overrides: usize,
}

/// Labels each approach: a matching override wins, otherwise an approach is a
/// crosswalk when a `highway=crossing` node or `footway=crossing` way lies
/// within [`CROSSING_TOLERANCE_M`] of its centerline and no other such
/// approach has its intersection closer to that crossing.
pub fn derive_truth(
    g: &RoadGraph,
    crs: &UtmCrs,
    mut approaches: Vec<Approach>,
    overrides: &[Override],
) -> Result<TruthOutcome, RoadError> {
    let mut crossing_points = Vec::new();
    for (id, geo) in g.crossing_nodes() {
        match crs.forward(geo) {
            Ok(p) => crossing_points.push(to_vec(&p)),
            Err(e) => log::debug!("crossing node {id} skipped: {e}"),
        }
    }
    let mut crossing_lines: Vec<Vec<Vec2>> = Vec::new();
    for way in g.crossing_ways() {
        let line: Result<Vec<Vec2>, _> = way
            .nodes
            .iter()
            .map(|n| crs.forward(g.node(*n).expect("way node present")).map(|p| to_vec(&p)))
            .collect();
        match line {
            Ok(l) => crossing_lines.push(l),
            Err(e) => log::debug!("crossing way {} skipped: {e}", way.id),
        }
    }

    // A crossing near the centerline of several approaches belongs only to the
    // ones whose intersection is nearest to it.
    let lines: Vec<Vec<Vec2>> = approaches
        .iter()
        .map(|a| a.centerline.iter().map(to_vec).collect())
        .collect();
    let mut tagged = vec![false; approaches.len()];
    let mut claim = |dist_to_line: &dyn Fn(&[Vec2]) -> f64, dist_to_point: &dyn Fn(Vec2) -> f64| {
        let near: Vec<(usize, f64)> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| dist_to_line(l) <= CROSSING_TOLERANCE_M)
            .map(|(k, l)| (k, dist_to_point(*l.last().expect("centerline is never empty"))))
            .collect();
        let best = near.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
        for (k, d) in near {
            if d <= best + 1e-6 {
                tagged[k] = true;
            }
        }
    };
    for p in &crossing_points {
        claim(&|l| point_polyline_distance(*p, l), &|q| q.sub(*p).norm());
    }
    for c in &crossing_lines {
        claim(&|l| polyline_distance(c, l), &|q| point_polyline_distance(q, c));
    }

    for (a, tagged) in approaches.iter_mut().zip(tagged) {
        if let Some(o) = overrides.iter().find(|o| o.matches(a)) {
            a.truth_label = Some(o.label);
            a.truth_source = TruthSource::ManualOverride;
            continue;
        }
        a.truth_label = Some(if tagged {
            TruthLabel::Crosswalk
        } else {
            TruthLabel::NotCrosswalk
        });
        a.truth_source = TruthSource::OsmTag;
    }

    let mut ignored = 0;
    for o in overrides {
        if !approaches.iter().any(|a| o.matches(a)) {
            log::warn!(
                "override for intersection {} / way {} matches no approach; ignored",
                o.intersection_node_id,
                o.way_id
            );
            ignored += 1;
        }
    }
    Ok(TruthOutcome {
        approaches,
        ignored_overrides: ignored,
    })
}
