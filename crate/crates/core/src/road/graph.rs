use std::collections::{BTreeMap, BTreeSet};

use super::{NodeId, RoadError, RoadGraph, WayId};
use crate::geo::{GeoPoint, ProjectedPoint, UtmCrs};
use crate::geom::Vec2;

/// One road direction leaving an intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct Incident {
    pub way_id: WayId,
    /// Neighbouring node along the way in this direction.
    pub toward: NodeId,
    /// Unit vector (east, north) pointing away from the intersection.
    pub direction: Vec2,
    /// Way geometry from the intersection outward, ending at the next
    /// intersection or the end of the way.
    pub arm: Vec<ProjectedPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub node_id: NodeId,
    pub geo: GeoPoint,
    pub location: ProjectedPoint,
    pub incident: Vec<Incident>,
}

pub(crate) fn to_vec(p: &ProjectedPoint) -> Vec2 {
    Vec2::new(p.easting, p.northing)
}

/// Nodes shared by two or more road ways, or repeated within one way.
///
/// Intersections come back sorted by node id; incident lists follow way order
/// then position along the way.
pub fn find_intersections(g: &RoadGraph, crs: &UtmCrs) -> Result<Vec<Intersection>, RoadError> {
    let mut occurrences: BTreeMap<NodeId, Vec<(usize, usize)>> = BTreeMap::new();
    let ways: Vec<_> = g.road_ways().collect();
    for (wi, way) in ways.iter().enumerate() {
        for (k, node) in way.nodes.iter().enumerate() {
            occurrences.entry(*node).or_default().push((wi, k));
        }
    }

    let junctions: BTreeSet<NodeId> = occurrences
        .iter()
        .filter(|(_, occ)| {
            let distinct: BTreeSet<usize> = occ.iter().map(|(w, _)| *w).collect();
            distinct.len() >= 2 || occ.len() > distinct.len()
        })
        .map(|(id, _)| *id)
        .collect();

    let mut projected: BTreeMap<NodeId, ProjectedPoint> = BTreeMap::new();
    let mut project = |id: NodeId| -> Result<ProjectedPoint, RoadError> {
        if let Some(p) = projected.get(&id) {
            return Ok(*p);
        }
        // Node presence is guaranteed by parse_osm's dangling-reference check.
        let geo = g.node(id).expect("way node present in graph");
        let p = crs.forward(geo)?;
        projected.insert(id, p);
        Ok(p)
    };

    let mut out = Vec::new();
    for id in &junctions {
        let location = project(*id)?;
        let mut incident = Vec::new();
        for &(wi, k) in &occurrences[id] {
            let way = ways[wi];
            for step in [-1isize, 1] {
                let first = k as isize + step;
                if first < 0 || first as usize >= way.nodes.len() {
                    continue;
                }
                let mut arm = vec![location];
                let mut j = first;
                while j >= 0 && (j as usize) < way.nodes.len() {
                    let node = way.nodes[j as usize];
                    arm.push(project(node)?);
                    if junctions.contains(&node) {
                        break;
                    }
                    j += step;
                }
                let origin = to_vec(&location);
                let Some(direction) = arm[1..].iter().find_map(|p| to_vec(p).sub(origin).normalized()) else {
                    continue;
                };
                incident.push(Incident {
                    way_id: way.id,
                    toward: way.nodes[first as usize],
                    direction,
                    arm,
                });
            }
        }
        if incident.len() >= 2 {
            out.push(Intersection {
                node_id: *id,
                geo: g.node(*id).expect("junction node present"),
                location,
                incident,
            });
        }
    }
    Ok(out)
}
