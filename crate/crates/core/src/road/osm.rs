use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{NodeId, RoadError, RoadGraph, Tags, Way, WayId, ROAD_CLASSES};
use crate::geo::GeoPoint;

enum Open {
    None,
    Node(NodeId),
    Way(usize),
    Other,
}

struct RawWay {
    id: WayId,
    refs: Vec<NodeId>,
    tags: Tags,
}

/// Parses an uncompressed OSM XML document into a [`RoadGraph`].
///
/// Elements are found wherever they nest, so plain `<osm>` documents and
/// JOSM/osmChange wrappers parse alike.
pub fn parse_osm<R: BufRead>(input: R) -> Result<RoadGraph, RoadError> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();

    let mut points: BTreeMap<NodeId, GeoPoint> = BTreeMap::new();
    let mut point_tags: BTreeMap<NodeId, Tags> = BTreeMap::new();
    let mut raw_ways: Vec<RawWay> = Vec::new();
    let mut open = Open::None;

    loop {
        let event = reader.read_event_into(&mut buf).map_err(malformed)?;
        let empty = matches!(event, Event::Empty(_));
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => match e.local_name().as_ref() {
                b"node" => {
                    let attrs = attributes(e)?;
                    let id = NodeId(parse_attr(&attrs, "id", "node")?);
                    let lat: f64 = parse_attr(&attrs, "lat", "node")?;
                    let lon: f64 = parse_attr(&attrs, "lon", "node")?;
                    let point = GeoPoint::new(lat, lon).map_err(|e| RoadError::MalformedXml(e.to_string()))?;
                    points.insert(id, point);
                    if !empty {
                        open = Open::Node(id);
                    }
                }
                b"way" => {
                    let attrs = attributes(e)?;
                    raw_ways.push(RawWay {
                        id: WayId(parse_attr(&attrs, "id", "way")?),
                        refs: Vec::new(),
                        tags: Tags::new(),
                    });
                    if !empty {
                        open = Open::Way(raw_ways.len() - 1);
                    }
                }
                b"nd" => {
                    if let Open::Way(i) = open {
                        let attrs = attributes(e)?;
                        raw_ways[i].refs.push(NodeId(parse_attr(&attrs, "ref", "nd")?));
                    }
                }
                b"tag" => {
                    let attrs = attributes(e)?;
                    let (Some(k), Some(v)) = (attrs.get("k"), attrs.get("v")) else {
                        return Err(RoadError::MalformedXml("tag without k/v".into()));
                    };
                    match open {
                        Open::Node(id) => {
                            point_tags.entry(id).or_default().insert(k.clone(), v.clone());
                        }
                        Open::Way(i) => {
                            raw_ways[i].tags.insert(k.clone(), v.clone());
                        }
                        _ => {}
                    }
                }
                b"relation" if !empty => open = Open::Other,
                _ => {}
            },
            Event::End(ref e) => {
                if matches!(e.local_name().as_ref(), b"node" | b"way" | b"relation") {
                    open = Open::None;
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    let mut ways = Vec::new();
    for raw in raw_ways {
        let Some(highway) = raw.tags.get("highway").cloned() else {
            continue;
        };
        let way = Way {
            id: raw.id,
            highway,
            nodes: raw.refs,
            tags: raw.tags,
        };
        if !(ROAD_CLASSES.contains(&way.highway.as_str()) || way.is_crossing()) {
            continue;
        }
        if way.nodes.len() < 2 {
            log::warn!("skipping {} with fewer than two nodes", way.id);
            continue;
        }
        if let Some(&missing) = way.nodes.iter().find(|n| !points.contains_key(n)) {
            return Err(RoadError::DanglingReference { way: way.id, node: missing });
        }
        ways.push(way);
    }

    let mut keep: BTreeSet<NodeId> = ways.iter().flat_map(|w| w.nodes.iter().copied()).collect();
    keep.extend(
        point_tags
            .iter()
            .filter(|(_, t)| t.get("highway").map(String::as_str) == Some("crossing"))
            .map(|(id, _)| *id),
    );
    let nodes = points.into_iter().filter(|(id, _)| keep.contains(id)).collect();
    let node_tags = point_tags.into_iter().filter(|(id, _)| keep.contains(id)).collect();

    Ok(RoadGraph { nodes, node_tags, ways })
}

fn malformed(e: impl std::fmt::Display) -> RoadError {
    RoadError::MalformedXml(e.to_string())
}

fn attributes(e: &BytesStart<'_>) -> Result<BTreeMap<String, String>, RoadError> {
    let mut out = BTreeMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(malformed)?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(malformed)?.into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_attr<T: std::str::FromStr>(attrs: &BTreeMap<String, String>, key: &str, element: &str) -> Result<T, RoadError> {
    let raw = attrs
        .get(key)
        .ok_or_else(|| RoadError::MalformedXml(format!("<{element}> without `{key}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| RoadError::MalformedXml(format!("<{element}> has invalid `{key}`: {raw:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXTRACT: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6">
  <node id="1" lat="39.50" lon="-84.75"/>
  <node id="2" lat="39.50" lon="-84.74"/>
  <node id="3" lat="39.50" lon="-84.73"/>
  <node id="4" lat="39.51" lon="-84.75"/>
  <node id="5" lat="39.51" lon="-84.74"/>
  <node id="6" lat="39.52" lon="-84.70"><tag k="amenity" v="bench"/></node>
  <way id="10">
    <nd ref="1"/><nd ref="2"/><nd ref="3"/>
    <tag k="highway" v="residential"/>
    <tag k="name" v="High &amp; Low Street"/>
  </way>
  <way id="11">
    <nd ref="4"/><nd ref="5"/><nd ref="4"/>
    <tag k="building" v="yes"/>
  </way>
</osm>"#;

    #[test]
    fn keeps_only_highway_ways_and_their_nodes() {
        let g = parse_osm(EXTRACT.as_bytes()).unwrap();
        assert_eq!(g.ways().len(), 1);
        assert_eq!(g.nodes().len(), 3);
        let w = &g.ways()[0];
        assert_eq!(w.id, WayId(10));
        assert_eq!(w.highway, "residential");
        assert_eq!(w.tags["name"], "High & Low Street");
        assert_eq!(w.nodes, vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(g.node(NodeId(2)), Some(GeoPoint { lat: 39.5, lon: -84.74 }));
    }

    #[test]
    fn dangling_reference() {
        let xml = r#"<osm><node id="1" lat="0" lon="0"/>
            <way id="7"><nd ref="1"/><nd ref="99"/><tag k="highway" v="primary"/></way></osm>"#;
        match parse_osm(xml.as_bytes()) {
            Err(RoadError::DanglingReference { way, node }) => {
                assert_eq!((way, node), (WayId(7), NodeId(99)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(
            parse_osm(r#"<osm><node id="1" lat="abc" lon="0"/></osm>"#.as_bytes()),
            Err(RoadError::MalformedXml(_))
        ));
        assert!(matches!(
            parse_osm(r#"<osm><node id="1" lat="0" lon="0"></way></osm>"#.as_bytes()),
            Err(RoadError::MalformedXml(_))
        ));
        assert!(matches!(
            parse_osm(r#"<osm><node id="1" lat="95" lon="0"/></osm>"#.as_bytes()),
            Err(RoadError::MalformedXml(_))
        ));
    }

    #[test]
    fn class_filter_and_crossings() {
        let xml = r#"<osm>
          <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/>
          <node id="3" lat="0.001" lon="0"><tag k="highway" v="crossing"/></node>
          <node id="4" lat="0.001" lon="0.001"/>
          <way id="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="cycleway"/></way>
          <way id="2"><nd ref="1"/><nd ref="4"/><tag k="highway" v="footway"/></way>
          <way id="3"><nd ref="2"/><nd ref="4"/><tag k="highway" v="footway"/><tag k="footway" v="crossing"/></way>
        </osm>"#;
        let g = parse_osm(xml.as_bytes()).unwrap();
        assert_eq!(g.ways().iter().map(|w| w.id.0).collect::<Vec<_>>(), vec![3]);
        assert_eq!(g.crossing_ways().count(), 1);
        assert_eq!(g.road_ways().count(), 0);
        assert_eq!(g.crossing_nodes().map(|(id, _)| id.0).collect::<Vec<_>>(), vec![3]);
        assert_eq!(g.nodes().len(), 3);
    }
}
