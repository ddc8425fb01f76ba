//! OSM XML for detected crossings, for review in an editor before upload.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::patch::SampleId;
use crate::road::{NodeId, WayId};

/// Tag key recording where a node came from.
pub const PROVENANCE_TAG: &str = "source:detection";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub sample_id: SampleId,
    pub bundle_digest: String,
    pub intersection_node_id: NodeId,
    pub way_id: WayId,
    pub toward_node_id: NodeId,
    pub location: GeoPoint,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One new `highway=crossing` node per detection, with negative ids as new
/// objects and `upload="never"` so editors will not push it unreviewed.
pub fn crossings_osm(detections: &[Detection], model: &str, generator: &str) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<osm version=\"0.6\" generator=\"{}\" upload=\"never\">", escape(generator));
    for (k, d) in detections.iter().enumerate() {
        let _ = writeln!(
            s,
            "  <node id=\"{}\" action=\"modify\" visible=\"true\" lat=\"{:.7}\" lon=\"{:.7}\">",
            -(k as i64) - 1,
            d.location.lat,
            d.location.lon
        );
        let _ = writeln!(s, "    <tag k=\"highway\" v=\"crossing\"/>");
        let prov = format!(
            "zero-shot;model={model};sample={};digest={};approach={}/{}/{}",
            d.sample_id, d.bundle_digest, d.intersection_node_id, d.way_id, d.toward_node_id
        );
        let _ = writeln!(s, "    <tag k=\"{PROVENANCE_TAG}\" v=\"{}\"/>", escape(&prov));
        s.push_str("  </node>\n");
    }
    s.push_str("</osm>\n");
    s
}
