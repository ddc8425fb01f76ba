//! A small synthetic town: a 512×512 raster at 1 m/pixel with a 4×4 street
//! grid, painted zebra crossings, the matching OSM extract and an override
//! manifest. Used for fixtures and end-to-end tests.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::{GeoError, GeoRaster, Hemisphere, PixelSize, UtmCrs};
use crate::road::{NodeId, Override, TruthLabel, WayId};

pub const SIZE: u32 = 512;
pub const STREETS: [u32; 4] = [64, 192, 320, 448];
/// Upper-left corner in UTM 16N; the raster centre lies near 39.507 N, 84.745 W.
pub const ORIGIN: (f64, f64) = (693_616.0, 4_375_725.0);
const ROAD_HALF_WIDTH: i64 = 6;
/// Crossing stripes sit this far from the junction centre.
pub const CROSSING_OFFSET: i64 = 12;
/// Ways run past the raster edge by this much.
const OVERRUN: i64 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    CrossingNode,
    CrossingWay,
    OverrideOnly,
    None,
}

/// Ground truth for both approaches of one street at one junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JunctionArm {
    pub row: usize,
    pub col: usize,
    pub axis: Axis,
    pub label: TruthLabel,
    pub mapping: Mapping,
}

pub fn junction_id(row: usize, col: usize) -> NodeId {
    NodeId(1000 + (row * 4 + col) as i64)
}

pub fn way_id(axis: Axis, index: usize) -> WayId {
    match axis {
        Axis::Horizontal => WayId(100 + index as i64),
        Axis::Vertical => WayId(200 + index as i64),
    }
}

/// Every (junction, street) pair. Labels alternate in a checkerboard, so half
/// of the 64 approaches carry crossings.
pub fn layout() -> Vec<JunctionArm> {
    let mut out = Vec::new();
    let mut painted = 0;
    for row in 0..4 {
        for col in 0..4 {
            for (a, axis) in [Axis::Horizontal, Axis::Vertical].into_iter().enumerate() {
                let k = row * 4 + col;
                let (label, mapping) = if (k + a) % 2 == 0 {
                    let m = match painted % 8 {
                        3 => Mapping::CrossingWay,
                        6 => Mapping::OverrideOnly,
                        _ => Mapping::CrossingNode,
                    };
                    painted += 1;
                    (TruthLabel::Crosswalk, m)
                } else {
                    (TruthLabel::NotCrosswalk, Mapping::None)
                };
                out.push(JunctionArm {
                    row,
                    col,
                    axis,
                    label,
                    mapping,
                });
            }
        }
    }
    out
}

pub struct SyntheticScene {
    pub raster: GeoRaster,
    pub osm_xml: String,
    pub overrides: Vec<Override>,
}

fn crs() -> UtmCrs {
    UtmCrs::wgs84(16, Hemisphere::North).expect("zone 16 is valid")
}

fn paint(samples: &mut [u8], x: i64, y: i64, c: [u8; 3]) {
    if (0..SIZE as i64).contains(&x) && (0..SIZE as i64).contains(&y) {
        let i = (y as usize * SIZE as usize + x as usize) * 3;
        samples[i..i + 3].copy_from_slice(&c);
    }
}

fn render(seed: u64, arms: &[JunctionArm]) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SIZE as usize;
    let mut s = vec![0u8; n * n * 3];
    // Lawn with gentle texture.
    for y in 0..n {
        for x in 0..n {
            let wave = (((x as f64) / 9.0).sin() * ((y as f64) / 13.0).cos() * 10.0) as i32;
            let j: i32 = rng.random_range(-6..=6);
            let g = (110 + wave + j).clamp(0, 255) as u8;
            paint(&mut s, x as i64, y as i64, [(g as i32 * 6 / 10) as u8, g, (g as i32 * 4 / 10) as u8]);
        }
    }
    // Roofs inside each block.
    for by in 0..5 {
        for bx in 0..5 {
            let count = rng.random_range(1..=3);
            for _ in 0..count {
                let x0 = bx as i64 * 128 - 48 + rng.random_range(16..60);
                let y0 = by as i64 * 128 - 48 + rng.random_range(16..60);
                let (w, h) = (rng.random_range(14..30), rng.random_range(14..30));
                let shade: u8 = rng.random_range(120..200);
                for y in y0..y0 + h {
                    for x in x0..x0 + w {
                        paint(&mut s, x, y, [shade, shade / 2 + 40, shade / 3 + 30]);
                    }
                }
            }
        }
    }
    // Sidewalks, then asphalt.
    for &c in &STREETS {
        let c = c as i64;
        for t in 0..SIZE as i64 {
            for d in -ROAD_HALF_WIDTH - 3..=ROAD_HALF_WIDTH + 3 {
                let v = if d.abs() > ROAD_HALF_WIDTH + 1 { [185, 185, 180] } else { [150, 150, 150] };
                paint(&mut s, t, c + d, v);
                paint(&mut s, c + d, t, v);
            }
        }
    }
    for &c in &STREETS {
        let c = c as i64;
        for t in 0..SIZE as i64 {
            for d in -ROAD_HALF_WIDTH..=ROAD_HALF_WIDTH {
                let j: i32 = rng.random_range(-4..=4);
                let v = (72 + j) as u8;
                paint(&mut s, t, c + d, [v, v, v + 4]);
                let j: i32 = rng.random_range(-4..=4);
                let v = (72 + j) as u8;
                paint(&mut s, c + d, t, [v, v, v + 4]);
            }
        }
    }
    // Zebra bars: parallel to traffic, spaced across the carriageway.
    for arm in arms.iter().filter(|a| a.label == TruthLabel::Crosswalk) {
        let (cx, cy) = (STREETS[arm.col] as i64, STREETS[arm.row] as i64);
        for sign in [-1i64, 1] {
            for along in CROSSING_OFFSET - 2..=CROSSING_OFFSET + 2 {
                for across in -ROAD_HALF_WIDTH..=ROAD_HALF_WIDTH {
                    if across.rem_euclid(3) == 0 {
                        continue;
                    }
                    let white = [236, 236, 232];
                    match arm.axis {
                        Axis::Horizontal => paint(&mut s, cx + sign * along, cy + across, white),
                        Axis::Vertical => paint(&mut s, cx + across, cy + sign * along, white),
                    }
                }
            }
        }
    }
    s
}

/// Builds the scene. The same seed always yields the same bytes.
pub fn generate(seed: u64) -> Result<SyntheticScene, GeoError> {
    let arms = layout();
    let crs = crs();
    let raster = GeoRaster::new(
        SIZE,
        SIZE,
        render(seed, &arms),
        ORIGIN,
        PixelSize { x: 1.0, y: 1.0 },
        crs,
    )?;

    let mut nodes: Vec<(NodeId, f64, f64, Vec<(&str, &str)>)> = Vec::new();
    let mut ways: Vec<(WayId, Vec<NodeId>, Vec<(&str, &str)>)> = Vec::new();
    let mut node_at = |id: NodeId, px: f64, py: f64, tags: Vec<(&'static str, &'static str)>| -> Result<(), GeoError> {
        let g = crs.inverse(raster.pixel_to_projected(px, py))?;
        nodes.push((id, g.lat, g.lon, tags));
        Ok(())
    };

    for row in 0..4 {
        for col in 0..4 {
            node_at(junction_id(row, col), STREETS[col] as f64, STREETS[row] as f64, vec![])?;
        }
    }

    let mut next_id = 3000i64;
    let mut overrides = Vec::new();
    for (axis, index) in [Axis::Horizontal, Axis::Vertical].into_iter().flat_map(|a| (0..4).map(move |i| (a, i))) {
        let c = STREETS[index] as f64;
        // (position along the street, node id)
        let mut along: Vec<(i64, NodeId)> = Vec::new();
        for (k, t) in [-OVERRUN, SIZE as i64 - 1 + OVERRUN].into_iter().enumerate() {
            let street = if axis == Axis::Horizontal { index } else { 4 + index };
            let id = NodeId(2000 + (street * 2 + k) as i64);
            let (px, py) = match axis {
                Axis::Horizontal => (t as f64, c),
                Axis::Vertical => (c, t as f64),
            };
            node_at(id, px, py, vec![])?;
            along.push((t, id));
        }
        for j in 0..4 {
            let (row, col) = match axis {
                Axis::Horizontal => (index, j),
                Axis::Vertical => (j, index),
            };
            along.push((STREETS[j] as i64, junction_id(row, col)));
            let arm = arms
                .iter()
                .find(|a| a.row == row && a.col == col && a.axis == axis)
                .expect("layout covers every junction");
            for sign in [-1i64, 1] {
                let t = STREETS[j] as i64 + sign * CROSSING_OFFSET;
                let (px, py) = match axis {
                    Axis::Horizontal => (t as f64, c),
                    Axis::Vertical => (c, t as f64),
                };
                match arm.mapping {
                    Mapping::CrossingNode => {
                        let id = NodeId(next_id);
                        next_id += 1;
                        node_at(id, px, py, vec![("highway", "crossing"), ("crossing", "zebra")])?;
                        along.push((t, id));
                    }
                    Mapping::CrossingWay => {
                        let (a, b) = (NodeId(next_id), NodeId(next_id + 1));
                        next_id += 2;
                        let reach = (ROAD_HALF_WIDTH + 3) as f64;
                        let (ends_a, ends_b) = match axis {
                            Axis::Horizontal => ((px, py - reach), (px, py + reach)),
                            Axis::Vertical => ((px - reach, py), (px + reach, py)),
                        };
                        node_at(a, ends_a.0, ends_a.1, vec![])?;
                        node_at(b, ends_b.0, ends_b.1, vec![])?;
                        ways.push((
                            WayId(300 + ways.len() as i64),
                            vec![a, b],
                            vec![("highway", "footway"), ("footway", "crossing")],
                        ));
                    }
                    Mapping::OverrideOnly | Mapping::None => {}
                }
            }
        }
        along.sort();
        let way = way_id(axis, index);
        ways.push((way, along.iter().map(|(_, id)| *id).collect(), vec![("highway", "residential")]));

        for j in 0..4 {
            let (row, col) = match axis {
                Axis::Horizontal => (index, j),
                Axis::Vertical => (j, index),
            };
            let arm = arms.iter().find(|a| a.row == row && a.col == col && a.axis == axis).expect("present");
            if arm.mapping != Mapping::OverrideOnly {
                continue;
            }
            let junction = junction_id(row, col);
            if overrides.is_empty() {
                overrides.push(Override {
                    intersection_node_id: junction,
                    way_id: way,
                    toward_node_id: None,
                    label: TruthLabel::Crosswalk,
                });
            } else {
                let k = along.iter().position(|(_, id)| *id == junction).expect("junction on its way");
                for n in [along[k - 1].1, along[k + 1].1] {
                    overrides.push(Override {
                        intersection_node_id: junction,
                        way_id: way,
                        toward_node_id: Some(n),
                        label: TruthLabel::Crosswalk,
                    });
                }
            }
        }
    }
    // A sidewalk that is not a crossing; the parser drops it.
    node_at(NodeId(4000), 20.0, 50.0, vec![])?;
    node_at(NodeId(4001), 40.0, 50.0, vec![])?;
    ways.push((WayId(400), vec![NodeId(4000), NodeId(4001)], vec![("highway", "footway")]));
    // Refers to a junction that does not exist; reported and ignored.
    overrides.push(Override {
        intersection_node_id: NodeId(999_999),
        way_id: WayId(100),
        toward_node_id: None,
        label: TruthLabel::NotCrosswalk,
    });

    nodes.sort_by_key(|n| n.0);
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"xwalk synth\">\n");
    for (id, lat, lon, tags) in &nodes {
        if tags.is_empty() {
            let _ = writeln!(xml, "  <node id=\"{}\" lat=\"{lat:.7}\" lon=\"{lon:.7}\"/>", id.0);
        } else {
            let _ = writeln!(xml, "  <node id=\"{}\" lat=\"{lat:.7}\" lon=\"{lon:.7}\">", id.0);
            for (k, v) in tags {
                let _ = writeln!(xml, "    <tag k=\"{k}\" v=\"{v}\"/>");
            }
            xml.push_str("  </node>\n");
        }
    }
    for (id, nds, tags) in &ways {
        let _ = writeln!(xml, "  <way id=\"{}\">", id.0);
        for n in nds {
            let _ = writeln!(xml, "    <nd ref=\"{}\"/>", n.0);
        }
        for (k, v) in tags {
            let _ = writeln!(xml, "    <tag k=\"{k}\" v=\"{v}\"/>");
        }
        xml.push_str("  </way>\n");
    }
    xml.push_str("</osm>\n");

    Ok(SyntheticScene {
        raster,
        osm_xml: xml,
        overrides,
    })
}
