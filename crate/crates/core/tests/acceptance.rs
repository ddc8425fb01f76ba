//! One line per acceptance criterion. Exit status is non-zero if any fails.
//!
//! The live smoke test (criterion 8) runs only when `XWALK_LIVE_ENDPOINT` is
//! set; the credential is read from the variable named in the gateway config.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use xwalk_core::eval::{metrics, ConfusionMatrix};
use xwalk_core::gateway::{DenyAll, GatewayMode, HttpTransport};
use xwalk_core::geo::{enumerate_windows_in, wgs84_to_utm, GeoPoint, Hemisphere};
use xwalk_core::patch::blur::gaussian_blur;
use xwalk_core::patch::{
    overlay_layer, render_blurred, render_overlaid, render_plain, road_mask, DatasetConfig, DatasetManifest,
    RenderStyle, Scene,
};
use xwalk_core::pipeline::{self, PipelineConfig};
use xwalk_core::road::parse_osm;
use xwalk_core::variant::VariantRegistry;
use xwalk_core::verdict::{parse_response, PredictionPolicy, VerdictLabel};

/// Published cells are printed to two decimals (some to one).
const TABLE_TOLERANCE: f64 = 0.05;
const RUNTIME_LIMIT: Duration = Duration::from_secs(1);
const GEODESY_TOLERANCE_M: f64 = 0.01;
const EXPORT_TOLERANCE_DEG: f64 = 1e-7;
const MIN_BLUR_PATCHES: usize = 20;
const LIVE_SAMPLES_PER_CLASS: usize = 5;
const LIVE_MIN_PARSEABLE: f64 = 0.8;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// (config, published precision, recall, F1, accuracy, tp, fp, tn, fn)
const PUBLISHED: [(&str, f64, f64, f64, f64, u64, u64, u64, u64); 4] = [
    ("A", 68.03, 100.0, 80.97, 76.5, 100, 47, 53, 0),
    ("B", 83.33, 35.00, 49.29, 64.0, 35, 7, 93, 65),
    ("C", 80.65, 100.0, 89.3, 88.0, 100, 24, 76, 0),
    ("D", 96.11, 99.00, 97.53, 97.5, 99, 4, 96, 1),
];

fn metric_reproduction() -> Outcome {
    let t = Instant::now();
    for (name, p, r, f, a, tp, fp, tn, fn_) in PUBLISHED {
        let m = metrics(&ConfusionMatrix::new(tp, fp, tn, fn_)).map_err(|e| e.to_string())?;
        for (what, got, want) in [("precision", m.precision, p), ("recall", m.recall, r), ("F1", m.f1, f)] {
            check(
                (got - want).abs() <= TABLE_TOLERANCE + 1e-9,
                format!("{name} {what}: {got} vs {want}"),
            )?;
        }
        check(m.accuracy == a, format!("{name} accuracy: {} vs {a}", m.accuracy))?;

        // The matrix is the only one on a balanced N=200 that fits the row.
        let mut fits = Vec::new();
        for tp in 0..=100u64 {
            for fp in 0..=100u64 {
                let cm = ConfusionMatrix::new(tp, fp, 100 - fp, 100 - tp);
                let Ok(m) = metrics(&cm) else { continue };
                if (m.precision - p).abs() <= TABLE_TOLERANCE + 1e-9
                    && (m.recall - r).abs() <= TABLE_TOLERANCE + 1e-9
                    && (m.f1 - f).abs() <= TABLE_TOLERANCE + 1e-9
                    && m.accuracy == a
                {
                    fits.push((tp, fp));
                }
            }
        }
        check(fits == [(tp, fp)], format!("{name}: search found {fits:?}"))?;
    }
    let dt = t.elapsed();
    check(dt < RUNTIME_LIMIT, format!("took {dt:?}"))?;
    Ok(format!("4 rows within ±{TABLE_TOLERANCE}, accuracies exact, {dt:.1?}"))
}

fn parser_fixtures() -> Outcome {
    let t = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rationales");
    let expected = [
        ("plain", VerdictLabel::Yes),
        ("separated", VerdictLabel::No),
        ("overlaid", VerdictLabel::Yes),
        ("blurred", VerdictLabel::Yes),
    ];
    for (name, want) in expected {
        let text = fs::read_to_string(dir.join(format!("{name}.txt"))).map_err(|e| format!("{name}: {e}"))?;
        let v = parse_response(&text);
        check(v.label == want, format!("{name}: {:?}", v.label))?;
        check(!v.reason.is_empty(), format!("{name}: empty REASON"))?;
        if name == "separated" {
            check(
                v.crosswalk_line.starts_with("No (based on the limitations"),
                format!("separated CROSSWALK line {:?}", v.crosswalk_line),
            )?;
        }
    }
    let dt = t.elapsed();
    check(dt < RUNTIME_LIMIT, format!("took {dt:?}"))?;
    Ok(format!("Yes/No/Yes/Yes with reasons, {dt:.1?}"))
}

fn tiling() -> Outcome {
    let a = enumerate_windows_in(5000, 5000, 256, 256).map_err(|e| e.to_string())?.len();
    let b = enumerate_windows_in(5000, 5000, 256, 128).map_err(|e| e.to_string())?.len();
    check(a == 361 && b == 1444, format!("{a} / {b}"))?;
    Ok(format!("stride 256 -> {a}, stride 128 -> {b}"))
}

fn fixture_config(work: &Path) -> Result<PipelineConfig, String> {
    let mut cfg = PipelineConfig::load(&common::fixture_dir().join("pipeline.toml")).map_err(|e| e.to_string())?;
    cfg.dataset_root = work.join("dataset");
    cfg.output_dir = work.join("out");
    Ok(cfg)
}

fn blur_mask() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (raster, cands) = common::candidates(&fixture_config(work.path())?);
    let style = RenderStyle::default();
    let mut n = 0;
    for c in &cands {
        let scene = Scene {
            raster: &raster,
            window: c.window,
            approach: &c.approach,
            context: &c.context,
        };
        let plain = render_plain(&raster, &c.window);
        let out = render_blurred(&scene, &style);
        let layer = overlay_layer(&raster, &c.window, &c.approach, &style);
        let mask = road_mask(&raster, &c.window, &c.context, &style);
        let (mut before, mut after) = (Vec::new(), Vec::new());
        for (x, y, p) in out.enumerate_pixels() {
            if layer.color_at(x, y).is_some() {
                continue;
            }
            let q = plain.get_pixel(x, y);
            if mask.get(x, y) {
                check(p == q, format!("{}: in-mask pixel ({x},{y}) changed", c.sample_id))?;
            } else {
                before.push(q.0);
                after.push(p.0);
            }
        }
        let (vb, va) = (variance(&before), variance(&after));
        check(va < vb, format!("{}: out-of-mask variance {vb:.2} -> {va:.2}", c.sample_id))?;
        n += 1;
    }
    check(n >= MIN_BLUR_PATCHES, format!("only {n} patches"))?;
    let flat = RgbImage::from_pixel(64, 48, Rgb([91, 140, 17]));
    check(gaussian_blur(&flat, style.blur_sigma) == flat, "constant image changed under blur")?;
    Ok(format!("{n} patches, constant image unchanged"))
}

fn variance(px: &[[u8; 3]]) -> f64 {
    let n = (px.len() * 3) as f64;
    let mean = px.iter().flatten().map(|&v| v as f64).sum::<f64>() / n;
    px.iter().flatten().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n
}

fn overlay() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (raster, cands) = common::candidates(&fixture_config(work.path())?);
    let style = RenderStyle::default();
    for c in &cands {
        let plain = render_plain(&raster, &c.window);
        let over = render_overlaid(&raster, &c.window, &c.approach, &style);
        let layer = overlay_layer(&raster, &c.window, &c.approach, &style);
        let size = c.window.size;
        let mut red = vec![false; (size * size) as usize];
        for (x, y, p) in over.enumerate_pixels() {
            match layer.color_at(x, y) {
                None => check(p == plain.get_pixel(x, y), format!("{}: ({x},{y}) off-overlay", c.sample_id))?,
                Some(col) => {
                    check(p.0 == col, format!("{}: ({x},{y}) wrong color", c.sample_id))?;
                    red[(y * size + x) as usize] = col == style.dot_color;
                }
            }
        }
        let k = components(&red, size);
        check(k == 1, format!("{}: {k} red components", c.sample_id))?;
    }
    Ok(format!("{} patches, one red component each", cands.len()))
}

fn components(on: &[bool], w: u32) -> usize {
    let w = w as usize;
    let mut seen = vec![false; on.len()];
    let mut count = 0;
    for s in 0..on.len() {
        if !on[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut next = Vec::with_capacity(4);
            if x > 0 {
                next.push(i - 1);
            }
            if x + 1 < w {
                next.push(i + 1);
            }
            if y > 0 {
                next.push(i - w);
            }
            if i + w < on.len() {
                next.push(i + w);
            }
            for j in next {
                if on[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

fn geodesy() -> Outcome {
    // (lat, lon, zone, hemisphere, easting, northing), frozen from PROJ 9.5.1.
    const CONTROL: [(f64, f64, u8, Hemisphere, f64, f64); 6] = [
        (39.507, -84.745, 16, Hemisphere::North, 693872.873986, 4375469.154393),
        (45.0, -90.0, 16, Hemisphere::North, 263553.973899, 4987329.504699),
        (-33.8688, 151.2093, 56, Hemisphere::South, 334368.633648, 6250948.345385),
        (51.4779, -0.0015, 30, Hemisphere::North, 708213.494972, 5707235.660473),
        (60.0, 10.5, 32, Hemisphere::North, 583661.746882, 6652359.681928),
        (-10.0, -49.5, 22, Hemisphere::South, 664411.030652, 8894213.730603),
    ];
    let mut worst: f64 = 0.0;
    for (lat, lon, zone, hemi, e, n) in CONTROL {
        let p = wgs84_to_utm(GeoPoint { lat, lon }, zone, hemi).map_err(|e| e.to_string())?;
        let d = (p.easting - e).abs().max((p.northing - n).abs());
        check(d < GEODESY_TOLERANCE_M, format!("({lat},{lon}) off by {d} m"))?;
        worst = worst.max(d);
    }
    let cm = wgs84_to_utm(GeoPoint { lat: 39.5, lon: -87.0 }, 16, Hemisphere::North).map_err(|e| e.to_string())?;
    check(cm.easting == 500_000.0, format!("central meridian easting {}", cm.easting))?;
    Ok(format!("{} control points, worst {worst:.2e} m, central meridian exact", CONTROL.len()))
}

fn snapshot(root: &Path, out: &mut BTreeMap<String, Vec<u8>>, base: &Path) -> std::io::Result<()> {
    for e in fs::read_dir(root)? {
        let p = e?.path();
        if p.is_dir() {
            snapshot(&p, out, base)?;
        } else {
            let rel = p.strip_prefix(base).expect("under base").to_string_lossy().into_owned();
            out.insert(rel, fs::read(&p)?);
        }
    }
    Ok(())
}

fn full_replay_run(work: &Path) -> Result<(BTreeMap<String, Vec<u8>>, u64), String> {
    let cfg = fixture_config(work)?;
    let registry = VariantRegistry::with_defaults();
    let deny = Arc::new(DenyAll::new());
    pipeline::build(&cfg, &registry).map_err(|e| e.to_string())?;
    for config in cfg.selected_configs().map_err(|e| e.to_string())? {
        pipeline::label(&cfg, &registry, config, Some(GatewayMode::Replay), deny.clone()).map_err(|e| e.to_string())?;
        pipeline::evaluate(&cfg, config, cfg.policy).map_err(|e| e.to_string())?;
    }
    pipeline::report(&cfg).map_err(|e| e.to_string())?;
    let mut files = BTreeMap::new();
    snapshot(work, &mut files, work).map_err(|e| e.to_string())?;
    Ok((files, deny.attempts()))
}

fn replay_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (first, na) = full_replay_run(a.path())?;
    let (second, nb) = full_replay_run(b.path())?;
    check(na == 0 && nb == 0, format!("{} transport attempts", na + nb))?;
    check(
        first.keys().eq(second.keys()),
        "the two runs wrote different file sets",
    )?;
    for (path, bytes) in &first {
        check(&second[path] == bytes, format!("{path} differs"))?;
    }
    for needed in ["manifest.json", "verdicts.json", "report.json"] {
        let n = first.keys().filter(|k| k.ends_with(needed)).count();
        check(n >= 4, format!("{n} {needed} files"))?;
    }
    Ok(format!("{} files byte-identical, 0 network attempts", first.len()))
}

fn live_smoke() -> Option<Outcome> {
    let endpoint = std::env::var("XWALK_LIVE_ENDPOINT").ok().filter(|s| !s.is_empty())?;
    Some((|| {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = fixture_config(work.path())?;
        cfg.configs = vec![DatasetConfig::Blurred.name().into()];
        cfg.per_class = Some(LIVE_SAMPLES_PER_CLASS);
        cfg.gateway.endpoint = endpoint;
        if let Ok(model) = std::env::var("XWALK_LIVE_MODEL") {
            cfg.gateway.model = model;
        }
        cfg.gateway.transcript_dir = None;
        let registry = VariantRegistry::with_defaults();
        pipeline::build(&cfg, &registry).map_err(|e| e.to_string())?;
        let transport = HttpTransport::new(Duration::from_secs(cfg.gateway.timeout_secs))?;
        let set = pipeline::label(&cfg, &registry, DatasetConfig::Blurred, Some(GatewayMode::Live), Arc::new(transport))
            .map_err(|e| e.to_string())?;
        let parsed = set
            .entries
            .iter()
            .filter(|e| e.verdict.as_ref().is_some_and(|v| v.label != VerdictLabel::Unparseable))
            .count();
        let share = parsed as f64 / set.entries.len() as f64;
        check(share >= LIVE_MIN_PARSEABLE, format!("{parsed}/{} parseable", set.entries.len()))?;
        Ok(format!("{parsed}/{} parseable", set.entries.len()))
    })())
}

fn export_round_trip() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = fixture_config(work.path())?;
    cfg.configs = vec![DatasetConfig::Blurred.name().into()];
    let registry = VariantRegistry::with_defaults();
    pipeline::build(&cfg, &registry).map_err(|e| e.to_string())?;
    pipeline::label(&cfg, &registry, DatasetConfig::Blurred, Some(GatewayMode::Replay), Arc::new(DenyAll::new()))
        .map_err(|e| e.to_string())?;
    let (path, n) = pipeline::export_osm(&cfg, DatasetConfig::Blurred, PredictionPolicy::Lenient).map_err(|e| e.to_string())?;
    check(n > 0, "nothing exported")?;
    let doc = fs::read(&path).map_err(|e| e.to_string())?;
    let graph = parse_osm(doc.as_slice()).map_err(|e| e.to_string())?;
    let manifest = DatasetManifest::load(&cfg.dataset_root, DatasetConfig::Blurred).map_err(|e| e.to_string())?;
    let nodes: Vec<_> = graph.crossing_nodes().collect();
    check(nodes.len() == n, format!("{} of {n} nodes re-parsed", nodes.len()))?;
    for (id, p) in nodes {
        let prov = graph
            .node_tags(id)
            .and_then(|t| t.get("source:detection"))
            .ok_or(format!("node {} lacks provenance", id.0))?;
        let sample = prov
            .split(';')
            .find_map(|kv| kv.strip_prefix("sample="))
            .ok_or("no sample in provenance")?;
        let rec = manifest
            .samples
            .iter()
            .find(|s| s.sample_id.0 == sample)
            .ok_or(format!("unknown sample {sample}"))?;
        let d = (rec.intersection.lat - p.lat).abs().max((rec.intersection.lon - p.lon).abs());
        check(d <= EXPORT_TOLERANCE_DEG, format!("node {} off by {d:e} deg", id.0))?;
    }
    Ok(format!("{n} nodes within {EXPORT_TOLERANCE_DEG:e} deg"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric reproduction", metric_reproduction),
        ("parser fixtures", parser_fixtures),
        ("tiling arithmetic", tiling),
        ("blur mask", blur_mask),
        ("overlay", overlay),
        ("geodesy", geodesy),
        ("replay determinism", replay_determinism),
        ("live smoke", || live_smoke().unwrap_or(Ok("SKIP".into()))),
        ("OSM export round trip", export_round_trip),
    ];
    let (mut failed, mut skipped) = (0, 0);
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) if detail == "SKIP" => {
                skipped += 1;
                println!("SKIP {}. {name}: XWALK_LIVE_ENDPOINT not set", k + 1);
            }
            Ok(detail) => println!("PASS {}. {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed, {skipped} skipped",
        criteria.len() - failed - skipped
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
