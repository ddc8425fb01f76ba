//! Regenerates `fixtures/synthetic`: raster, OSM extract, overrides, pipeline
//! config and one replay transcript per bundle.
//!
//! The transcripts hold scripted answers in the model's answer format so the
//! whole pipeline can run offline. Run with
//! `cargo run -p xwalk-core --example make_fixtures [-- <dir>]`.

use std::fs;
use std::path::PathBuf;

use xwalk_core::gateway::{canonical_request, GatewayConfig, TranscriptRecord, TranscriptStore};
use xwalk_core::geo::write_geotiff;
use xwalk_core::patch::{DatasetConfig, DatasetManifest, SampleRecord};
use xwalk_core::pipeline::{build, PipelineConfig};
use xwalk_core::prompt::assemble;
use xwalk_core::road::TruthLabel;
use xwalk_core::synth;
use xwalk_core::variant::VariantRegistry;

const SEED: u64 = 7;

const PIPELINE_TOML: &str = r#"# Synthetic 512x512 scene, 1 m/pixel, UTM zone 16N.
seed = 7
raster = "area.tif"
osm = "roads.osm"
overrides = "overrides.json"
dataset_root = "out/dataset"
output_dir = "out"
configs = ["plain", "separated", "overlaid", "blurred"]
window_size = 256
per_class = 12
policy = "lenient"

[style]
line_color = [0, 0, 255]
line_width = 3
dot_color = [255, 0, 0]
dot_radius = 5
blur_sigma = 5.0
road_buffer = 20

[gateway]
model = "gpt-4o"
mode = "replay"
transcript_dir = "transcripts"
max_parallel = 4
"#;

fn yes(detail: &str, inline: bool) -> String {
    let sep = if inline { " " } else { "\n\n" };
    format!(
        "**POSITIVE SIGNS:** Parallel white bars cross the road {detail}, perpendicular to the lane direction.\n\n\
         **NEGATIVE SIGNS:** No pedestrian signals are visible.\n\n\
         **RISKS:** Roof edges and sidewalk borders are also light-colored and could be mistaken for markings.\n\n\
         **CROSSWALK:** Yes{sep}**REASON:** Evenly spaced white bars span the carriageway and connect the \
         sidewalks on both sides, matching a high-visibility crosswalk."
    )
}

fn no(detail: &str, parenthetical: bool) -> String {
    let suffix = if parenthetical {
        " (based on the limitations of overlay interpretation here)"
    } else {
        ""
    };
    format!(
        "**POSITIVE SIGNS:** The road surface is clearly visible {detail}.\n\n\
         **NEGATIVE SIGNS:** No bar or ladder pattern crosses the road segment; the asphalt is uniform.\n\n\
         **RISKS:** Texture noise in the asphalt could hide faint markings.\n\n\
         **CROSSWALK:** No{suffix}\n\n\
         **REASON:** Without markings that span the road and connect the sidewalks, the criteria are not met."
    )
}

/// Scripted answer quality per configuration, keyed on a stable number per sample.
fn answer(config: DatasetConfig, s: &SampleRecord, k: u64) -> String {
    let positive = s.truth_label == TruthLabel::Crosswalk;
    match config {
        DatasetConfig::Plain => {
            if positive || k % 2 == 0 {
                yes("near the intersection", true)
            } else {
                no("around the intersection", false)
            }
        }
        DatasetConfig::Separated => {
            if k % 11 == 5 {
                "I'm unable to determine the presence of the crosswalk from these images; the overlay cannot be placed within the scene.".into()
            } else if positive && k % 3 == 0 {
                yes("where the second image places the blue line", false)
            } else {
                no("in the first image, but the overlay lacks positional context", true)
            }
        }
        DatasetConfig::Overlaid => {
            if positive || k % 4 == 1 {
                yes("and the blue line", false)
            } else {
                no("along the blue line", false)
            }
        }
        DatasetConfig::Blurred => {
            if positive == (k % 13 != 3) {
                yes("and the blue line in the sharp region", false)
            } else {
                no("along the blue line; the surroundings are blurred", false)
            }
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic"));
    fs::create_dir_all(&dir)?;

    let scene = synth::generate(SEED)?;
    let mut tif = std::io::Cursor::new(Vec::new());
    write_geotiff(&scene.raster, &mut tif)?;
    fs::write(dir.join("area.tif"), tif.into_inner())?;
    fs::write(dir.join("roads.osm"), &scene.osm_xml)?;
    let mut overrides = serde_json::to_string_pretty(&scene.overrides)?;
    overrides.push('\n');
    fs::write(dir.join("overrides.json"), overrides)?;
    fs::write(dir.join("pipeline.toml"), PIPELINE_TOML)?;

    let work = tempfile::tempdir()?;
    let mut cfg = PipelineConfig::load(&dir.join("pipeline.toml"))?;
    cfg.dataset_root = work.path().join("dataset");
    cfg.output_dir = work.path().join("out");
    let registry = VariantRegistry::with_defaults();
    build(&cfg, &registry)?;

    let tx = dir.join("transcripts");
    if tx.exists() {
        fs::remove_dir_all(&tx)?;
    }
    let store = TranscriptStore::new(&tx);
    let gcfg = GatewayConfig {
        transcript_dir: Some(tx.clone()),
        ..cfg.gateway.clone()
    };
    for config in DatasetConfig::ALL {
        let manifest = DatasetManifest::load(&cfg.dataset_root, config)?;
        let template = registry.get(config.name()).expect("built-in").template();
        for s in &manifest.samples {
            let bundle = assemble(&template, s, &cfg.dataset_root)?;
            let k = u64::from_str_radix(&s.sample_id.0[..8], 16)?;
            store.put(&TranscriptRecord {
                digest: bundle.digest.clone(),
                model: gcfg.model.clone(),
                request: canonical_request(&bundle, &gcfg),
                response: answer(config, s, k),
                timestamp: "2025-01-01T00:00:00Z".into(),
            })?;
        }
    }
    println!("wrote {} transcripts to {}", store.len()?, tx.display());
    Ok(())
}
