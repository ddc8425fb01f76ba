#![allow(dead_code)]

use std::path::{Path, PathBuf};

use xwalk_core::geo::{load_raster, write_geotiff, GeoRaster};
use xwalk_core::patch::Candidate;
use xwalk_core::pipeline::{collect_candidates, PipelineConfig};
use xwalk_core::synth;

pub const SEED: u64 = 7;

/// Writes the synthetic scene into `dir` and returns a config over it.
pub fn synthetic_workspace(dir: &Path) -> PipelineConfig {
    let scene = synth::generate(SEED).unwrap();
    let mut tif = std::io::Cursor::new(Vec::new());
    write_geotiff(&scene.raster, &mut tif).unwrap();
    std::fs::write(dir.join("area.tif"), tif.into_inner()).unwrap();
    std::fs::write(dir.join("roads.osm"), &scene.osm_xml).unwrap();
    std::fs::write(dir.join("overrides.json"), serde_json::to_vec(&scene.overrides).unwrap()).unwrap();
    let toml = format!(
        "seed = {SEED}\nraster = \"area.tif\"\nosm = \"roads.osm\"\noverrides = \"overrides.json\"\n\
         dataset_root = \"dataset\"\noutput_dir = \"out\"\nper_class = 12\n\n\
         [gateway]\nmode = \"replay\"\ntranscript_dir = \"transcripts\"\n"
    );
    PipelineConfig::from_toml(&toml, dir).unwrap()
}

pub fn candidates(cfg: &PipelineConfig) -> (GeoRaster, Vec<Candidate>) {
    let raster = load_raster(&cfg.raster).unwrap();
    let set = collect_candidates(cfg, &raster).unwrap();
    (raster, set.candidates)
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}
