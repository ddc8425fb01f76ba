use std::fmt;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, RgbImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetConfig, PatchError, RenderStyle, Scene};
use crate::digest::{framed, hex, sha256_hex};
use crate::geo::{GeoPoint, GeoRaster, PixelWindow};
use crate::provenance::Provenance;
use crate::road::{Approach, NodeId, TruthLabel, TruthSource, WayId};
use crate::variant::DatasetVariant;

/// Stable sample identifier shared by every dataset configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub String);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// First 16 hex digits of a digest over raster, window and approach identity.
pub fn sample_id(raster_digest: &str, window: &PixelWindow, approach: &Approach) -> SampleId {
    let win = [window.x0, window.y0, window.size]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect::<Vec<u8>>();
    let d = framed(&[
        raster_digest.as_bytes(),
        &win,
        &approach.intersection.0.to_le_bytes(),
        &approach.way_id.0.to_le_bytes(),
        &approach.toward.0.to_le_bytes(),
    ]);
    SampleId(hex(&d)[..16].to_string())
}

/// A labeled approach ready to render.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub sample_id: SampleId,
    pub window: PixelWindow,
    pub approach: Approach,
    /// Every approach centerline passing through the window.
    pub context: Arc<[Approach]>,
    pub intersection_geo: GeoPoint,
}

impl Candidate {
    pub fn label(&self) -> Option<TruthLabel> {
        self.approach.truth_label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildPlan {
    /// Samples per class; `None` keeps every labeled candidate.
    pub per_class: Option<usize>,
    pub seed: u64,
}

/// Seeded, balanced selection. The result is sorted by sample id.
pub fn select_samples(candidates: &[Candidate], plan: &BuildPlan) -> Result<Vec<Candidate>, PatchError> {
    let mut sorted: Vec<&Candidate> = candidates.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let mut pos: Vec<&Candidate> = sorted.iter().copied().filter(|c| c.label() == Some(TruthLabel::Crosswalk)).collect();
    let mut neg: Vec<&Candidate> =
        sorted.iter().copied().filter(|c| c.label() == Some(TruthLabel::NotCrosswalk)).collect();
    let unlabeled = sorted.len() - pos.len() - neg.len();
    if unlabeled > 0 {
        log::debug!("{unlabeled} unlabeled candidates skipped");
    }

    if let Some(n) = plan.per_class {
        if pos.len() < n || neg.len() < n {
            return Err(PatchError::InsufficientSamples {
                requested: n,
                crosswalk: pos.len(),
                not_crosswalk: neg.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        pos.truncate(n);
        neg.truncate(n);
    }
    let mut out: Vec<Candidate> = pos.into_iter().chain(neg).cloned().collect();
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(out)
}

/// One rendered sample.
#[derive(Debug, Clone)]
pub struct PatchSample {
    pub sample_id: SampleId,
    pub window: PixelWindow,
    pub config: DatasetConfig,
    pub images: Vec<RgbImage>,
    pub approach: Approach,
    pub truth_label: Option<TruthLabel>,
}

pub fn render_sample(
    variant: &dyn DatasetVariant,
    raster: &GeoRaster,
    candidate: &Candidate,
    style: &RenderStyle,
) -> PatchSample {
    let scene = Scene {
        raster,
        window: candidate.window,
        approach: &candidate.approach,
        context: &candidate.context,
    };
    let images = variant.render(&scene, style);
    debug_assert_eq!(images.len(), variant.config().image_count());
    PatchSample {
        sample_id: candidate.sample_id.clone(),
        window: candidate.window,
        config: variant.config(),
        images,
        approach: candidate.approach.clone(),
        truth_label: candidate.label(),
    }
}

/// 8-bit RGB PNG, non-interlaced, fixed encoder settings.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, PatchError> {
    let mut buf = Cursor::new(Vec::new());
    PngEncoder::new_with_quality(&mut buf, CompressionType::Best, FilterType::Adaptive).write_image(
        img.as_raw(),
        img.width(),
        img.height(),
        ExtendedColorType::Rgb8,
    )?;
    Ok(buf.into_inner())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// Relative to the dataset root.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: SampleId,
    pub intersection_node_id: NodeId,
    pub way_id: WayId,
    pub toward_node_id: NodeId,
    pub intersection: GeoPoint,
    pub window: PixelWindow,
    pub truth_label: TruthLabel,
    pub truth_source: TruthSource,
    pub images: Vec<ImageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub crosswalk: usize,
    #[serde(rename = "not-crosswalk")]
    pub not_crosswalk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub provenance: Provenance,
    pub config: DatasetConfig,
    pub style: RenderStyle,
    pub seed: u64,
    pub per_class: Option<usize>,
    pub counts: ClassCounts,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn path(root: &Path, config: DatasetConfig) -> PathBuf {
        root.join(config.name()).join(Self::FILE_NAME)
    }

    pub fn load(root: &Path, config: DatasetConfig) -> Result<Self, PatchError> {
        let bytes = fs::read(Self::path(root, config))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn to_json(&self) -> Result<String, PatchError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Selects, renders and writes one configuration under
/// `<root>/<config>/<label>/`, then writes `<root>/<config>/manifest.json`.
///
/// Earlier output for the same configuration is removed first.
pub fn build_dataset(
    variant: &dyn DatasetVariant,
    raster: &GeoRaster,
    candidates: &[Candidate],
    plan: &BuildPlan,
    style: &RenderStyle,
    root: &Path,
    provenance: &Provenance,
) -> Result<DatasetManifest, PatchError> {
    style.validate()?;
    let selected = select_samples(candidates, plan)?;
    let config = variant.config();
    let dir = root.join(config.name());
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    for label in [TruthLabel::Crosswalk, TruthLabel::NotCrosswalk] {
        fs::create_dir_all(dir.join(label.as_str()))?;
    }

    let samples = selected
        .par_iter()
        .map(|c| {
            let label = c.label().ok_or_else(|| PatchError::Unlabeled(c.sample_id.0.clone()))?;
            let sample = render_sample(variant, raster, c, style);
            let mut images = Vec::with_capacity(sample.images.len());
            for (k, img) in sample.images.iter().enumerate() {
                let suffix = if k == 0 { "png" } else { "vector.png" };
                let rel = format!("{}/{}/{}.{suffix}", config.name(), label.as_str(), c.sample_id);
                let bytes = encode_png(img)?;
                fs::write(root.join(&rel), &bytes)?;
                images.push(ImageRecord {
                    path: rel,
                    sha256: sha256_hex(&bytes),
                });
            }
            Ok(SampleRecord {
                sample_id: c.sample_id.clone(),
                intersection_node_id: c.approach.intersection,
                way_id: c.approach.way_id,
                toward_node_id: c.approach.toward,
                intersection: c.intersection_geo,
                window: c.window,
                truth_label: label,
                truth_source: c.approach.truth_source,
                images,
            })
        })
        .collect::<Result<Vec<_>, PatchError>>()?;

    let mut counts = ClassCounts::default();
    for s in &samples {
        match s.truth_label {
            TruthLabel::Crosswalk => counts.crosswalk += 1,
            TruthLabel::NotCrosswalk => counts.not_crosswalk += 1,
        }
    }
    let manifest = DatasetManifest {
        provenance: provenance.clone(),
        config,
        style: style.clone(),
        seed: plan.seed,
        per_class: plan.per_class,
        counts,
        samples,
    };
    fs::write(dir.join(DatasetManifest::FILE_NAME), manifest.to_json()?)?;
    Ok(manifest)
}
