//! Patch rendering for the four dataset configurations and balanced dataset
//! assembly.

pub mod blur;
mod dataset;
pub mod draw;
mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{
    build_dataset, encode_png, render_sample, sample_id, select_samples, BuildPlan, Candidate, ClassCounts,
    DatasetManifest, ImageRecord, PatchSample, SampleId, SampleRecord,
};
pub use render::{
    overlay_layer, render_blurred, render_overlaid, render_plain, render_vector_layer, road_mask, Overlay,
    RenderStyle, Scene,
};

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("invalid render style: {0}")]
    InvalidStyle(String),
    #[error(
        "insufficient samples: need {requested} per class, have crosswalk: {crosswalk}, not-crosswalk: {not_crosswalk}"
    )]
    InsufficientSamples {
        requested: usize,
        crosswalk: usize,
        not_crosswalk: usize,
    },
    #[error("candidate {0} has no truth label")]
    Unlabeled(String),
    #[error("png encoding: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetConfig {
    Plain,
    Separated,
    Overlaid,
    Blurred,
}

impl DatasetConfig {
    pub const ALL: [DatasetConfig; 4] = [
        DatasetConfig::Plain,
        DatasetConfig::Separated,
        DatasetConfig::Overlaid,
        DatasetConfig::Blurred,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetConfig::Plain => "plain",
            DatasetConfig::Separated => "separated",
            DatasetConfig::Overlaid => "overlaid",
            DatasetConfig::Blurred => "blurred",
        }
    }

    /// Row label used in metric tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            DatasetConfig::Plain => "A (Plain)",
            DatasetConfig::Separated => "B (Separated)",
            DatasetConfig::Overlaid => "C (Overlaid)",
            DatasetConfig::Blurred => "D (Blurred)",
        }
    }

    pub fn image_count(&self) -> usize {
        match self {
            DatasetConfig::Separated => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for DatasetConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetConfig::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown dataset configuration `{s}` (expected plain, separated, overlaid or blurred)"))
    }
}
