//! System and user prompt text per dataset configuration, and bundles that
//! pair a template with a sample's encoded images.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{framed, hex, sha256_hex};
use crate::patch::{DatasetConfig, SampleId, SampleRecord};

/// The published system prompt for samples with the overlay drawn on the image.
pub const OVERLAID_SYSTEM_PROMPT: &str = include_str!("../assets/prompts/overlaid.txt");

const PLAIN_SYSTEM_PROMPT: &str = include_str!("../assets/prompts/plain.txt");

const BLURRED_NOTE: &str = "Areas of the image away from the roads have been blurred on purpose; base your \
observations on the sharp road surfaces around the blue line.\n";

const SEPARATED_NOTE: &str = "You will receive two images of the same area at the same scale. The first is the \
satellite image without annotations; the second is the vector overlay of the first, showing the blue line and \
red dot on a white background. Locate the blue line and red dot at the same pixel positions in the first image \
and make your observations there.\n";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("missing image {path}: {source}")]
    MissingImage {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sample {sample_id} has {found} images, configuration {config} expects {expected}")]
    ImageCount {
        sample_id: SampleId,
        config: DatasetConfig,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub config: DatasetConfig,
    pub system_text: String,
    pub user_preamble: String,
}

/// Inserts `note` as its own paragraph after the opening paragraph.
fn after_intro(note: &str) -> String {
    let cut = OVERLAID_SYSTEM_PROMPT.find("\n\n").expect("prompt has paragraphs") + 2;
    let mut s = String::with_capacity(OVERLAID_SYSTEM_PROMPT.len() + note.len() + 1);
    s.push_str(&OVERLAID_SYSTEM_PROMPT[..cut]);
    s.push_str(note);
    s.push('\n');
    s.push_str(&OVERLAID_SYSTEM_PROMPT[cut..]);
    s
}

pub fn build_template(config: DatasetConfig) -> PromptTemplate {
    let (system_text, user_preamble) = match config {
        DatasetConfig::Overlaid => (
            OVERLAID_SYSTEM_PROMPT.to_string(),
            "Analyze the road segment marked by the blue line ending at the red dot in this image.",
        ),
        DatasetConfig::Blurred => (
            after_intro(BLURRED_NOTE),
            "Analyze the road segment marked by the blue line ending at the red dot in this image.",
        ),
        DatasetConfig::Separated => (
            after_intro(SEPARATED_NOTE),
            "Analyze the road segment marked in the second image, using the first image for your observations.",
        ),
        DatasetConfig::Plain => (
            PLAIN_SYSTEM_PROMPT.to_string(),
            "Analyze the intersection in this image.",
        ),
    };
    PromptTemplate {
        config,
        system_text,
        user_preamble: user_preamble.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePart {
    /// Standard alphabet, padded.
    pub base64: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sample_id: SampleId,
    pub config: DatasetConfig,
    pub system_text: String,
    pub user_preamble: String,
    pub images: Vec<ImagePart>,
    /// Hex SHA-256 over system text, preamble and image digests.
    pub digest: String,
}

pub fn bundle_digest(system_text: &str, user_preamble: &str, image_sha256: &[&str]) -> String {
    let mut parts: Vec<&[u8]> = vec![system_text.as_bytes(), user_preamble.as_bytes()];
    parts.extend(image_sha256.iter().map(|s| s.as_bytes()));
    hex(&framed(&parts))
}

/// Reads the sample's PNGs (paths relative to `dataset_root`) in manifest order.
pub fn assemble(template: &PromptTemplate, sample: &SampleRecord, dataset_root: &Path) -> Result<PromptBundle, PromptError> {
    let expected = template.config.image_count();
    if sample.images.len() != expected {
        return Err(PromptError::ImageCount {
            sample_id: sample.sample_id.clone(),
            config: template.config,
            expected,
            found: sample.images.len(),
        });
    }
    let mut images = Vec::with_capacity(expected);
    for rec in &sample.images {
        let bytes = std::fs::read(dataset_root.join(&rec.path)).map_err(|source| PromptError::MissingImage {
            path: rec.path.clone(),
            source,
        })?;
        let sha256 = sha256_hex(&bytes);
        if sha256 != rec.sha256 {
            log::warn!("{} changed since the manifest was written", rec.path);
        }
        images.push(ImagePart {
            base64: STANDARD.encode(&bytes),
            sha256,
        });
    }
    let shas: Vec<&str> = images.iter().map(|i| i.sha256.as_str()).collect();
    let digest = bundle_digest(&template.system_text, &template.user_preamble, &shas);
    Ok(PromptBundle {
        sample_id: sample.sample_id.clone(),
        config: template.config,
        system_text: template.system_text.clone(),
        user_preamble: template.user_preamble.clone(),
        images,
        digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squash(s: &str) -> String {
        s.replace("**", "").split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
    }

    #[test]
    fn overlaid_is_the_published_prompt() {
        let t = build_template(DatasetConfig::Overlaid);
        assert_eq!(
            sha256_hex(t.system_text.as_bytes()),
            "7e7c42bb98136f321c1044fc10a13e35bb11502dc24bc41d13f179ff547934fb"
        );
    }

    #[test]
    fn plain_has_no_overlay_language() {
        let t = squash(&build_template(DatasetConfig::Plain).system_text);
        assert!(!t.contains("blue line"));
        assert!(!t.contains("red dot"));
    }

    #[test]
    fn separated_mentions_two_images() {
        assert!(build_template(DatasetConfig::Separated).system_text.contains("two images"));
        assert!(squash(&build_template(DatasetConfig::Blurred).system_text).contains("blurred"));
    }

    #[test]
    fn every_template_ends_with_the_answer_format() {
        for c in DatasetConfig::ALL {
            let t = build_template(c);
            assert!(!t.user_preamble.is_empty());
            let tail = &t.system_text[t.system_text.rfind("**Example 1**").unwrap()..];
            for h in ["POSITIVE SIGNS:", "NEGATIVE SIGNS:", "RISKS:", "CROSSWALK:", "REASON:"] {
                assert!(tail.contains(h), "{c}: {h}");
            }
            assert!(t.system_text.ends_with("segment.\n") || t.system_text.ends_with("intersection.\n"));
        }
    }

    #[test]
    fn digest_tracks_every_part() {
        let base = bundle_digest("s", "u", &["a", "b"]);
        assert_eq!(base, bundle_digest("s", "u", &["a", "b"]));
        assert_ne!(base, bundle_digest("s", "u", &["b", "a"]));
        assert_ne!(base, bundle_digest("s ", "u", &["a", "b"]));
        assert_ne!(base, bundle_digest("s", "u", &["ab"]));
    }
}
