//! Zero-shot crosswalk labeling from georeferenced imagery and OpenStreetMap
//! road networks.

pub mod digest;
pub mod eval;
pub mod export;
pub mod gateway;
pub mod geo;
pub mod geom;
pub mod patch;
pub mod pipeline;
pub mod prompt;
pub mod provenance;
pub mod road;
pub mod synth;
pub mod variant;
pub mod verdict;
