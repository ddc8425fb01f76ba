//! Dataset configurations as interchangeable renderers, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use image::RgbImage;

use crate::patch::{render_blurred, render_overlaid, render_plain, render_vector_layer, DatasetConfig, RenderStyle, Scene};
use crate::prompt::{build_template, PromptTemplate};

pub trait DatasetVariant: Send + Sync {
    fn config(&self) -> DatasetConfig;

    fn name(&self) -> &str {
        self.config().name()
    }

    /// Images in prompt order; the count equals `config().image_count()`.
    fn render(&self, scene: &Scene<'_>, style: &RenderStyle) -> Vec<RgbImage>;

    fn template(&self) -> PromptTemplate {
        build_template(self.config())
    }
}

pub struct Plain;
pub struct Separated;
pub struct Overlaid;
pub struct Blurred;

impl DatasetVariant for Plain {
    fn config(&self) -> DatasetConfig {
        DatasetConfig::Plain
    }

    fn render(&self, scene: &Scene<'_>, _style: &RenderStyle) -> Vec<RgbImage> {
        vec![render_plain(scene.raster, &scene.window)]
    }
}

impl DatasetVariant for Separated {
    fn config(&self) -> DatasetConfig {
        DatasetConfig::Separated
    }

    fn render(&self, scene: &Scene<'_>, style: &RenderStyle) -> Vec<RgbImage> {
        vec![
            render_plain(scene.raster, &scene.window),
            render_vector_layer(scene.raster, &scene.window, scene.approach, style),
        ]
    }
}

impl DatasetVariant for Overlaid {
    fn config(&self) -> DatasetConfig {
        DatasetConfig::Overlaid
    }

    fn render(&self, scene: &Scene<'_>, style: &RenderStyle) -> Vec<RgbImage> {
        vec![render_overlaid(scene.raster, &scene.window, scene.approach, style)]
    }
}

impl DatasetVariant for Blurred {
    fn config(&self) -> DatasetConfig {
        DatasetConfig::Blurred
    }

    fn render(&self, scene: &Scene<'_>, style: &RenderStyle) -> Vec<RgbImage> {
        vec![render_blurred(scene, style)]
    }
}

#[derive(Clone, Default)]
pub struct VariantRegistry {
    variants: BTreeMap<String, Arc<dyn DatasetVariant>>,
}

impl VariantRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four built-in configurations.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(Plain));
        r.register(Arc::new(Separated));
        r.register(Arc::new(Overlaid));
        r.register(Arc::new(Blurred));
        r
    }

    /// Replaces any variant already registered under the same name.
    pub fn register(&mut self, v: Arc<dyn DatasetVariant>) {
        self.variants.insert(v.name().to_ascii_lowercase(), v);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn DatasetVariant>> {
        self.variants.get(&name.trim().to_ascii_lowercase()).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variants.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for VariantRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
