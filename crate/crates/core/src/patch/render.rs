use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::blur::gaussian_blur;
use super::draw::{buffer, disc, stroke, Mask};
use super::PatchError;
use crate::geo::{GeoRaster, PixelWindow, ProjectedPoint};
use crate::geom::Vec2;
use crate::road::Approach;

const WHITE: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub line_color: [u8; 3],
    pub line_width: u32,
    pub dot_color: [u8; 3],
    pub dot_radius: u32,
    pub blur_sigma: f64,
    pub road_buffer: u32,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            line_color: [0, 0, 255],
            line_width: 3,
            dot_color: [255, 0, 0],
            dot_radius: 5,
            blur_sigma: 5.0,
            road_buffer: 20,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), PatchError> {
        let bad = |m: &str| Err(PatchError::InvalidStyle(m.to_string()));
        if self.line_width < 1 {
            return bad("line_width must be at least 1");
        }
        if self.dot_radius < 1 {
            return bad("dot_radius must be at least 1");
        }
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            return bad("blur_sigma must be positive");
        }
        if self.road_buffer < self.line_width {
            return bad("road_buffer must be at least line_width");
        }
        Ok(())
    }
}

/// Everything a renderer needs for one sample.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub raster: &'a GeoRaster,
    pub window: PixelWindow,
    pub approach: &'a Approach,
    /// All approaches of the same intersection in this window, `approach`
    /// included; their union defines the unblurred road region.
    pub context: &'a [Approach],
}

fn local(raster: &GeoRaster, window: &PixelWindow, pts: &[ProjectedPoint]) -> Vec<Vec2> {
    pts.iter()
        .map(|p| {
            let (x, y) = raster
                .projected_to_pixel(*p)
                .expect("approach geometry shares the raster CRS");
            Vec2::new(x - window.x0 as f64, y - window.y0 as f64)
        })
        .collect()
}

/// Byte-exact crop of the raster.
pub fn render_plain(raster: &GeoRaster, window: &PixelWindow) -> RgbImage {
    let mut out = RgbImage::new(window.size, window.size);
    let row = window.size as usize * 3;
    let src = raster.samples();
    let stride = raster.width() as usize * 3;
    let dst: &mut [u8] = &mut out;
    for y in 0..window.size as usize {
        let start = (window.y0 as usize + y) * stride + window.x0 as usize * 3;
        dst[y * row..(y + 1) * row].copy_from_slice(&src[start..start + row]);
    }
    out
}

/// Annotation pixels: the centerline stroke, then the intersection dot on top.
#[derive(Debug, Clone)]
pub struct Overlay {
    line: Mask,
    dot: Mask,
    line_color: [u8; 3],
    dot_color: [u8; 3],
}

impl Overlay {
    pub fn color_at(&self, x: u32, y: u32) -> Option<[u8; 3]> {
        if self.dot.get(x, y) {
            Some(self.dot_color)
        } else if self.line.get(x, y) {
            Some(self.line_color)
        } else {
            None
        }
    }

    fn paint(&self, img: &mut RgbImage) {
        for (x, y, px) in img.enumerate_pixels_mut() {
            if let Some(c) = self.color_at(x, y) {
                *px = Rgb(c);
            }
        }
    }
}

pub fn overlay_layer(raster: &GeoRaster, window: &PixelWindow, approach: &Approach, style: &RenderStyle) -> Overlay {
    let line = local(raster, window, &approach.centerline);
    let mut line_mask = Mask::new(window.size, window.size);
    stroke(&mut line_mask, &line, style.line_width as f64);
    let mut dot_mask = Mask::new(window.size, window.size);
    let end = *line.last().expect("centerline is never empty");
    disc(&mut dot_mask, end, style.dot_radius as f64);
    Overlay {
        line: line_mask,
        dot: dot_mask,
        line_color: style.line_color,
        dot_color: style.dot_color,
    }
}

/// Annotation on a white background, no raster content.
pub fn render_vector_layer(
    raster: &GeoRaster,
    window: &PixelWindow,
    approach: &Approach,
    style: &RenderStyle,
) -> RgbImage {
    let mut img = RgbImage::from_pixel(window.size, window.size, Rgb(WHITE));
    overlay_layer(raster, window, approach, style).paint(&mut img);
    img
}

/// Plain crop with annotation pixels replaced (no blending).
pub fn render_overlaid(raster: &GeoRaster, window: &PixelWindow, approach: &Approach, style: &RenderStyle) -> RgbImage {
    let mut img = render_plain(raster, window);
    overlay_layer(raster, window, approach, style).paint(&mut img);
    img
}

/// Pixels within `road_buffer` of any of the given centerlines.
pub fn road_mask(raster: &GeoRaster, window: &PixelWindow, approaches: &[Approach], style: &RenderStyle) -> Mask {
    let mut mask = Mask::new(window.size, window.size);
    for a in approaches {
        buffer(&mut mask, &local(raster, window, &a.centerline), style.road_buffer as f64);
    }
    mask
}

/// Blur everything outside the road mask, keep the road region byte-exact,
/// then paint the annotation.
pub fn render_blurred(scene: &Scene<'_>, style: &RenderStyle) -> RgbImage {
    let plain = render_plain(scene.raster, &scene.window);
    let blurred = gaussian_blur(&plain, style.blur_sigma);
    let mut mask = road_mask(scene.raster, &scene.window, scene.context, style);
    mask.union(&road_mask(
        scene.raster,
        &scene.window,
        std::slice::from_ref(scene.approach),
        style,
    ));
    let mut img = RgbImage::from_fn(scene.window.size, scene.window.size, |x, y| {
        if mask.get(x, y) {
            *plain.get_pixel(x, y)
        } else {
            *blurred.get_pixel(x, y)
        }
    });
    overlay_layer(scene.raster, &scene.window, scene.approach, style).paint(&mut img);
    img
}
