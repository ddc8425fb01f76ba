use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GeoError, ProjectedPoint, UtmCrs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelSize {
    pub x: f64,
    pub y: f64,
}

/// North-up RGB raster with an affine pixel-to-UTM mapping.
///
/// Pixel `(px, py)` addresses the upper-left corner of the sample at column
/// `px`, row `py`; `origin` is the projected position of pixel `(0, 0)`.
#[derive(Debug, Clone)]
pub struct GeoRaster {
    width: u32,
    height: u32,
    samples: Vec<u8>,
    pixel_size: PixelSize,
    origin: ProjectedPoint,
    crs: UtmCrs,
}

impl GeoRaster {
    pub fn new(
        width: u32,
        height: u32,
        samples: Vec<u8>,
        origin: (f64, f64),
        pixel_size: PixelSize,
        crs: UtmCrs,
    ) -> Result<Self, GeoError> {
        if width == 0 || height == 0 {
            return Err(GeoError::InvalidRaster(format!("empty raster {width}x{height}")));
        }
        let expected = width as usize * height as usize * 3;
        if samples.len() != expected {
            return Err(GeoError::InvalidRaster(format!(
                "sample buffer holds {} bytes, expected {expected}",
                samples.len()
            )));
        }
        if !(pixel_size.x > 0.0 && pixel_size.y > 0.0) {
            return Err(GeoError::InvalidRaster(format!(
                "pixel size must be positive, got ({}, {})",
                pixel_size.x, pixel_size.y
            )));
        }
        Ok(GeoRaster {
            width,
            height,
            samples,
            pixel_size,
            origin: ProjectedPoint {
                easting: origin.0,
                northing: origin.1,
                epsg: crs.epsg(),
            },
            crs,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Interleaved RGB samples, row-major.
    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    pub fn pixel_size(&self) -> PixelSize {
        self.pixel_size
    }

    pub fn origin(&self) -> ProjectedPoint {
        self.origin
    }

    pub fn crs(&self) -> &UtmCrs {
        &self.crs
    }

    pub fn epsg(&self) -> u32 {
        self.crs.epsg()
    }

    pub fn pixel_to_projected(&self, px: f64, py: f64) -> ProjectedPoint {
        ProjectedPoint {
            easting: self.origin.easting + px * self.pixel_size.x,
            northing: self.origin.northing - py * self.pixel_size.y,
            epsg: self.epsg(),
        }
    }

    pub fn projected_to_pixel(&self, p: ProjectedPoint) -> Result<(f64, f64), GeoError> {
        if p.epsg != self.epsg() {
            return Err(GeoError::ProjectionMismatch {
                expected: self.epsg(),
                found: p.epsg,
            });
        }
        Ok((
            (p.easting - self.origin.easting) / self.pixel_size.x,
            (self.origin.northing - p.northing) / self.pixel_size.y,
        ))
    }

    /// Content digest over georeferencing and samples; independent of the
    /// container the raster was loaded from.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(self.epsg().to_le_bytes());
        for v in [
            self.origin.easting,
            self.origin.northing,
            self.pixel_size.x,
            self.pixel_size.y,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update(&self.samples);
        crate::digest::hex(&h.finalize())
    }
}
