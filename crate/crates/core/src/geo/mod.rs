//! Georeferenced rasters, UTM projection and sliding-window tiling.

mod geotiff;
mod raster;
pub mod utm;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geotiff::{load_raster, read_raster, write_geotiff};
pub use raster::{GeoRaster, PixelSize};
pub use utm::{utm_to_wgs84, wgs84_to_utm, Hemisphere, UtmCrs};
pub use window::{enumerate_windows, enumerate_windows_in, PixelWindow};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("raster has no usable georeferencing: {0}")]
    MissingGeoreference(String),
    #[error("unsupported raster encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("raster CRS is geographic, a projected CRS is required")]
    ProjectionNotProjected,
    #[error("unsupported projected CRS EPSG:{0} (only UTM zones are accepted)")]
    UnsupportedProjection(u32),
    #[error("rotated or sheared rasters are not supported")]
    RotatedRaster,
    #[error("projection mismatch: expected EPSG:{expected}, found EPSG:{found}")]
    ProjectionMismatch { expected: u32, found: u32 },
    #[error("point ({lat}, {lon}) is outside the accuracy envelope of UTM zone {zone}")]
    OutOfZone { lat: f64, lon: f64, zone: u8 },
    #[error("invalid UTM zone {0}")]
    InvalidZone(u8),
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid window request: {0}")]
    InvalidWindow(String),
    #[error("tiff: {0}")]
    Tiff(#[from] tiff::TiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// WGS 84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0 {
            return Err(GeoError::InvalidCoordinate(format!("lat {lat}, lon {lon}")));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Easting/northing in metres within the CRS named by `epsg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub easting: f64,
    pub northing: f64,
    pub epsg: u32,
}

impl ProjectedPoint {
    pub fn distance(&self, other: &ProjectedPoint) -> f64 {
        (self.easting - other.easting).hypot(self.northing - other.northing)
    }
}
