use serde::{Deserialize, Serialize};

use super::{GeoError, GeoRaster};

/// Square pixel window, `size` pixels on a side, with upper-left corner at
/// `(x0, y0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelWindow {
    pub y0: u32,
    pub x0: u32,
    pub size: u32,
}

impl PixelWindow {
    pub fn new(x0: u32, y0: u32, size: u32) -> Self {
        PixelWindow { y0, x0, size }
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.size > 0
            && self.x0 as u64 + self.size as u64 <= width as u64
            && self.y0 as u64 + self.size as u64 <= height as u64
    }

    /// Whether a fractional pixel position lies inside the window (edges included).
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let (x0, y0, s) = (self.x0 as f64, self.y0 as f64, self.size as f64);
        px >= x0 && px <= x0 + s && py >= y0 && py <= y0 + s
    }

    pub fn center(&self) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        (self.x0 as f64 + half, self.y0 as f64 + half)
    }
}

/// Every `size`×`size` window fully inside the raster, stepping by `stride`,
/// in row-major order.
pub fn enumerate_windows(raster: &GeoRaster, size: u32, stride: u32) -> Result<Vec<PixelWindow>, GeoError> {
    enumerate_windows_in(raster.width(), raster.height(), size, stride)
}

pub fn enumerate_windows_in(width: u32, height: u32, size: u32, stride: u32) -> Result<Vec<PixelWindow>, GeoError> {
    if size == 0 || size > width.min(height) {
        return Err(GeoError::InvalidWindow(format!(
            "window size {size} does not fit a {width}x{height} raster"
        )));
    }
    if stride == 0 {
        return Err(GeoError::InvalidWindow("stride must be at least 1".into()));
    }
    let cols = (width - size) / stride + 1;
    let rows = (height - size) / stride + 1;
    let mut out = Vec::with_capacity(cols as usize * rows as usize);
    for r in 0..rows {
        for c in 0..cols {
            out.push(PixelWindow::new(c * stride, r * stride, size));
        }
    }
    Ok(out)
}
