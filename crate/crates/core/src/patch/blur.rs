//! Separable Gaussian blur with half-sample symmetric boundary reflection.

use image::RgbImage;

/// Normalised kernel with half-width `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Maps any index onto `0..n` by mirroring about the outer pixel edges
/// (`... c b a | a b c ... x y z | z y x ...`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Blurs interleaved 3-channel `f64` samples; returns unrounded values.
pub fn gaussian_blur_f64(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    assert_eq!(src.len(), width * height * 3, "buffer does not match dimensions");
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;

    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..height {
        for x in 0..width {
            let out = &mut tmp[(y * width + x) * 3..][..3];
            for (k, wgt) in kernel.iter().enumerate() {
                let sx = reflect(x as i64 + k as i64 - radius, width);
                let base = (y * width + sx) * 3;
                for c in 0..3 {
                    out[c] += wgt * src[base + c];
                }
            }
        }
    }

    let mut dst = vec![0.0f64; src.len()];
    for y in 0..height {
        for x in 0..width {
            let out = &mut dst[(y * width + x) * 3..][..3];
            for (k, wgt) in kernel.iter().enumerate() {
                let sy = reflect(y as i64 + k as i64 - radius, height);
                let base = (sy * width + x) * 3;
                for c in 0..3 {
                    out[c] += wgt * tmp[base + c];
                }
            }
        }
    }
    dst
}

pub fn gaussian_blur(img: &RgbImage, sigma: f64) -> RgbImage {
    let (w, h) = img.dimensions();
    let src: Vec<f64> = img.as_raw().iter().map(|v| *v as f64).collect();
    let blurred = gaussian_blur_f64(&src, w as usize, h as usize, sigma);
    let bytes = blurred.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    RgbImage::from_raw(w, h, bytes).expect("dimensions preserved")
}
