//! Hard-edged rasterization into boolean masks.
//!
//! Pixel `(x, y)` is sampled at the point `(x, y)` in window-local pixel
//! coordinates; there is no anti-aliasing.

use crate::geom::{point_polyline_distance, Vec2};

/// Row-major coverage mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    fn set(&mut self, x: u32, y: u32) {
        self.bits[y as usize * self.width as usize + x as usize] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn union(&mut self, other: &Mask) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Marks every pixel in the (clamped) bounding box that satisfies `inside`.
    fn fill_where(&mut self, min: Vec2, max: Vec2, inside: impl Fn(Vec2) -> bool) {
        if self.width == 0 || self.height == 0 {
            return;
        }
        let x0 = min.x.floor().max(0.0) as i64;
        let y0 = min.y.floor().max(0.0) as i64;
        let x1 = (max.x.ceil() as i64).min(self.width as i64 - 1);
        let y1 = (max.y.ceil() as i64).min(self.height as i64 - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if inside(Vec2::new(x as f64, y as f64)) {
                    self.set(x as u32, y as u32);
                }
            }
        }
    }
}

/// Pixels within `width / 2` of the polyline, with flat ends and round joins.
pub fn stroke(mask: &mut Mask, line: &[Vec2], width: f64) {
    let half = width / 2.0;
    for s in line.windows(2) {
        let (a, b) = (s[0], s[1]);
        let d = b.sub(a);
        let len2 = d.dot(d);
        if len2 == 0.0 {
            continue;
        }
        let len = len2.sqrt();
        let min = Vec2::new(a.x.min(b.x) - half, a.y.min(b.y) - half);
        let max = Vec2::new(a.x.max(b.x) + half, a.y.max(b.y) + half);
        mask.fill_where(min, max, |p| {
            let ap = p.sub(a);
            let t = ap.dot(d) / len2;
            (0.0..=1.0).contains(&t) && ap.cross(d).abs() / len <= half
        });
    }
    if line.len() > 2 {
        for v in &line[1..line.len() - 1] {
            disc(mask, *v, half);
        }
    }
}

/// Pixels within `radius` of `center`.
pub fn disc(mask: &mut Mask, center: Vec2, radius: f64) {
    let r = Vec2::new(radius, radius);
    mask.fill_where(center.sub(r), center.add(r), |p| p.sub(center).norm() <= radius);
}

/// Pixels within `radius` of the polyline (round caps).
pub fn buffer(mask: &mut Mask, line: &[Vec2], radius: f64) {
    if line.is_empty() {
        return;
    }
    let min = line.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |m, p| Vec2::new(m.x.min(p.x), m.y.min(p.y)));
    let max = line
        .iter()
        .fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, p| Vec2::new(m.x.max(p.x), m.y.max(p.y)));
    let r = Vec2::new(radius, radius);
    mask.fill_where(min.sub(r), max.add(r), |p| point_polyline_distance(p, line) <= radius);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn horizontal_stroke_covers_three_rows() {
        let mut m = Mask::new(256, 256);
        stroke(&mut m, &[Vec2::new(0.0, 128.0), Vec2::new(255.0, 128.0)], 3.0);
        for y in 0..256 {
            for x in 0..256 {
                assert_eq!(m.get(x, y), (127..=129).contains(&y), "({x},{y})");
            }
        }
    }

    #[test]
    fn disc_is_symmetric() {
        let mut m = Mask::new(21, 21);
        disc(&mut m, Vec2::new(10.0, 10.0), 5.0);
        // Lattice points with x^2 + y^2 <= 25.
        let expected = (-5i32..=5)
            .flat_map(|x| (-5i32..=5).map(move |y| (x, y)))
            .filter(|(x, y)| x * x + y * y <= 25)
            .count();
        assert_eq!(m.count(), expected);
        assert_eq!(m.count(), 81);
    }

    #[test]
    fn clipped_shapes_stay_in_bounds() {
        let mut m = Mask::new(16, 16);
        disc(&mut m, Vec2::new(-2.0, 15.0), 5.0);
        stroke(&mut m, &[Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)], 3.0);
        buffer(&mut m, &[Vec2::new(20.0, 0.0), Vec2::new(20.0, 40.0)], 6.0);
        assert!(m.count() > 0);
    }

    /// Brute-force oracle: count lattice points inside the flat-ended strip
    /// by testing every pixel of the image against the segment directly.
    fn strip_count(a: Vec2, b: Vec2, width: f64, size: u32) -> usize {
        let d = b.sub(a);
        let len = d.norm();
        let mut n = 0;
        for y in 0..size {
            for x in 0..size {
                let p = Vec2::new(x as f64, y as f64).sub(a);
                let along = p.dot(d) / len;
                let across = p.cross(d).abs() / len;
                if along >= 0.0 && along <= len && across <= width / 2.0 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn stroke_area_matches_length_times_width() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Vec2::new(rng.random_range(20.0..236.0), rng.random_range(20.0..236.0));
            let b = Vec2::new(rng.random_range(20.0..236.0), rng.random_range(20.0..236.0));
            let len = b.sub(a).norm();
            if len < 32.0 {
                continue;
            }
            let mut m = Mask::new(256, 256);
            stroke(&mut m, &[a, b], 3.0);
            assert_eq!(m.count(), strip_count(a, b, 3.0, 256));
            let ideal = len * 3.0;
            assert!(((m.count() as f64) - ideal).abs() <= 0.1 * ideal, "len {len}: {} vs {ideal}", m.count());
        }
    }
}
